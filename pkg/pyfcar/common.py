"""
Shared helpers: error hierarchy, exit codes, array checks and period labels.
"""
import re
import numpy as np

# CLI exit codes
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class FCARError(Exception):
    "Base class of all errors raised by pyfcar"
    exit_code = EXIT_NUMERICAL


class DataError(FCARError, ValueError):
    "Input data violates a precondition"
    exit_code = EXIT_DATA


class NumericalError(FCARError, ArithmeticError):
    "A numerical procedure could not produce an answer"
    exit_code = EXIT_NUMERICAL


class SeriesTooShort(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class NonPositiveValue(DataError):
    def __init__(self, index, value, label=None):
        where = 'observation %d' % index
        if label is not None:
            where += ' (period %s)' % label
        super(NonPositiveValue, self).__init__('%s is not strictly positive: %r' % (where, value))
        self.index = index
        self.value = value


class OutOfRange(DataError):
    pass


class ComponentOutOfRange(DataError):
    pass


class IngestionError(DataError):
    pass


class SingularDesign(NumericalError):
    def __init__(self, msg, empty_bins=(), degenerate_columns=(), thin_bins=()):
        details = []
        if empty_bins:
            details.append('empty bins %s' % list(empty_bins))
        if thin_bins:
            details.append('thin bins %s' % list(thin_bins))
        if degenerate_columns:
            details.append('degenerate (lag, bin) columns %s' % list(degenerate_columns))
        if details:
            msg = '%s: %s' % (msg, '; '.join(details))
        super(SingularDesign, self).__init__(msg)
        self.empty_bins = tuple(empty_bins)
        self.degenerate_columns = tuple(degenerate_columns)
        self.thin_bins = tuple(thin_bins)


class EmptyWindow(NumericalError):
    pass


class DegeneratePilot(NumericalError):
    pass


class InsufficientLocalData(NumericalError):
    pass


class SingularLocalFit(NumericalError):
    pass


class ZeroDenominator(NumericalError):
    pass


class ExplosiveSeries(NumericalError):
    pass


class StudyAborted(NumericalError):
    pass


class AllCellsFailed(NumericalError):
    pass


class DegenerateRegressor(NumericalError):
    pass


class PipelineError(FCARError):
    "Error raised inside a named pipeline stage; exit code follows the cause"
    def __init__(self, stage, cause):
        super(PipelineError, self).__init__('[%s] %s' % (stage, cause))
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, 'exit_code', EXIT_NUMERICAL)


def as_vector(values, name='values'):
    "Float copy of values as a read-only 1-d array; rejects non-finite entries"
    arr = np.array(values, dtype=np.float64).reshape(-1)
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size > 0:
        raise NonFiniteValue('%s has non-finite entry at index %d' % (name, bad[0]))
    arr.setflags(write=False)
    return arr


def frozen(arr):
    arr = np.asarray(arr)
    arr.setflags(write=False)
    return arr


# period labels 'YYYY-Qq' and 'YYYY-Mmm'
_RE_QUARTER = re.compile(r'^(\d{4})-Q([1-4])$')
_RE_MONTH = re.compile(r'^(\d{4})-M?(\d{1,2})$')


def label_frequency(label):
    "Periods per year implied by a label, or None if the format is unknown"
    if label is None:
        return None
    if _RE_QUARTER.match(label):
        return 4
    if _RE_MONTH.match(label):
        return 12
    return None


def shift_label(label, k, frequency):
    "Advance a period label by k periods; None when the label format is not understood"
    if label is None:
        return None
    m = _RE_QUARTER.match(label)
    if m and frequency == 4:
        pos = int(m.group(1)) * 4 + int(m.group(2)) - 1 + k
        return '%d-Q%d' % (pos // 4, pos % 4 + 1)
    m = _RE_MONTH.match(label)
    if m and frequency == 12:
        pos = int(m.group(1)) * 12 + int(m.group(2)) - 1 + k
        return '%d-M%02d' % (pos // 12, pos % 12 + 1)
    return None
