"""
Command line: simulate, estimate, study, pipeline and replay.

Every command writes a manifest.json holding all resolved options; `pyfcar replay`
reruns a command from its manifest alone.
"""
import os
import sys
import json
import logging
import functools
from collections import namedtuple
from datetime import datetime

import click
import numpy as np
import pandas as pd

from . import __version__
from .common import FCARError, PipelineError, IngestionError
from .timeseries import read_series_csv
from .estimator import SBKEstimator
from .simulation import (SimulationConfig, simulate_design, study_config, EfficiencyStudy, write_study,
                         GENERATOR_MODES, EXOGENOUS, STUDY_PRESETS)
from .selection import parse_int_set, run_pipeline, write_pipeline, DEFAULT_D_SET, DEFAULT_P_SET

logger = logging.getLogger(__name__)

RunManifest = namedtuple('RunManifest', ['command', 'parameters', 'seed', 'tool_version', 'elapsed_seconds'])

THREADS_ENV = 'PYFCAR_THREADS'


class FloatList(click.ParamType):
    name = 'floats'

    def convert(self, value, param, ctx):
        if isinstance(value, (list, tuple)):
            return tuple(float(v) for v in value)
        try:
            return tuple(float(v) for v in value.split(',') if v.strip())
        except ValueError:
            self.fail('%r is not a comma separated list of numbers' % value, param, ctx)


class IntSet(click.ParamType):
    name = 'ints'

    def convert(self, value, param, ctx):
        if isinstance(value, (list, tuple)):
            return tuple(int(v) for v in value)
        try:
            return parse_int_set(value)
        except ValueError:
            self.fail('%r is not an integer set such as 1-10 or 1,4' % value, param, ctx)


FLOATS = FloatList()
INTS = IntSet()


def _guarded(fun):
    "Maps library errors to exit codes: usage 2, data 3, numerical 4"
    @functools.wraps(fun)
    def wrapper(*args, **kwargs):
        try:
            return fun(*args, **kwargs)
        except FCARError as err:
            logger.debug('command failed', exc_info=True)
            click.echo('error: %s' % err, err=True)
            sys.exit(err.exit_code)
        except ValueError as err:
            raise click.UsageError(str(err))
    return wrapper


def _output_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _to_csv(frame, path):
    frame.to_csv(path, index=False, lineterminator='\n')


def _write_manifest(output_dir, command, params, seed, started):
    elapsed = (datetime.now() - started).total_seconds()
    manifest = RunManifest(command, params, seed, __version__, elapsed)
    with open(os.path.join(output_dir, 'manifest.json'), 'wt') as fh:
        json.dump(manifest._asdict(), fh, indent=2, sort_keys=True)
        fh.write('\n')
    logger.info('%s secs=%g', command, elapsed)
    return manifest


def _read_input(path, frequency=None):
    try:
        return read_series_csv(path, frequency)
    except FCARError as err:
        raise PipelineError('ingest', err)


@click.group()
@click.option('-v', '--verbose', count=True, help='-v info, -vv debug logging on stderr')
@click.version_option(__version__)
def main(verbose):
    "Spline-backfitted kernel estimation of functional-coefficient autoregressive models."
    level = logging.WARNING if verbose == 0 else (logging.INFO if verbose == 1 else logging.DEBUG)
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')


@main.command()
@click.option('--p', type=int, required=True, help='autoregressive order')
@click.option('--d', type=int, default=None, help='delay (default p+1)')
@click.option('--A', 'A', type=FLOATS, required=True, help='amplitudes A_1,...,A_p')
@click.option('--omega', type=float, required=True)
@click.option('--n', type=int, default=1000, show_default=True)
@click.option('--burn-in', type=int, default=200, show_default=True)
@click.option('--mode', type=click.Choice(GENERATOR_MODES), default=EXOGENOUS, show_default=True)
@click.option('--seed', type=click.IntRange(min=0), default=0, show_default=True)
@click.option('--noise-scale', type=float, default=1.0, show_default=True)
@click.option('--output-dir', type=click.Path(file_okay=False), default='.', show_default=True)
@_guarded
def simulate(**params):
    "Simulate an FCAR series: series.csv (+ responses.csv in exogenous mode)."
    started = datetime.now()
    cfg = SimulationConfig(params['p'], params['d'], params['A'], params['omega'], params['n'],
                           params['burn_in'], params['mode'], params['seed'], params['noise_scale'])
    params['d'] = cfg.d
    sim = simulate_design(cfg)
    out = _output_dir(params['output_dir'])
    _to_csv(pd.DataFrame({'t': np.arange(1, sim.series.n + 1), 'value': sim.series.values}),
            os.path.join(out, 'series.csv'))
    if cfg.generator_mode == EXOGENOUS:
        _to_csv(pd.DataFrame({'t': sim.design.t, 'response': sim.design.response}),
                os.path.join(out, 'responses.csv'))
    _write_manifest(out, 'simulate', params, cfg.seed, started)


@main.command()
@click.option('--input', 'input_path', required=True, help='series CSV')
@click.option('--p', type=int, required=True)
@click.option('--d', type=int, required=True)
@click.option('--grid', type=click.IntRange(min=2), default=101, show_default=True, help='curve grid points')
@click.option('--bandwidth', type=float, default=None, help='kernel bandwidth (default rule of thumb)')
@click.option('--knots', type=int, default=None, help='interior knots (default knot-count rule)')
@click.option('--c1', type=float, default=1.0, show_default=True)
@click.option('--c2', type=float, default=1.0, show_default=True)
@click.option('--responses', 'responses_path', default=None, help='responses.csv replacing X_t (exogenous runs)')
@click.option('--strict-knots', is_flag=True, help='fail on a singular spline design instead of reducing knots')
@click.option('--output-dir', type=click.Path(file_okay=False), default='.', show_default=True)
@_guarded
def estimate(**params):
    "Fit SBK for given (d, p): coefficients.csv, fitted.csv."
    started = datetime.now()
    series = _read_input(params['input_path'])
    response = None
    if params['responses_path'] is not None:
        try:
            response = pd.read_csv(params['responses_path'])['response'].to_numpy(dtype=np.float64)
        except (OSError, KeyError, ValueError) as err:
            raise PipelineError('ingest', IngestionError(str(err)))
    est = SBKEstimator(params['p'], params['d'], params['c1'], params['c2'], params['bandwidth'], params['knots'],
                       shrink_knots=not params['strict_knots'])
    try:
        est.fit(series, response)
        us = np.linspace(est.design.a, est.design.b, params['grid'])
        curves = est.curves(us)
        fitted = est.fitted_values()
    except FCARError as err:
        raise PipelineError('fit', err)
    out = _output_dir(params['output_dir'])
    coefficients = pd.DataFrame({'u': us})
    for curve in curves:
        coefficients['m%d' % curve.component] = curve.values
    _to_csv(coefficients, os.path.join(out, 'coefficients.csv'))
    _to_csv(pd.DataFrame({'t': est.design.t, 'actual': est.design.response, 'fitted': fitted}),
            os.path.join(out, 'fitted.csv'))
    _write_manifest(out, 'estimate', params, 0, started)


@main.command()
@click.option('--p', type=int, required=True)
@click.option('--n', 'n_values', type=INTS, default='100,500,1000,1500', show_default=True)
@click.option('--reps', type=click.IntRange(min=1), default=500, show_default=True)
@click.option('--components', type=INTS, default='1,4', show_default=True)
@click.option('--seed', type=click.IntRange(min=0), default=0, show_default=True)
@click.option('--A', 'A', type=FLOATS, default=None, help='amplitudes (default: preset for p=4, 10)')
@click.option('--omega', type=float, default=None)
@click.option('--d', type=int, default=None)
@click.option('--mode', type=click.Choice(GENERATOR_MODES), default=EXOGENOUS, show_default=True)
@click.option('--burn-in', type=int, default=200, show_default=True)
@click.option('--noise-scale', type=float, default=1.0, show_default=True)
@click.option('--c1', type=float, default=1.0, show_default=True)
@click.option('--c2', type=float, default=1.0, show_default=True)
@click.option('--grid-points', type=click.IntRange(min=2), default=101, show_default=True)
@click.option('--central', type=click.FloatRange(0.0, 1.0), default=0.9, show_default=True)
@click.option('--kde-points', type=click.IntRange(min=2), default=512, show_default=True)
@click.option('--fixed-bandwidth', is_flag=True, help='one bandwidth per cell, from its first replication')
@click.option('--strict-knots', is_flag=True, help='redraw on a singular spline design instead of reducing knots')
@click.option('--threads', type=click.IntRange(min=1), default=None, envvar=THREADS_ENV)
@click.option('--output-dir', type=click.Path(file_okay=False), default='.', show_default=True)
@_guarded
def study(**params):
    "Relative efficiency study: samples.csv, summary.csv, density_*.csv."
    started = datetime.now()
    p = params['p']
    bad = [c for c in params['components'] if not 1 <= c <= p]
    if bad:
        raise click.BadParameter('components %s outside 1..%d' % (bad, p), param_hint='--components')
    if p not in STUDY_PRESETS and (params['A'] is None or params['omega'] is None):
        raise click.BadParameter('no preset for p=%d; give --A and --omega' % p, param_hint='--A')
    cfg = study_config(p, params['n_values'], params['reps'], params['components'], params['seed'],
                       A=params['A'], omega=params['omega'], d=params['d'], generator_mode=params['mode'],
                       burn_in=params['burn_in'], noise_scale=params['noise_scale'], c1=params['c1'],
                       c2=params['c2'], grid_points=params['grid_points'], central=params['central'],
                       kde_points=params['kde_points'], bandwidth_per_replication=not params['fixed_bandwidth'],
                       shrink_knots=not params['strict_knots'], threads=params['threads'])
    params.update(A=list(cfg.A), omega=cfg.omega, d=cfg.d)
    reports = EfficiencyStudy(cfg).run()
    out = _output_dir(params['output_dir'])
    write_study(reports, out)
    _write_manifest(out, 'study', params, cfg.seed, started)


@main.command()
@click.option('--input', 'input_path', required=True, help='positive series CSV (period,value or value)')
@click.option('--frequency', type=int, default=None, help='periods per year (default from labels, else 4)')
@click.option('--bandwidth', type=float, default=30.0, show_default=True, help='detrending bandwidth')
@click.option('--lag', type=click.IntRange(min=1), default=4, show_default=True, help='seasonal lag')
@click.option('--d-set', type=INTS, default='%d-%d' % (DEFAULT_D_SET[0], DEFAULT_D_SET[-1]), show_default=True)
@click.option('--p-set', type=INTS, default='%d-%d' % (DEFAULT_P_SET[0], DEFAULT_P_SET[-1]), show_default=True)
@click.option('--skip-log', is_flag=True, help='input is already on the log scale')
@click.option('--grid', type=click.IntRange(min=2), default=101, show_default=True, help='curve grid points')
@click.option('--strict-knots', is_flag=True, help='fail cells on a singular spline design')
@click.option('--threads', type=click.IntRange(min=1), default=None, envvar=THREADS_ENV)
@click.option('--output-dir', type=click.Path(file_okay=False), default='.', show_default=True)
@_guarded
def pipeline(**params):
    "Log, detrend, difference, (d, p) grid search and AR(1) comparison."
    started = datetime.now()
    raw = _read_input(params['input_path'], params['frequency'])
    report = run_pipeline(raw, params['bandwidth'], params['lag'], params['d_set'], params['p_set'],
                          skip_log=params['skip_log'], grid_points=params['grid'],
                          shrink_knots=not params['strict_knots'], threads=params['threads'])
    out = _output_dir(params['output_dir'])
    write_pipeline(report, out)
    _write_manifest(out, 'pipeline', params, 0, started)


@main.command()
@click.argument('manifest', type=click.Path(exists=True, dir_okay=False))
@click.option('--output-dir', type=click.Path(file_okay=False), default=None, help='override the recorded one')
@click.pass_context
def replay(ctx, manifest, output_dir):
    "Rerun a command from its manifest.json."
    with open(manifest, 'rt') as fh:
        recorded = json.load(fh)
    command = main.commands.get(recorded.get('command'))
    if command is None or command is replay:
        raise click.BadParameter('unknown command %r in manifest' % recorded.get('command'))
    params = dict(recorded['parameters'])
    if output_dir is not None:
        params['output_dir'] = output_dir
    ctx.invoke(command, **params)


if __name__ == '__main__':
    main()
