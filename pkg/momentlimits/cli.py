"""
Command-line entry point ``momentlimits``.

Subcommands ``bound``, ``spade``, ``direct``, ``demo`` and ``sweep`` each
validate a run configuration, compute, write JSON/CSV outputs and a
manifest into ``--out``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 failed check.
"""
import argparse
import logging
import os
import sys

import mpmath
from babel import numbers

from momentlimits import config, direct, hankel, output, scaling, spade
from momentlimits.errors import CheckFailure, ConfigError, MomentLimitsError
from momentlimits.measure import is_szego, standardize
from momentlimits.submodel import MomentFunctional, TiltedSubmodel, purified_score_norm, quantum_bound
from momentlimits.utils import precision

log = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-15
BIAS_Z_LIMIT = 4
VARIANCE_RATIO_TOLERANCE = 0.2
DATA_PROCESSING_SLACK = 1e-6


def _common_arguments():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='TOML configuration file')
    common.add_argument('--precision', help='mantissa bits (default: $MOMENTLIMITS_PRECISION or 256)')
    common.add_argument('--out', help='output directory')
    common.add_argument('--json', action='store_true', default=None, help='write JSON only, no CSV')
    common.add_argument('--check', action='store_true', default=None, help='run acceptance checks')
    common.add_argument('--locale', help='locale for messages and the console summary, e.g. de_DE')
    common.add_argument('--workers', help='worker processes for sweeps and replicates')
    return common


def _object_arguments(parser, delta='0.05', mu=True):
    parser.add_argument('--p0', help='object measure: a built-in name or a CSV of atoms')
    parser.add_argument('--delta', help='object half-width in Airy units (default %s)' % delta)
    if mu:
        parser.add_argument('--mu', help='moment order, at least 1')


def _psf_arguments(parser):
    parser.add_argument('--psf', help='PSF family: %s' % ', '.join(sorted(direct.PSF_FAMILIES)))
    parser.add_argument('--psf-width', help='width parameter of the PSF family')
    parser.add_argument('--psf-power', help='power p of super-gaussian and lorentzian PSFs')


def _budget_arguments(parser):
    parser.add_argument('--m', help='number of temporal modes, e.g. 1e7')
    parser.add_argument('--eps', help='photon probability per temporal mode')
    parser.add_argument('--n', help='expected photon number N = M * eps')


def _sweep_arguments(parser):
    parser.add_argument('--sweep', help='object sizes, lo:hi:count or a comma separated list')
    parser.add_argument('--expect', help='expected log-log slope; a mismatch fails the run')
    parser.add_argument('--expect-tol', help='tolerance on the slope (default 0.2)')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='momentlimits',
        description='Precision limits for generalized moments of subdiffraction objects.')
    parser.add_argument('-v', '--verbose', action='count', default=0, help='INFO logging, DEBUG with -vv')
    parser.add_argument('-q', '--quiet', action='store_true', help='warnings and errors only')
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True
    common = _common_arguments()

    bound = commands.add_parser('bound', parents=[common], help='quantum lower bound')
    _object_arguments(bound)
    bound.add_argument('--q', help='frequency measure: gaussian or hard-pupil')
    bound.add_argument('--n', help='expected photon number')
    bound.add_argument('--functional', help='monomial (x**mu) or spade (the SPADE-measured functional)')
    bound.add_argument('--j', help='fixed truncation order (default: adaptive)')
    bound.add_argument('--tol', help='relative tolerance of the adaptive truncation')
    bound.add_argument('--j-cap', help='largest truncation order')
    bound.add_argument('--dump-hankel', action='store_true', default=None,
                       help='write the Hankel matrix, its factors and the lambda_min profile as CSV')
    _sweep_arguments(bound)

    spade_parser = commands.add_parser('spade', parents=[common], help='SPADE Monte Carlo')
    _object_arguments(spade_parser, delta='0.2', mu=False)
    spade_parser.add_argument('--q', help='frequency measure, gaussian')
    spade_parser.add_argument('--mode', help='modes to count, even:<n,...> or odd:<n>')
    _budget_arguments(spade_parser)
    spade_parser.add_argument('--replicates', help='number of independent experiments')
    spade_parser.add_argument('--seed', help='random seed (required)')
    spade_parser.add_argument('--poisson', action='store_true', default=None, help='Poisson counts')

    direct_parser = commands.add_parser('direct', parents=[common], help='direct-imaging Cramer-Rao bound')
    _object_arguments(direct_parser)
    _psf_arguments(direct_parser)
    direct_parser.add_argument('--n', help='expected photon number')
    direct_parser.add_argument('--delta0', help='envelope offset, at least delta')
    direct_parser.add_argument('--experimental', action='store_true', default=None,
                               help='allow PSFs with zeros; results are unvalidated')
    _sweep_arguments(direct_parser)

    demo = commands.add_parser('demo', parents=[common], help='exponent table across orders')
    demo.add_argument('--p0', help='object measure')
    demo.add_argument('--q', help='frequency measure')
    _psf_arguments(demo)
    demo.add_argument('--mus', help='comma separated orders (default 1,2,3,4)')
    demo.add_argument('--grid', help='object sizes, lo:hi:count')
    _budget_arguments(demo)

    sweep_parser = commands.add_parser('sweep', parents=[common], help='any quantity over a size grid')
    sweep_parser.add_argument('evaluator', nargs='?', help=', '.join(sorted(scaling.EVALUATORS)))
    _object_arguments(sweep_parser)
    sweep_parser.add_argument('--grid', help='object sizes, lo:hi:count')
    sweep_parser.add_argument('--q', help='frequency measure')
    _psf_arguments(sweep_parser)
    _budget_arguments(sweep_parser)
    sweep_parser.add_argument('--j', help='fixed truncation order')
    sweep_parser.add_argument('--tol', help='relative tolerance of the adaptive truncation')
    sweep_parser.add_argument('--experimental', action='store_true', default=None)
    sweep_parser.add_argument('--expect', help='expected log-log slope')
    sweep_parser.add_argument('--expect-tol', help='tolerance on the slope (default 0.2)')
    return parser


def configure_logging(verbose=0, quiet=False):
    if quiet:
        level = logging.WARNING
    elif verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')


def resolve(command, args, environ=None):
    """
    Merge environment, configuration file and flags, bind them to the
    command's form and validate it.

    :raises ConfigError: with the form's field errors.
    """
    flags = dict((k, v) for k, v in vars(args).items() if k not in ('command', 'config', 'verbose', 'quiet'))
    sources = [config.environment_defaults(environ)]
    if getattr(args, 'config', None):
        try:
            sources.append(config.load_config(args.config, command))
        except (OSError, ValueError) as e:
            raise ConfigError('cannot read %s' % args.config, {'config': [str(e)]})
    sources.append(flags)
    formdata = config.merge_sources(*sources)
    meta = {'locales': [formdata['locale']]} if formdata.get('locale') else None
    form = config.COMMANDS[command](formdata, meta=meta)
    form.require_valid()
    return form


def format_value(value, locale=None):
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return str(value)
    value = float(value)
    if locale:
        return numbers.format_scientific(value, '0.00000E0', locale=locale)
    return '%.6g' % value


def print_summary(title, values, locale=None, stream=None):
    stream = stream or sys.stdout
    stream.write('%s\n' % title)
    for key, value in values:
        stream.write('  %-20s %s\n' % (key, format_value(value, locale)))


def _path(form, name):
    return os.path.join(form.out.data, name)


def _failed(name, detail):
    log.error('check failed: %s (%s)', name, detail)
    return ['%s: %s' % (name, detail)]


def _finish(form, manifest, title, summary, failures):
    expected = 'expect' in form and form.expect.data is not None
    manifest.checks.update(requested=bool(form.check.data) or expected, failures=list(failures))
    manifest.write(form.out.data)
    print_summary(title, summary, form.locale.data)
    if failures:
        raise CheckFailure('%d check(s) failed' % len(failures), failures)
    return 0


def _sweep(form, manifest, base, evaluator, grid):
    """Run ``evaluator`` over ``grid``, write the curve and the fit."""
    sweep_config = scaling.SweepConfig(base=base, evaluator=evaluator, grid=grid, label=evaluator.quantity,
                                       workers=form.workers.data, precision=form.precision.data)
    points = scaling.sweep(sweep_config)
    expected = form.expect.data
    theory = expected if expected is not None else scaling.theoretical_exponent(
        evaluator.quantity, scaling.evaluator_order(evaluator))
    fit = scaling.fit_loglog(points).compared(theory, form.expect_tol.data)
    if not form.json.data:
        manifest.add(output.write_sweep(_path(form, 'sweep.csv'), points, evaluator.quantity))
    manifest.add(output.write_json(_path(form, 'fit.json'), fit))
    failures = []
    if not fit.passed and (expected is not None or form.check.data):
        failures = _failed('%s slope' % evaluator.quantity, 'fitted %.4f, expected %s +- %s'
                           % (fit.slope, theory, form.expect_tol.data))
    return fit, failures


def _factors(P0, mu):
    """Standardized object measure and its Hankel factors up to order ``2 mu``."""
    base = standardize(P0).base
    order = min(2 * mu, getattr(base, 'atom_count', 2 * mu + 1) - 1)
    return base, hankel.factorize(base, order)


def _dump_hankel(form, manifest, P0, mu):
    base, (H, L, A) = _factors(P0, mu)
    for name, matrix in (('hankel_H.csv', H.entries), ('hankel_L.csv', L.entries), ('hankel_A.csv', A.coefficients)):
        manifest.add(output.write_matrix(_path(form, name), matrix))
    profile = hankel.lambda_min_profile(base, H.order)
    manifest.add(output.write_profile(_path(form, 'lambda_min.csv'), profile))


def _identity_checks(P0, mu):
    """Cholesky and orthonormal-polynomial identities of the standardized object measure."""
    base, (H, L, A) = _factors(P0, mu)
    residuals = {
        'reconstruction': hankel.reconstruction_residual(H, L),
        'orthonormality': hankel.orthonormality_residual(base, A),
        'moment_projection': hankel.moment_projection_residual(base, L, A),
    }
    failures = []
    for name, value in sorted(residuals.items()):
        if not value < IDENTITY_TOLERANCE:
            failures += _failed('%s identity' % name, 'residual %s' % mpmath.nstr(value, 5))
    return residuals, failures


def _functional(form, P0, Q):
    mu = form.mu.data
    if form.functional.data == 'spade':
        model = spade.build_spade(Q, mu // 2, radius=max(P0.half_width, 1))
        return MomentFunctional.from_spade(model, mu)
    return MomentFunctional.monomial(mu)


def cmd_bound(form):
    """Quantum lower bound for the configured object, order and photon budget."""
    manifest = output.RunManifest(command='bound', config=form.data, precision=form.precision.data)
    failures = []
    with precision(form.precision.data):
        P0 = form.p0.build(form.delta.data)
        Q = form.q.build()
        if not is_szego(P0):
            log.warning('%s is not of Szego class; the bound still holds but its scaling is not guaranteed',
                        P0.name)
        mu = form.mu.data
        sub = TiltedSubmodel(P0, mu)
        report = quantum_bound(sub, _functional(form, P0, Q), Q, form.n.data, j=form.j.data, tol=form.tol.data,
                               j_cap=form.j_cap.data)
        manifest.add(output.write_json(_path(form, 'bound.json'), report))
        if form.dump_hankel.data and not form.json.data:
            _dump_hankel(form, manifest, P0, mu)
        summary = [('bound_lower', report.bound_lower), ('bound_trivial', report.bound_trivial),
                   ('bound_best', report.bound_best), ('gram', report.score.gram),
                   ('truncation_order', report.score.truncation_order)]
        if form.check.data:
            if not report.bound_lower > 0:
                failures += _failed('bound positivity', 'bound_lower = %s' % report.bound_lower)
            residuals, identity_failures = _identity_checks(P0, mu)
            failures += identity_failures
            manifest.checks.update(residuals)
        if form.sweep.data:
            evaluator = scaling.Bound(mu=mu, Q=Q, N=form.n.data, j=form.j.data, tol=form.tol.data)
            fit, sweep_failures = _sweep(form, manifest, P0, evaluator, form.sweep.data)
            failures += sweep_failures
            summary.append(('slope', fit.slope))
    return _finish(form, manifest, 'bound mu=%d delta=%g' % (mu, form.delta.data), summary, failures)


def cmd_spade(form):
    """Replicated SPADE experiments with bias and variance diagnostics."""
    manifest = output.RunManifest(command='spade', config=form.data, precision=form.precision.data)
    failures = []
    with precision(form.precision.data):
        P0 = form.p0.build(form.delta.data)
        Q = form.q.build()
        selection = form.mode.data
        model = spade.build_spade(Q, max(selection.modes), radius=max(P0.half_width, 1))
        run = spade.replicate(model, P0, form.m.data, form.eps.data, form.seed.data, selection,
                              form.replicates.data, workers=form.workers.data, poisson=form.poisson.data)
        if not form.json.data:
            manifest.add(output.write_replicates(_path(form, 'replicates.csv'), run))
        manifest.add(output.write_json(_path(form, 'summary.json'), {
            'selection': str(selection),
            'seed': run.seed,
            'M': run.M,
            'epsilon': run.epsilon,
            'report': run.report,
            'r': list(model.r),
            's': list(model.s),
        }))
        report = run.report
        if form.check.data:
            for order, z in zip(report.orders, report.bias_z):
                if not abs(z) < BIAS_Z_LIMIT:
                    failures += _failed('bias of beta%d' % order, 'z = %.2f' % z)
            for order, ratio in zip(report.orders, report.variance_ratios):
                if not abs(ratio - 1) < VARIANCE_RATIO_TOLERANCE:
                    failures += _failed('variance of beta%d' % order, 'empirical/analytic = %.3f' % ratio)
    summary = []
    for k, order in enumerate(report.orders):
        summary += [('beta%d mean' % order, report.estimates[k]), ('beta%d truth' % order, report.truth[k]),
                    ('bias z', report.bias_z[k]), ('variance ratio', report.variance_ratios[k])]
    return _finish(form, manifest, 'spade %s over %d replicates' % (selection, report.replicates), summary,
                   failures)


def cmd_direct(form):
    """Fisher information and Cramer-Rao bound of direct imaging."""
    manifest = output.RunManifest(command='direct', config=form.data, precision=form.precision.data)
    failures = []
    with precision(form.precision.data):
        P0 = form.p0.build(form.delta.data)
        psf = config.build_psf(form.psf.data, form.psf_width.data, form.psf_power.data)
        mu = form.mu.data
        sub = TiltedSubmodel(P0, mu)
        report = direct.submodel_fisher(psf, sub, N=form.n.data, experimental=form.experimental.data,
                                        Delta0=form.delta0.data)
        manifest.add(output.write_json(_path(form, 'direct.json'), report))
        summary = [('fisher', report.fisher), ('crb', report.crb), ('crb * N', report.crb * report.N)]
        if report.marker:
            summary.append(('marker', report.marker))
        if form.check.data and not (report.crb > 0 and mpmath.isfinite(report.crb)):
            failures += _failed('crb', 'not a finite positive number: %s' % report.crb)
        if form.sweep.data:
            evaluator = scaling.Crb(mu=mu, psf=psf, N=form.n.data, experimental=form.experimental.data)
            fit, sweep_failures = _sweep(form, manifest, P0, evaluator, form.sweep.data)
            failures += sweep_failures
            summary.append(('slope', fit.slope))
    return _finish(form, manifest, 'direct %s mu=%d delta=%g' % (psf.family, mu, form.delta.data), summary,
                   failures)


def _data_processing(base, Q, psf, mus, grid):
    """
    Direct-imaging Fisher information against four times the purified score
    norm at every grid point and order.
    """
    try:
        direct.check_data_processing(psf, Q)
    except ValueError as e:
        log.warning('skipping the data-processing check: %s', e)
        return []
    standard = standardize(base)
    records = []
    for delta in grid:
        P0 = standard.at(mpmath.mpf(delta))
        for mu in mus:
            sub = TiltedSubmodel(P0, mu)
            fisher = direct.submodel_fisher(psf, sub).fisher
            four_gram = 4 * purified_score_norm(sub, Q).gram
            passed = bool(fisher <= four_gram * (1 + DATA_PROCESSING_SLACK))
            records.append({'mu': mu, 'delta': delta, 'fisher': fisher, 'four_gram': four_gram, 'passed': passed})
    return records


def cmd_demo(form):
    """Exponent table of the quantum bound, SPADE and direct imaging."""
    manifest = output.RunManifest(command='demo', config=form.data, precision=form.precision.data)
    failures = []
    grid = form.grid.data
    with precision(form.precision.data):
        base = form.p0.build(1)
        Q = form.q.build()
        psf = config.build_psf(form.psf.data, form.psf_width.data, form.psf_power.data)
        rows = scaling.demo_table(base, Q, psf, mus=form.mus.data, grid=grid, N=form.n.data,
                                  epsilon=form.eps.data, workers=form.workers.data)
        records = _data_processing(base, Q, psf, form.mus.data, grid)
        if not form.json.data:
            manifest.add(output.write_demo(_path(form, 'demo.csv'), rows))
        manifest.add(output.write_json(_path(form, 'demo.json'), {
            'grid': list(grid),
            'rows': rows,
            'data_processing': records,
        }))
        if form.check.data:
            for row in rows:
                if not row['passed']:
                    failures += _failed('exponents mu=%d' % row['mu'], 'quantum %.3f, spade %.3f, direct %.3f'
                                        % (row['quantum_slope'], row['spade_slope'], row['direct_crb_slope']))
            for record in records:
                if not record['passed']:
                    failures += _failed('data processing mu=%d delta=%g' % (record['mu'], record['delta']),
                                        'fisher %s > 4 gram %s' % (mpmath.nstr(record['fisher'], 8),
                                                                   mpmath.nstr(record['four_gram'], 8)))
    summary = []
    for row in rows:
        summary += [('mu=%d quantum' % row['mu'], row['quantum_slope']),
                    ('mu=%d spade' % row['mu'], row['spade_slope']),
                    ('mu=%d direct' % row['mu'], row['direct_crb_slope']),
                    ('mu=%d efficiency' % row['mu'], row['efficiency'])]
    return _finish(form, manifest, 'demo over %d sizes' % len(grid), summary, failures)


def cmd_sweep(form):
    """Any evaluator over the configured grid, with a log-log fit."""
    manifest = output.RunManifest(command='sweep', config=form.data, precision=form.precision.data)
    with precision(form.precision.data):
        evaluator = form.evaluator_instance()
        fit, failures = _sweep(form, manifest, form.p0.build(1), evaluator, form.grid.data)
    summary = [('slope', fit.slope), ('theory', fit.theory), ('r_squared', fit.r_squared)]
    return _finish(form, manifest, 'sweep %s' % evaluator.quantity, summary, failures)


COMMAND_HANDLERS = {
    'bound': cmd_bound,
    'spade': cmd_spade,
    'direct': cmd_direct,
    'demo': cmd_demo,
    'sweep': cmd_sweep,
}


def _record_error(command, form, error, exit_code):
    """Write a manifest for a run that stopped before finishing."""
    if form is None or not form.out.data:
        return
    manifest = output.RunManifest(command=command, config=form.data, precision=form.precision.data)
    manifest.checks.update(requested=bool(form.check.data), error=str(error), exit_code=exit_code)
    try:
        manifest.write(form.out.data)
    except OSError as e:
        log.error('could not write the manifest: %s', e)


def main(argv=None, environ=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    form = None
    try:
        form = resolve(args.command, args, environ)
        return COMMAND_HANDLERS[args.command](form)
    except ConfigError as e:
        for line in e.messages():
            sys.stderr.write('error: %s\n' % line)
        return e.exit_code
    except CheckFailure as e:
        for line in e.failures:
            sys.stderr.write('check failed: %s\n' % line)
        return e.exit_code
    except MomentLimitsError as e:
        sys.stderr.write('error: %s\n' % e)
        _record_error(args.command, form, e, e.exit_code)
        return e.exit_code
    except (ArithmeticError, ValueError) as e:
        sys.stderr.write('error: %s\n' % e)
        _record_error(args.command, form, e, MomentLimitsError.exit_code)
        return MomentLimitsError.exit_code


if __name__ == '__main__':
    sys.exit(main())
