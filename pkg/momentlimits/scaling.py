"""
Sweeps of a quantity over the object size ``delta`` with the base measure
held fixed, and log-log fits of the resulting power laws.
"""
import concurrent.futures
import logging
import math
import time

import attr
import mpmath
import numpy

from momentlimits import direct, spade
from momentlimits.errors import EvaluationError, MomentLimitsError
from momentlimits.measure import standardize
from momentlimits.submodel import MomentFunctional, TiltedSubmodel, purified_score_norm, quantum_bound
from momentlimits.utils import precision, to_float

__all__ = (
    'SweepConfig', 'SweepPoint', 'ScalingFit', 'geometric_grid', 'parse_grid', 'sweep',
    'fit_loglog', 'compare_exponent', 'theoretical_exponent', 'make_evaluator', 'EVALUATORS',
    'Constant', 'Moment', 'Bound', 'Gram', 'SpadeVariance', 'Fisher', 'Crb', 'demo_table',
)

log = logging.getLogger(__name__)

DEFAULT_GRID = (0.01, 0.1, 8)


def geometric_grid(lo=DEFAULT_GRID[0], hi=DEFAULT_GRID[1], count=DEFAULT_GRID[2]):
    if not 0 < lo < hi or count < 2:
        raise ValueError('grid needs 0 < lo < hi and at least two points')
    return tuple(float(d) for d in numpy.geomspace(lo, hi, count))


def parse_grid(text):
    """
    ``lo:hi:count`` for a geometric grid, or a comma separated list of values.
    """
    text = text.strip()
    if ':' in text:
        parts = text.split(':')
        if len(parts) != 3:
            raise ValueError('grid must look like lo:hi:count, got %r' % text)
        return geometric_grid(float(parts[0]), float(parts[1]), int(parts[2]))
    return tuple(float(v) for v in text.split(',') if v.strip())


def _check_grid(instance, attribute, value):
    if not value or any(not d > 0 for d in value):
        raise ValueError('every grid point must be positive')
    if any(b <= a for a, b in zip(value, value[1:])):
        raise ValueError('grid must be strictly increasing')


def _standardized(P):
    if P.bounded and abs(P.half_width - 1) < 1e-12:
        return P
    return standardize(P).base


@attr.s(frozen=True, slots=True)
class SweepConfig(object):
    """
    :param base: The standardized object measure ``R0``; a measure of any
        half-width is standardized first.
    :param grid: Strictly increasing object sizes.
    :param evaluator: A picklable callable of the object measure ``P0``.
    """
    base = attr.ib(converter=_standardized)
    evaluator = attr.ib()
    grid = attr.ib(default=geometric_grid(), converter=tuple, validator=_check_grid)
    label = attr.ib(default='')
    workers = attr.ib(default=1)
    precision = attr.ib(default=None)


@attr.s(frozen=True, slots=True)
class SweepPoint(object):
    delta = attr.ib()
    value = attr.ib()
    seconds = attr.ib(default=0.0, eq=False)


def _evaluate_point(evaluator, base, delta, bits):
    with precision(bits):
        started = time.perf_counter()
        try:
            value = evaluator(base.rescale(mpmath.mpf(delta)))
        except (MomentLimitsError, ArithmeticError, ValueError) as e:
            raise EvaluationError('evaluator failed at delta=%g: %s' % (delta, e), delta=delta)
        return SweepPoint(delta=delta, value=value, seconds=time.perf_counter() - started)


def sweep(config):
    """
    Evaluate ``config.evaluator`` at ``rescale(R0, delta)`` for every grid point.

    Points come back ordered by ``delta`` whatever the number of workers.

    :raises EvaluationError: naming the first failing ``delta``.
    """
    bits = config.precision or mpmath.mp.prec
    if config.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_evaluate_point, config.evaluator, config.base, d, bits) for d in config.grid]
            points = [f.result() for f in futures]
    else:
        points = [_evaluate_point(config.evaluator, config.base, d, bits) for d in config.grid]
    for point in points:
        log.info('%s delta=%g value=%s (%.2fs)', config.label or 'sweep', point.delta,
                 mpmath.nstr(point.value, 8), point.seconds)
    return sorted(points, key=lambda p: p.delta)


@attr.s(frozen=True, slots=True)
class ScalingFit(object):
    """
    Least-squares line through ``(log delta, log value)``.
    """
    points = attr.ib(converter=tuple, repr=False)
    slope = attr.ib()
    intercept = attr.ib()
    r_squared = attr.ib()
    theory = attr.ib(default=None)
    tolerance = attr.ib(default=None)
    passed = attr.ib(default=None)

    def compared(self, theory, tol):
        return attr.evolve(self, theory=theory, tolerance=tol, passed=compare_exponent(self, theory, tol))

    def as_dict(self):
        return {
            'slope': self.slope,
            'intercept': self.intercept,
            'r_squared': self.r_squared,
            'theory': self.theory,
            'tolerance': self.tolerance,
            'passed': self.passed,
            'points': [[to_float(d), to_float(v)] for d, v in self.points],
        }


def _pairs(points):
    return [(p.delta, p.value) if isinstance(p, SweepPoint) else tuple(p) for p in points]


def fit_loglog(points):
    """
    :param points: ``SweepPoint`` objects or ``(delta, value)`` pairs.
    :raises ValueError: for fewer than three points or a nonpositive value.
    """
    pairs = _pairs(points)
    if len(pairs) < 3:
        raise ValueError('a log-log fit needs at least three points, got %d' % len(pairs))
    for delta, value in pairs:
        if not (value > 0 and delta > 0) or not mpmath.isfinite(value):
            raise ValueError('log-log fit needs finite positive values, got %s at delta=%s' % (value, delta))
    x = numpy.array([float(mpmath.log(d)) for d, _ in pairs])
    y = numpy.array([float(mpmath.log(v)) for _, v in pairs])
    slope, intercept = numpy.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(numpy.sum((y - fitted) ** 2))
    ss_tot = float(numpy.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(points=pairs, slope=float(slope), intercept=float(intercept), r_squared=r_squared)


def compare_exponent(fit, theory, tol):
    return abs(fit.slope - theory) <= tol


def theoretical_exponent(quantity, order):
    """
    Predicted power of ``delta`` for each sweep quantity as the object shrinks.
    """
    half_down = 2 * (order // 2)
    half_up = 2 * ((order + 1) // 2)
    table = {
        'moment': order,
        'bound': half_down,
        'gram': half_up,
        'spade-variance': half_down,
        'fisher': 2 * order,
        'crb': 0,
        'constant': 0,
    }
    try:
        return table[quantity]
    except KeyError:
        raise ValueError('no exponent known for %r' % quantity)


@attr.s(frozen=True, slots=True)
class Constant(object):
    value = attr.ib(default=1)
    quantity = 'constant'

    def __call__(self, P):
        return mpmath.mpf(self.value)


@attr.s(frozen=True, slots=True)
class Moment(object):
    order = attr.ib()
    quantity = 'moment'

    def __call__(self, P):
        return P.moment(self.order)


@attr.s(frozen=True, slots=True)
class Bound(object):
    """``bound_lower`` of the quantum bound on ``x**mu``."""
    mu = attr.ib()
    Q = attr.ib()
    N = attr.ib(default=1)
    j = attr.ib(default=None)
    tol = attr.ib(default=1e-8)
    quantity = 'bound'

    def __call__(self, P):
        sub = TiltedSubmodel(P, self.mu)
        return quantum_bound(sub, MomentFunctional.monomial(self.mu), self.Q, self.N, j=self.j,
                             tol=self.tol).bound_lower


@attr.s(frozen=True, slots=True)
class Gram(object):
    mu = attr.ib()
    Q = attr.ib()
    j = attr.ib(default=None)
    tol = attr.ib(default=1e-8)
    quantity = 'gram'

    def __call__(self, P):
        return purified_score_norm(TiltedSubmodel(P, self.mu), self.Q, j=self.j, tol=self.tol).gram


@attr.s(frozen=True, slots=True)
class SpadeVariance(object):
    """Analytic variance of the SPADE estimator of order ``order``."""
    order = attr.ib()
    Q = attr.ib()
    N = attr.ib(default=1)
    epsilon = attr.ib(default=0.01)
    poisson = attr.ib(default=False)
    quantity = 'spade-variance'

    def __call__(self, P):
        n = self.order // 2
        model = spade.build_spade(self.Q, n, radius=max(P.half_width, 1))
        selection = spade.ModeSelection(kind='even' if self.order % 2 == 0 else 'odd', modes=(n,))
        probabilities = spade.mode_probabilities(model, P)
        return spade.analytic_variance(model, selection, probabilities, self.N, self.epsilon, self.poisson)[0]


@attr.s(frozen=True, slots=True)
class Fisher(object):
    mu = attr.ib()
    psf = attr.ib()
    experimental = attr.ib(default=False)
    quantity = 'fisher'

    def __call__(self, P):
        return direct.submodel_fisher(self.psf, TiltedSubmodel(P, self.mu), experimental=self.experimental).fisher


@attr.s(frozen=True, slots=True)
class Crb(object):
    mu = attr.ib()
    psf = attr.ib()
    N = attr.ib(default=1)
    experimental = attr.ib(default=False)
    quantity = 'crb'

    def __call__(self, P):
        return direct.submodel_fisher(self.psf, TiltedSubmodel(P, self.mu), N=self.N,
                                      experimental=self.experimental).crb


EVALUATORS = {
    'constant': Constant,
    'moment': Moment,
    'bound': Bound,
    'gram': Gram,
    'spade-variance': SpadeVariance,
    'fisher': Fisher,
    'crb': Crb,
}


def make_evaluator(name, **params):
    try:
        cls = EVALUATORS[name]
    except KeyError:
        raise ValueError('unknown evaluator %r, expected one of %s' % (name, ', '.join(sorted(EVALUATORS))))
    return cls(**params)


def evaluator_order(evaluator):
    return getattr(evaluator, 'mu', getattr(evaluator, 'order', 0))


def demo_table(base, Q, psf, mus=(1, 2, 3, 4), grid=None, N=1e5, epsilon=0.01, workers=1):
    """
    Fitted exponents of the quantum bound, the SPADE variance and the
    direct-imaging bound for each order, with the efficiency of SPADE
    against the quantum bound at the smallest grid point.
    """
    grid = grid or geometric_grid()
    rows = []
    for mu in mus:
        fits = {}
        for evaluator in (Bound(mu=mu, Q=Q, N=N), SpadeVariance(order=mu, Q=Q, N=N, epsilon=epsilon),
                          Crb(mu=mu, psf=psf, N=N)):
            config = SweepConfig(base=base, evaluator=evaluator, grid=grid, label='%s mu=%d' % (evaluator.quantity, mu),
                                 workers=workers)
            fits[evaluator.quantity] = fit_loglog(sweep(config)).compared(
                theoretical_exponent(evaluator.quantity, mu), 0.2)

        P0 = _standardized(base).rescale(mpmath.mpf(grid[0]))
        model = spade.build_spade(Q, mu // 2, radius=max(P0.half_width, 1))
        sub = TiltedSubmodel(P0, mu)
        quantum = quantum_bound(sub, MomentFunctional.from_spade(model, mu), Q, N).bound_lower
        variance = SpadeVariance(order=mu, Q=Q, N=N, epsilon=epsilon)(P0)
        rows.append({
            'mu': mu,
            'quantum_slope': fits['bound'].slope,
            'spade_slope': fits['spade-variance'].slope,
            'direct_crb_slope': fits['crb'].slope,
            'quantum_theory': fits['bound'].theory,
            'spade_theory': fits['spade-variance'].theory,
            'direct_theory': fits['crb'].theory,
            'efficiency': float(quantum / variance),
            'passed': all(f.passed for f in fits.values()),
        })
    return rows
