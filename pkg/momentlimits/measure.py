"""
Probability measures on the real line.

Object distributions ``P`` are atoms or densities on a compact interval,
spatial-frequency measures ``Q`` may also be the whole-line Gaussian. Every
measure carries a ``scale`` so that rescaling keeps the standardized base
measure intact, which is what sweeps over the object size rely on.
"""
import functools
import logging

import attr
import mpmath
import numpy

from momentlimits.errors import OrderError, SupportError

__all__ = (
    'QuadratureRule', 'MeasureSpec', 'Atoms', 'Density', 'GaussianFrequency',
    'StandardizedMeasure', 'moment', 'standardize', 'integrate', 'szego_integral',
    'is_szego', 'uniform', 'two_point', 'point_mass', 'truncated_quadratic',
    'truncated_gaussian', 'gaussian_frequency', 'hard_pupil', 'make_measure',
    'load_atoms', 'BUILTIN_MEASURES',
)

log = logging.getLogger(__name__)

MAX_MOMENT_ORDER = 128
DEFAULT_QUADRATURE_ORDER = 200
HERMITE_ORDER = 80
SZEGO_ORDER = 128
NORMALIZATION_TOLERANCE = 1e-12


def _mpf(value):
    return mpmath.mpf(value)


def _mpf_tuple(values):
    return tuple(mpmath.mpf(v) for v in values)


def _check_order(p, max_order):
    if p < 0:
        raise ValueError('moment order must be nonnegative, got %d' % p)
    if max_order is not None and p > max_order:
        raise OrderError('moment order %d exceeds the configured cap %d' % (p, max_order), cap=max_order)


def _checked(value, node):
    if not mpmath.isfinite(value):
        raise SupportError('integrand is not finite at node x=%s' % mpmath.nstr(node, 15), node=node)
    return value


@functools.lru_cache(maxsize=32)
def _gauss_rule(kind, order, prec):
    with mpmath.mp.workprec(prec):
        nodes, weights = mpmath.mp.gauss_quadrature(order, kind)
        pairs = sorted((nodes[i], weights[i]) for i in range(order))
    return tuple(n for n, _ in pairs), tuple(w for _, w in pairs)


@attr.s(frozen=True, slots=True)
class QuadratureRule(object):
    """
    A Gauss rule mapped affinely onto ``interval``.

    :param nodes: Quadrature nodes, increasing.
    :param weights: Positive weights, one per node.
    :param order: Number of nodes.
    :param interval: The interval the rule integrates over.
    """
    nodes = attr.ib(converter=tuple)
    weights = attr.ib(converter=tuple)
    order = attr.ib()
    interval = attr.ib(converter=_mpf_tuple)

    @classmethod
    def gauss_legendre(cls, order, interval=(-1, 1)):
        c1, c2 = _mpf_tuple(interval)
        if not c2 > c1:
            raise SupportError('quadrature interval must have positive width, got [%s, %s]' % (c1, c2))
        nodes, weights = _gauss_rule('legendre', order, mpmath.mp.prec)
        half = (c2 - c1) / 2
        middle = (c2 + c1) / 2
        return cls(
            nodes=[middle + half * t for t in nodes],
            weights=[half * w for w in weights],
            order=order,
            interval=(c1, c2),
        )

    @classmethod
    def gauss_chebyshev(cls, order):
        """
        First-kind Chebyshev rule on [-1, 1]; the weight 1/sqrt(1-t^2) is
        built into the weights.
        """
        nodes, weights = _gauss_rule('chebyshev1', order, mpmath.mp.prec)
        return cls(nodes=nodes, weights=weights, order=order, interval=(-1, 1))

    def integrate(self, f):
        return mpmath.fsum(w * _checked(f(x), x) for x, w in zip(self.nodes, self.weights))

    def self_test(self):
        """
        Largest relative error over the monomials x^k, k < 2*order, against
        their analytic integrals.
        """
        c1, c2 = self.interval
        worst = mpmath.mpf(0)
        for k in range(2 * self.order):
            exact = (c2 ** (k + 1) - c1 ** (k + 1)) / (k + 1)
            got = mpmath.fsum(w * x ** k for x, w in zip(self.nodes, self.weights))
            scale = max(abs(exact), mpmath.mpf(1) * max(abs(c1), abs(c2)) ** (k + 1))
            worst = max(worst, abs(got - exact) / scale)
        return worst


class MeasureSpec(object):
    """
    Common interface of every measure.

    Subclasses provide ``moment``, ``integrate``, ``rescale``, ``half_width``
    and ``contains``.
    """
    __slots__ = ()
    kind = None
    bounded = True

    def standardize(self):
        hw = self.half_width
        if not mpmath.isfinite(hw):
            raise SupportError('%s has unbounded support and cannot be standardized' % self.name)
        if not hw > 0:
            raise SupportError('%s has zero-width support and cannot be standardized' % self.name)
        return StandardizedMeasure(base=self.rescale(1 / hw), delta=hw)

    def with_quadrature(self, order):
        return self

    def describe(self):
        return {'name': self.name, 'kind': self.kind, 'half_width': float(self.half_width)}


@attr.s(frozen=True, slots=True)
class Atoms(MeasureSpec):
    """
    A finite weighted set of points. Positions are multiplied by ``scale``.
    """
    positions = attr.ib(converter=_mpf_tuple)
    weights = attr.ib(converter=_mpf_tuple)
    scale = attr.ib(default=1, converter=_mpf)
    name = attr.ib(default='atoms')
    kind = 'atoms'

    def __attrs_post_init__(self):
        if not self.positions or len(self.positions) != len(self.weights):
            raise ValueError('atoms need one weight per position')
        if any(w < 0 for w in self.weights):
            raise ValueError('atom weights must be nonnegative')
        if abs(mpmath.fsum(self.weights) - 1) > NORMALIZATION_TOLERANCE:
            raise ValueError('atom weights must sum to 1, got %s' % mpmath.nstr(mpmath.fsum(self.weights), 15))
        if not self.scale > 0:
            raise ValueError('scale must be positive')

    @property
    def half_width(self):
        return self.scale * max(abs(x) for x in self.positions)

    @property
    def atom_count(self):
        return len(set(x for x, w in zip(self.positions, self.weights) if w > 0))

    def moment(self, p, max_order=MAX_MOMENT_ORDER):
        _check_order(p, max_order)
        return self.scale ** p * mpmath.fsum(w * x ** p for x, w in zip(self.positions, self.weights))

    def quadrature(self):
        return [self.scale * x for x in self.positions], list(self.weights)

    def integrate(self, f):
        return mpmath.fsum(w * _checked(f(self.scale * x), self.scale * x)
                           for x, w in zip(self.positions, self.weights))

    def rescale(self, factor):
        return attr.evolve(self, scale=self.scale * factor)

    def contains(self, x, tol=1e-12):
        return any(abs(self.scale * p - x) <= tol * max(1, abs(x)) for p in self.positions)

    def reweight(self, g, name=None):
        weights = [w * g(self.scale * x) for x, w in zip(self.positions, self.weights)]
        total = mpmath.fsum(weights)
        return attr.evolve(self, weights=[w / total for w in weights], name=name or self.name)


@functools.lru_cache(maxsize=128)
def _density_table(function, interval, order, normalize, name, prec):
    # keyed on the base measure only: rescaled copies share one table
    with mpmath.mp.workprec(prec):
        rule = QuadratureRule.gauss_legendre(order, interval)
        values = []
        for y in rule.nodes:
            v = mpmath.mpf(function(y))
            if not mpmath.isfinite(v) or v < 0:
                raise SupportError('density of %s is negative or not finite at y=%s'
                                   % (name, mpmath.nstr(y, 15)), node=y)
            values.append(v)
        total = mpmath.fdot(rule.weights, values)
        if not total > 0:
            raise SupportError('density of %s integrates to zero' % name)
        if not normalize and abs(total - 1) > NORMALIZATION_TOLERANCE:
            raise ValueError('density of %s integrates to %s, not 1' % (name, mpmath.nstr(total, 15)))
        weights = tuple(w * v / total for w, v in zip(rule.weights, values))
    return rule.nodes, weights, total


@attr.s(frozen=True, slots=True)
class Density(MeasureSpec):
    """
    A density on a compact interval.

    :param function:
        The unnormalized density of the base measure, a callable of one mpf.
        It is normalized numerically unless ``normalize`` is False.
    :param interval:
        Support of the base measure; the measure itself lives on
        ``scale * interval``.
    :param quadrature_order:
        Number of Gauss-Legendre nodes.
    :param szego:
        Tag for densities known to be (or not to be) in the Szego class;
        None when unknown.
    """
    function = attr.ib()
    interval = attr.ib(default=(-1, 1), converter=_mpf_tuple)
    scale = attr.ib(default=1, converter=_mpf)
    quadrature_order = attr.ib(default=DEFAULT_QUADRATURE_ORDER)
    name = attr.ib(default='density')
    normalize = attr.ib(default=True)
    szego = attr.ib(default=None)
    kind = 'density'

    def __attrs_post_init__(self):
        c1, c2 = self.interval
        if not c2 > c1:
            raise SupportError('density support [%s, %s] has no width' % (c1, c2))
        if not self.scale > 0:
            raise ValueError('scale must be positive')

    @property
    def table(self):
        return _density_table(self.function, self.interval, self.quadrature_order, self.normalize,
                              self.name, mpmath.mp.prec)

    @property
    def half_width(self):
        return self.scale * max(abs(c) for c in self.interval)

    @property
    def support(self):
        return tuple(self.scale * c for c in self.interval)

    def density(self, x):
        _, _, total = self.table
        return self.function(x / self.scale) / (total * self.scale)

    def moment(self, p, max_order=MAX_MOMENT_ORDER):
        _check_order(p, max_order)
        nodes, weights, _ = self.table
        return self.scale ** p * mpmath.fdot(weights, [y ** p for y in nodes])

    def quadrature(self):
        nodes, weights, _ = self.table
        return [self.scale * y for y in nodes], list(weights)

    def integrate(self, f):
        nodes, weights, _ = self.table
        return mpmath.fsum(w * _checked(f(self.scale * y), self.scale * y) for y, w in zip(nodes, weights))

    def rescale(self, factor):
        return attr.evolve(self, scale=self.scale * factor)

    def with_quadrature(self, order):
        return attr.evolve(self, quadrature_order=order)

    def contains(self, x, tol=1e-12):
        c1, c2 = self.support
        slack = tol * max(1, abs(x))
        return c1 - slack <= x <= c2 + slack

    def reweight(self, g, name=None):
        return attr.evolve(self, function=_Reweighted(self.function, g, self.scale), name=name or self.name)


@attr.s(frozen=True, slots=True)
class _Reweighted(object):
    function = attr.ib()
    factor = attr.ib()
    scale = attr.ib()

    def __call__(self, y):
        return self.function(y) * self.factor(self.scale * y)


@attr.s(frozen=True, slots=True)
class GaussianFrequency(MeasureSpec):
    """
    Centered normal measure on the whole line, only used as ``Q``.

    The default ``sigma = 1/2`` is the frequency measure of a Gaussian
    point-spread function with unit width.
    """
    sigma = attr.ib(default=mpmath.mpf(1) / 2, converter=_mpf)
    name = attr.ib(default='gaussian')
    kind = 'gaussian'
    bounded = False

    @property
    def half_width(self):
        return mpmath.inf

    def moment(self, p, max_order=MAX_MOMENT_ORDER):
        _check_order(p, max_order)
        if p % 2:
            return mpmath.mpf(0)
        value = mpmath.mpf(1)
        for k in range(1, p, 2):
            value *= k
        return value * self.sigma ** p

    def density(self, x):
        return mpmath.npdf(x, 0, self.sigma)

    def quadrature(self):
        nodes, weights = _gauss_rule('hermite', HERMITE_ORDER, mpmath.mp.prec)
        root = mpmath.sqrt(2) * self.sigma
        norm = mpmath.sqrt(mpmath.pi)
        return [root * t for t in nodes], [w / norm for w in weights]

    def integrate(self, f):
        nodes, weights = self.quadrature()
        return mpmath.fsum(w * _checked(f(x), x) for x, w in zip(nodes, weights))

    def rescale(self, factor):
        return attr.evolve(self, sigma=self.sigma * factor)

    def contains(self, x, tol=0):
        return mpmath.isfinite(x)


@attr.s(frozen=True, slots=True)
class StandardizedMeasure(object):
    """
    A base measure of unit half-width together with the scale ``delta`` that
    maps it back to the object distribution.
    """
    base = attr.ib()
    delta = attr.ib(converter=_mpf)

    @property
    def measure(self):
        return self.base.rescale(self.delta)

    def at(self, delta):
        return self.base.rescale(delta)

    def moment(self, p, max_order=MAX_MOMENT_ORDER):
        return self.delta ** p * self.base.moment(p, max_order)


def moment(P, p, max_order=MAX_MOMENT_ORDER):
    """Return the ``p``-th moment of ``P`` in working precision."""
    return P.moment(p, max_order)


def standardize(P):
    """
    Split ``P`` into a base measure of half-width one and its scale.

    :raises SupportError: for unbounded or zero-width support.
    """
    return P.standardize()


def integrate(P, f):
    return P.integrate(f)


def szego_integral(P, order=SZEGO_ORDER):
    """
    Evaluate the log-integrability integral of a density over its support
    with a first-kind Gauss-Chebyshev rule.

    Returns ``-inf`` for measures without a density on a compact interval or
    when the density vanishes at a node.
    """
    if not isinstance(P, Density):
        return mpmath.ninf
    c1, c2 = P.support
    half = (c2 - c1) / 2
    middle = (c2 + c1) / 2
    rule = QuadratureRule.gauss_chebyshev(order)
    total = mpmath.mpf(0)
    for t, w in zip(rule.nodes, rule.weights):
        value = P.density(middle + half * t)
        if not value > 0:
            return mpmath.ninf
        total += w * mpmath.log(value)
    return total


def is_szego(P):
    if getattr(P, 'szego', None) is not None:
        return bool(P.szego)
    return bool(mpmath.isfinite(szego_integral(P)))


def _uniform_density(y):
    return mpmath.mpf(1) / 2


def _quadratic_density(y, curvature):
    return 1 + curvature * y * y


def _gaussian_density(y, sigma):
    return mpmath.exp(-y * y / (2 * sigma * sigma))


def uniform(half_width=1, quadrature_order=DEFAULT_QUADRATURE_ORDER):
    return Density(_uniform_density, scale=half_width, quadrature_order=quadrature_order,
                   name='uniform', szego=True)


def hard_pupil(half_width=1):
    """Uniform frequency measure of a hard circular pupil of radius ``half_width``."""
    return Density(_uniform_density, scale=half_width, name='hard-pupil', szego=True)


def two_point(half_width=1):
    return Atoms(positions=(-1, 1), weights=(mpmath.mpf(1) / 2, mpmath.mpf(1) / 2),
                 scale=half_width, name='two-point')


def point_mass(position=0):
    return Atoms(positions=(position,), weights=(1,), name='point-mass')


def truncated_quadratic(half_width=1):
    """
    Density proportional to 1 + x^2 on [-half_width, half_width]; the base
    measure is proportional to 1 + half_width^2 y^2 on [-1, 1].
    """
    hw = mpmath.mpf(half_width)
    return Density(functools.partial(_quadratic_density, curvature=hw * hw), scale=hw,
                   name='truncated-quadratic', szego=True)


def truncated_gaussian(half_width=1, sigma=1):
    """
    Normal density of standard deviation ``sigma * half_width`` cut to
    [-half_width, half_width].
    """
    return Density(functools.partial(_gaussian_density, sigma=mpmath.mpf(sigma)), scale=half_width,
                   name='truncated-gaussian', szego=True)


def gaussian_frequency(sigma=mpmath.mpf(1) / 2):
    return GaussianFrequency(sigma=sigma)


def load_atoms(path, scale=1):
    """
    Read atoms from a two-column CSV file (position, weight). Lines starting
    with ``#`` are comments. Weights are renormalized.
    """
    table = numpy.loadtxt(path, delimiter=',', comments='#', ndmin=2)
    if table.shape[1] != 2:
        raise ValueError('%s: expected two columns (position, weight), got %d' % (path, table.shape[1]))
    weights = [mpmath.mpf(float(w)) for w in table[:, 1]]
    total = mpmath.fsum(weights)
    if not total > 0:
        raise ValueError('%s: atom weights sum to zero' % path)
    return Atoms(positions=[float(x) for x in table[:, 0]], weights=[w / total for w in weights],
                 scale=scale, name=str(path))


BUILTIN_MEASURES = {
    'uniform': uniform,
    'two-point': two_point,
    'point-mass': point_mass,
    'truncated-quadratic': truncated_quadratic,
    'truncated-gaussian': truncated_gaussian,
    'gaussian': gaussian_frequency,
    'hard-pupil': hard_pupil,
}


def make_measure(name, **params):
    """
    Build a built-in measure by name, passing ``params`` to its constructor.
    """
    try:
        factory = BUILTIN_MEASURES[name]
    except KeyError:
        raise ValueError('unknown measure %r, expected one of %s' % (name, ', '.join(sorted(BUILTIN_MEASURES))))
    return factory(**params)
