"""
Direct imaging: photon density ``eta = h * P``, the Fisher information of
the tilted submodel and the Cramer-Rao bound it implies.

The Fisher integral runs over a truncated image-plane domain. The
truncation point is certified by the envelope pair ``(lower, upper)`` of the
point-spread function: ``lower(xi) <= h(xi - x)`` and
``upper(xi) >= |h^(mu+1)(xi - x)|`` for every ``|x| <= Delta0``.
"""
import functools
import logging

import attr
import mpmath
from numpy.polynomial import Polynomial, hermite_e
from scipy import integrate

from momentlimits.errors import DominationError, MomentLimitsError
from momentlimits.measure import GaussianFrequency, hard_pupil
from momentlimits.submodel import MomentFunctional, dot_beta
from momentlimits.utils import to_float

__all__ = (
    'PsfModel', 'GaussianPsf', 'SuperGaussianPsf', 'LorentzianPsf', 'HardAperturePsf',
    'DominationReport', 'FisherReport', 'intensity', 'intensity_derivative', 'intensity_mass',
    'check_domination', 'submodel_fisher', 'crb', 'matched_frequency', 'check_data_processing',
    'make_psf', 'PSF_FAMILIES',
)

log = logging.getLogger(__name__)

REDUCED_QUADRATURE_ORDER = 48
FISHER_RELATIVE_TOLERANCE = 1e-10
TAIL_TOLERANCE = 1e-10
TAIL_START = 10
TAIL_GROWTH = 1.5
TAIL_CAP = 1e6
EXPERIMENTAL_FLOOR = mpmath.mpf('1e-30')
EXPERIMENTAL_SPAN = 400
TAIL_DOUBLINGS = 8
DERIVATIVE_PRECISION = 64
UNVALIDATED = 'unvalidated: PSF with zeros, outside the proven regime'


def _quad(f, a, b, **kwargs):
    kwargs.setdefault('limit', 200)
    return integrate.quad(lambda t: float(f(mpmath.mpf(t))), float(a), float(b), **kwargs)


class PsfModel(object):
    """
    A normalized, symmetric, nonnegative point-spread function.

    Subclasses define ``h``, ``width`` and ``family``; ``derivative``
    defaults to mpmath's finite differences. Families covered by the
    domination check also define ``upper``.
    """
    __slots__ = ()
    family = None
    experimental = False

    def h(self, xi):
        raise NotImplementedError()

    def __call__(self, xi):
        return self.h(xi)

    def derivative(self, n, xi):
        if n == 0:
            return self.h(xi)
        with mpmath.mp.workprec(DERIVATIVE_PRECISION):
            value = mpmath.diff(self.h, mpmath.mpf(xi), n)
        return +value

    def lower(self, xi, Delta0):
        """``h`` is decreasing in ``|xi|``, so the shifted value bounds it from below."""
        return self.h(abs(xi) + Delta0)

    def upper(self, xi, Delta0, n):
        """A bound on ``|h^(n)(xi - x)|`` for every ``|x| <= Delta0``."""
        raise NotImplementedError('%s has no closed-form derivative envelope' % type(self).__name__)

    def frequency_measure(self):
        return None

    def describe(self):
        out = {'family': self.family}
        out.update((k, to_float(v)) for k, v in attr.asdict(self).items())
        return out


def _integer_coefficients(poly):
    return tuple(int(round(c)) for c in poly.trim().coef)


@functools.lru_cache(maxsize=None)
def _hermite_e_coefficients(n):
    """Coefficients of the probabilists' Hermite polynomial, lowest power first."""
    return _integer_coefficients(Polynomial(hermite_e.herme2poly([0] * n + [1])))


@functools.lru_cache(maxsize=None)
def _super_gaussian_coefficients(p, n):
    """``R_n`` with ``d^n/du^n exp(-u**2p) = R_n(u) exp(-u**2p)``."""
    R = Polynomial([1])
    slope = Polynomial([0] * (2 * p - 1) + [2 * p])
    for _ in range(n):
        R = R.deriv() - slope * R
    return _integer_coefficients(R)


@functools.lru_cache(maxsize=None)
def _lorentzian_coefficients(p, n):
    """``S_n`` with ``d^n/du^n 1/D = S_n(u) / D**(n+1)`` for ``D = u**2p + 1``."""
    S = Polynomial([1])
    D = Polynomial([1] + [0] * (2 * p - 1) + [1])
    for k in range(n):
        S = S.deriv() * D - (k + 1) * D.deriv() * S
    return _integer_coefficients(S)


def _polyval(coefficients, u):
    return mpmath.polyval(list(reversed(coefficients)), u)


def _majorant(coefficients, reach):
    """``sum |c_k| reach**k``, at least ``|poly(u)|`` for ``|u| <= reach``."""
    return mpmath.polyval([abs(c) for c in reversed(coefficients)], reach)


def _reach(xi, Delta0, scale):
    """Largest and smallest ``|xi - x| / scale`` over ``|x| <= Delta0``."""
    return (abs(xi) + Delta0) / scale, max(abs(xi) - Delta0, 0) / scale


@attr.s(frozen=True, slots=True)
class GaussianPsf(PsfModel):
    """
    ``h(xi) = exp(-xi**2 / (2 sigma**2)) / (sqrt(2 pi) sigma)``, with closed-form
    derivatives ``h^(n) = (-1)**n He_n(xi / sigma) h / sigma**n``.
    """
    sigma = attr.ib(default=1, converter=mpmath.mpf)
    family = 'gaussian'

    @property
    def width(self):
        return self.sigma

    def h(self, xi):
        return mpmath.npdf(xi, 0, self.sigma)

    def derivative(self, n, xi):
        he = _polyval(_hermite_e_coefficients(n), xi / self.sigma)
        return (-1) ** n * he * self.h(xi) / self.sigma ** n

    def upper(self, xi, Delta0, n):
        far, near = _reach(xi, Delta0, self.sigma)
        return _majorant(_hermite_e_coefficients(n), far) * self.h(near * self.sigma) / self.sigma ** n

    def frequency_measure(self):
        return GaussianFrequency(sigma=1 / (2 * self.sigma))


def _super_gaussian_norm(d2, p):
    return 1 / (2 * d2 * mpmath.gamma(1 + mpmath.mpf(1) / (2 * p)))


@attr.s(frozen=True, slots=True)
class SuperGaussianPsf(PsfModel):
    """
    ``h(xi) = d1 exp(-(xi / d2)**(2p))``, ``d1`` fixed by normalization.

    ``h^(n) = d1 R_n(u) exp(-u**2p) / d2**n`` with ``u = xi / d2``.
    """
    d2 = attr.ib(default=1, converter=mpmath.mpf)
    p = attr.ib(default=2)
    family = 'super-gaussian'

    def __attrs_post_init__(self):
        if self.p < 1 or not self.d2 > 0:
            raise ValueError('super-gaussian PSF needs p >= 1 and d2 > 0')

    @property
    def width(self):
        return self.d2

    @property
    def d1(self):
        return _super_gaussian_norm(self.d2, self.p)

    def h(self, xi):
        return self.d1 * mpmath.exp(-(xi / self.d2) ** (2 * self.p))

    def derivative(self, n, xi):
        u = xi / self.d2
        R = _polyval(_super_gaussian_coefficients(self.p, n), u)
        return self.d1 * R * mpmath.exp(-u ** (2 * self.p)) / self.d2 ** n

    def upper(self, xi, Delta0, n):
        far, near = _reach(xi, Delta0, self.d2)
        bound = _majorant(_super_gaussian_coefficients(self.p, n), far)
        return self.d1 * bound * mpmath.exp(-near ** (2 * self.p)) / self.d2 ** n


@attr.s(frozen=True, slots=True)
class LorentzianPsf(PsfModel):
    """
    ``h(xi) = d1 / ((xi / d2)**(2p) + 1)``, ``d1`` fixed by normalization.

    ``h^(n) = d1 S_n(u) / (u**2p + 1)**(n+1) / d2**n`` with ``u = xi / d2``.
    """
    d2 = attr.ib(default=1, converter=mpmath.mpf)
    p = attr.ib(default=2)
    family = 'lorentzian'

    def __attrs_post_init__(self):
        if self.p < 1 or not self.d2 > 0:
            raise ValueError('lorentzian PSF needs p >= 1 and d2 > 0')

    @property
    def width(self):
        return self.d2

    @property
    def d1(self):
        return self.p * mpmath.sin(mpmath.pi / (2 * self.p)) / (mpmath.pi * self.d2)

    def h(self, xi):
        return self.d1 / ((xi / self.d2) ** (2 * self.p) + 1)

    def derivative(self, n, xi):
        u = xi / self.d2
        S = _polyval(_lorentzian_coefficients(self.p, n), u)
        return self.d1 * S / (u ** (2 * self.p) + 1) ** (n + 1) / self.d2 ** n

    def upper(self, xi, Delta0, n):
        far, near = _reach(xi, Delta0, self.d2)
        bound = _majorant(_lorentzian_coefficients(self.p, n), far)
        return self.d1 * bound / (near ** (2 * self.p) + 1) ** (n + 1) / self.d2 ** n


@attr.s(frozen=True, slots=True)
class HardAperturePsf(PsfModel):
    """
    ``h(xi) = sinc(xi / w)**2 / w`` of a hard pupil, with the normalized
    sinc. It vanishes at ``xi = k w`` so no positive lower envelope exists.
    """
    w = attr.ib(default=mpmath.pi, converter=mpmath.mpf)
    family = 'sinc2'
    experimental = True

    @property
    def width(self):
        return self.w

    def h(self, xi):
        return mpmath.sincpi(xi / self.w) ** 2 / self.w

    def lower(self, xi, Delta0):
        return mpmath.mpf(0)

    def frequency_measure(self):
        return hard_pupil(mpmath.pi / self.w)


PSF_FAMILIES = {
    'gaussian': GaussianPsf,
    'super-gaussian': SuperGaussianPsf,
    'lorentzian': LorentzianPsf,
    'sinc2': HardAperturePsf,
}


def make_psf(family, **params):
    try:
        cls = PSF_FAMILIES[family]
    except KeyError:
        raise ValueError('unknown PSF family %r, expected one of %s' % (family, ', '.join(sorted(PSF_FAMILIES))))
    return cls(**params)


def _reduced(P):
    if hasattr(P, 'quadrature_order'):
        P = P.with_quadrature(min(P.quadrature_order, REDUCED_QUADRATURE_ORDER))
    return P.quadrature()


def intensity(psf, P, xi):
    """``eta(xi) = integral of h(xi - x) P(dx)``."""
    nodes, weights = _reduced(P)
    return mpmath.fdot(weights, [psf.h(xi - x) for x in nodes])


def _pieces(width, T):
    inner = min(TAIL_START * width, T)
    return [(-T, -inner), (-inner, inner), (inner, T)] if T > inner else [(-T, T)]


def intensity_mass(psf, P, T=None):
    """``integral of eta`` over ``[-T, T]`` (the whole line when ``T`` is None)."""
    if T is None:
        left = _quad(lambda xi: intensity(psf, P, xi), -mpmath.inf, 0)[0]
        right = _quad(lambda xi: intensity(psf, P, xi), 0, mpmath.inf)[0]
        return left + right
    return sum(_quad(lambda xi: intensity(psf, P, xi), a, b)[0] for a, b in _pieces(float(psf.width), T))


@attr.s(frozen=True, slots=True)
class _ScoreDensity(object):
    """``eta_dot(xi) / delta**mu`` and ``eta0(xi)`` on a fixed node table."""
    psf = attr.ib()
    nodes = attr.ib(converter=tuple)
    weights = attr.ib(converter=tuple)
    scores = attr.ib(converter=tuple)
    scale = attr.ib()

    def pair(self, xi):
        values = [self.psf.h(xi - x) for x in self.nodes]
        eta0 = mpmath.fdot(self.weights, values)
        eta_dot = mpmath.fdot(self.weights, [v * a for v, a in zip(values, self.scores)])
        return eta_dot / self.scale, eta0


def _score_density(psf, sub):
    nodes, weights = _reduced(sub.P0)
    scores = [sub.score(x) for x in nodes]
    return _ScoreDensity(psf=psf, nodes=nodes, weights=weights, scores=scores, scale=sub.delta ** sub.mu)


def intensity_derivative(psf, sub, xi):
    """``eta_dot(xi) = integral of h(xi - x) a_mu(x) P0(dx)``."""
    eta_dot, _ = _score_density(psf, sub).pair(xi)
    return eta_dot * sub.delta ** sub.mu


@attr.s(frozen=True, slots=True)
class DominationReport(object):
    family = attr.ib()
    Delta0 = attr.ib()
    mu = attr.ib()
    passed = attr.ib()
    reason = attr.ib(default='')
    worst_lower = attr.ib(default=None)
    worst_upper = attr.ib(default=None)
    lower_integral = attr.ib(default=None)
    upper_integral = attr.ib(default=None)
    grid_points = attr.ib(default=0)

    def as_dict(self):
        return {
            'family': self.family,
            'Delta0': to_float(self.Delta0),
            'mu': self.mu,
            'passed': self.passed,
            'reason': self.reason,
            'worst_lower': to_float(self.worst_lower),
            'worst_upper': to_float(self.worst_upper),
            'lower_integral': to_float(self.lower_integral),
            'upper_integral': to_float(self.upper_integral),
            'grid_points': self.grid_points,
        }


def _envelope_integrands(psf, Delta0, mu):
    def first(xi):
        return psf.derivative(mu, xi) ** 2 / psf.lower(xi, Delta0)

    def second(xi):
        return psf.upper(xi, Delta0, mu + 1) ** 2 / psf.lower(xi, Delta0)

    return first, second


def _envelope_integrals(psf, Delta0, mu, T=0):
    """
    ``integral over |xi| > T`` of ``(h^(mu))**2 / lower`` and ``upper**2 / lower``.
    """
    return tuple(2 * _quad(f, T, mpmath.inf)[0] for f in _envelope_integrands(psf, Delta0, mu))


def _tail_decays(f, width):
    """``xi f(xi)`` at least halves along a doubling sequence of ``xi``."""
    points = [TAIL_START * width * 2 ** k for k in range(TAIL_DOUBLINGS)]
    weights = [abs(t * f(t)) for t in points]
    return mpmath.isfinite(weights[0]) and weights[-1] <= weights[0] / 2


@functools.lru_cache(maxsize=64)
def _check_domination(psf, Delta0, mu, prec):
    with mpmath.mp.workprec(prec):
        Delta0 = mpmath.mpf(Delta0)
        span = 8 * psf.width
        xis = mpmath.linspace(-span, span, 41)
        xs = mpmath.linspace(-Delta0, Delta0, 9)
        grid_points = len(xis) * len(xs)
        if any(not psf.lower(xi, Delta0) > 0 for xi in xis):
            return DominationReport(family=psf.family, Delta0=Delta0, mu=mu, passed=False,
                                    reason='h has zeros; no positive lower envelope exists',
                                    grid_points=grid_points)
        try:
            psf.upper(xis[0], Delta0, mu + 1)
        except NotImplementedError as e:
            return DominationReport(family=psf.family, Delta0=Delta0, mu=mu, passed=False, reason=str(e),
                                    grid_points=grid_points)
        worst_lower = mpmath.inf
        worst_upper = mpmath.mpf(0)
        for xi in xis:
            low = psf.lower(xi, Delta0)
            up = psf.upper(xi, Delta0, mu + 1)
            for x in xs:
                worst_lower = min(worst_lower, psf.h(xi - x) / low)
                slope = abs(psf.derivative(mu + 1, xi - x))
                if up > 0:
                    worst_upper = max(worst_upper, slope / up)
                elif slope > 0:
                    worst_upper = mpmath.inf
        pointwise = worst_lower >= 1 - 1e-12 and worst_upper <= 1 + 1e-9
        integrands = _envelope_integrands(psf, Delta0, mu)
        lower_integral, upper_integral = _envelope_integrals(psf, Delta0, mu)
        finite = (all(mpmath.isfinite(v) for v in (lower_integral, upper_integral))
                  and all(_tail_decays(f, psf.width) for f in integrands))
        passed = bool(pointwise and finite)
        reason = '' if passed else ('pointwise envelope violated' if not pointwise else 'envelope integral diverges')
        if not passed:
            log.debug('%s domination at Delta0=%s mu=%d failed: worst lower %s, worst upper %s', psf.family,
                      mpmath.nstr(Delta0, 5), mu, mpmath.nstr(worst_lower, 8), mpmath.nstr(worst_upper, 8))
        return DominationReport(family=psf.family, Delta0=Delta0, mu=mu, passed=passed, reason=reason,
                                worst_lower=worst_lower, worst_upper=worst_upper,
                                lower_integral=mpmath.mpf(lower_integral), upper_integral=mpmath.mpf(upper_integral),
                                grid_points=grid_points)


def check_domination(psf, Delta0, mu):
    """
    Verify the envelope conditions of the direct-imaging bound: a positive
    lower envelope, the closed-form upper envelope of ``h^(mu+1)`` checked on
    a grid of positions and shifts, and ``integral (h^(mu))**2 / lower`` and
    ``integral upper**2 / lower`` finite with tails that fall off.
    """
    if not Delta0 > 0:
        raise ValueError('Delta0 must be positive, got %s' % Delta0)
    return _check_domination(psf, to_float(Delta0), mu, mpmath.mp.prec)


@attr.s(frozen=True, slots=True)
class FisherReport(object):
    """
    Submodel Fisher information ``integral eta_dot**2 / eta0`` of direct
    imaging and the bound ``dot_beta**2 / (N fisher)``.
    """
    fisher = attr.ib()
    dot_beta = attr.ib()
    N = attr.ib()
    crb = attr.ib()
    delta = attr.ib()
    mu = attr.ib()
    truncation = attr.ib()
    tail_bound = attr.ib(default=None)
    quad_error = attr.ib(default=None)
    experimental = attr.ib(default=False)
    marker = attr.ib(default='')
    domination = attr.ib(default=None)

    def as_dict(self):
        return {
            'fisher': to_float(self.fisher),
            'dot_beta': to_float(self.dot_beta),
            'N': float(self.N),
            'crb': to_float(self.crb),
            'delta': to_float(self.delta),
            'mu': self.mu,
            'truncation': to_float(self.truncation),
            'tail_bound': to_float(self.tail_bound),
            'quad_error': to_float(self.quad_error),
            'experimental': self.experimental,
            'marker': self.marker,
            'domination': self.domination.as_dict() if self.domination is not None else None,
        }


def _fisher_integral(density, width, T, floor=None):
    def integrand(xi):
        eta_dot, eta0 = density.pair(xi)
        if floor is not None:
            eta0 = max(eta0, floor)
        return eta_dot ** 2 / eta0

    total = 0.0
    error = 0.0
    for a, b in _pieces(width, T):
        value, err = _quad(integrand, a, b, epsabs=0, epsrel=FISHER_RELATIVE_TOLERANCE)
        total += value
        error += err
    return total, error


def _certified_truncation(psf, sub, report, fisher_estimate):
    # tail of eta_dot**2 / eta0 over |xi| > T, in units of delta**(2 mu)
    mu = sub.mu
    V = sub.factor[mu, mu]
    weight = 2 / mpmath.factorial(mu) ** 2
    T = TAIL_START * float(psf.width)
    while True:
        first, second = _envelope_integrals(psf, report.Delta0, mu, T)
        tail = weight * (V ** 2 * first + sub.delta ** 2 / (mu + 1) ** 2 * second)
        if tail < TAIL_TOLERANCE * fisher_estimate:
            return T, tail
        T *= TAIL_GROWTH
        if T > TAIL_CAP * float(psf.width):
            raise DominationError('no truncation point certifies the Fisher tail below %g' % TAIL_TOLERANCE,
                                  report=report)


def submodel_fisher(psf, sub, b=None, N=1, experimental=False, Delta0=None):
    """
    Fisher information of direct imaging along the tilted submodel ``sub``.

    :param b: Functional being estimated, ``x**mu`` by default.
    :param experimental:
        Allow PSFs failing the envelope conditions. ``eta0`` is floored, no
        tail certificate exists and the report carries an unvalidated marker.
    :param Delta0: Envelope offset, at least the object half-width.
    :raises DominationError: when the envelope check fails without ``experimental``.
    """
    if b is None:
        b = MomentFunctional.monomial(sub.mu)
    Delta0 = sub.delta if Delta0 is None else mpmath.mpf(Delta0)
    if Delta0 < sub.delta:
        raise ValueError('Delta0 = %s is smaller than the object half-width %s' % (Delta0, sub.delta))
    report = check_domination(psf, Delta0, sub.mu)
    density = _score_density(psf, sub)
    width = float(psf.width)
    scale = sub.delta ** (2 * sub.mu)

    if report.passed:
        estimate, _ = _fisher_integral(density, width, TAIL_START * width)
        T, tail = _certified_truncation(psf, sub, report, estimate)
        value, error = _fisher_integral(density, width, T)
        marker = ''
        floor = None
    elif experimental:
        log.warning('%s PSF fails the envelope conditions (%s); computing an unvalidated Fisher information',
                    psf.family, report.reason)
        T = EXPERIMENTAL_SPAN * width
        value, error = _fisher_integral(density, width, T, floor=EXPERIMENTAL_FLOOR)
        tail = None
        marker = UNVALIDATED
        floor = EXPERIMENTAL_FLOOR
    else:
        raise DominationError('%s PSF fails the envelope conditions required for the direct-imaging bound '
                              '(positive lower envelope, integrable envelope tails): %s'
                              % (psf.family, report.reason), report=report)

    fisher = mpmath.mpf(value) * scale
    beta = dot_beta(sub, b)
    return FisherReport(
        fisher=fisher,
        dot_beta=beta,
        N=mpmath.mpf(N),
        crb=crb(fisher, beta, N),
        delta=sub.delta,
        mu=sub.mu,
        truncation=T,
        tail_bound=tail * scale if tail is not None else None,
        quad_error=mpmath.mpf(error) * scale,
        experimental=floor is not None,
        marker=marker,
        domination=report,
    )


def crb(fisher, dot_beta, N):
    """``dot_beta**2 / (N fisher)``."""
    if not fisher > 0:
        raise MomentLimitsError('Fisher information is zero; the Cramer-Rao bound is undefined')
    if not N > 0:
        raise ValueError('expected photon number N must be positive, got %s' % N)
    return dot_beta ** 2 / (mpmath.mpf(N) * fisher)


def matched_frequency(psf):
    """The frequency measure ``Q`` whose PSF is ``psf``, if one is known."""
    return psf.frequency_measure()


def check_data_processing(psf, Q, matched=False):
    """
    Refuse Fisher-versus-quantum comparisons for a ``(Q, psf)`` pair that is
    neither a known matched pair nor declared matched by the caller.
    """
    if matched:
        return True
    known = matched_frequency(psf)
    if known is None or known != Q:
        raise ValueError('%s PSF and frequency measure %s are not a matched pair; pass matched=True to '
                         'declare them consistent' % (psf.family, Q.name))
    return True
