"""
The tilted one-parameter submodel ``P_theta = g_theta * P0`` with
``g_theta ~ 1 + tanh(theta * a_mu)`` and the quantum lower bound it yields.

Everything is evaluated at the truth ``theta = 0``. The score ``a_mu`` is the
``mu``-th orthonormal polynomial of ``P0``; the derivative of the Cholesky
factor along the tilt is computed on the standardized measure and rescaled.
"""
import logging
import math

import attr
import mpmath

from momentlimits import hankel
from momentlimits.errors import ConvergenceError, MomentLimitsError, SupportError
from momentlimits.measure import Atoms, standardize
from momentlimits.utils import to_float

__all__ = (
    'MomentFunctional', 'TiltedSubmodel', 'PurifiedScoreReport', 'QuantumBoundReport',
    'g_theta', 'dot_beta', 'dot_hankel', 'purified_score_norm', 'quantum_bound',
    'tilted_factor', 'finite_difference_derivative',
)

log = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-8
DEFAULT_ORDER_CAP = 25
SCORE_TOLERANCE = 1e-10
REALNESS_TOLERANCE = 1e-20

# Re and Im of i**k for k mod 4
_PHASE_RE = (1, 0, -1, 0)
_PHASE_IM = (0, 1, 0, -1)


@attr.s(frozen=True, slots=True)
class _Polynomial(object):
    coefficients = attr.ib(converter=tuple)

    def __call__(self, x):
        value = mpmath.mpf(0)
        for c in reversed(self.coefficients):
            value = value * x + c
        return value


@attr.s(frozen=True, slots=True)
class MomentFunctional(object):
    """
    A linear functional ``beta(P) = integral of b dP``.

    :param mu: Order of the generalized moment, ``b(x) = x**mu + o(x**mu)``.
    :param function: The callable ``b``.
    :param coefficients:
        Power-series coefficients when ``b`` is a polynomial; a pure monomial
        has a single nonzero entry at ``mu``.
    """
    mu = attr.ib()
    function = attr.ib()
    label = attr.ib(default='')
    coefficients = attr.ib(default=None)

    @classmethod
    def monomial(cls, mu, perturbation=()):
        """
        ``b(x) = x**mu + sum_k perturbation[k] * x**(mu + 1 + k)``.
        """
        coefficients = [0] * mu + [1] + [mpmath.mpf(c) for c in perturbation]
        label = 'x^%d' % mu if not perturbation else 'x^%d+o(x^%d)' % (mu, mu)
        return cls(mu=mu, function=_Polynomial(coefficients), label=label, coefficients=tuple(coefficients))

    @classmethod
    def constant(cls):
        return cls(mu=0, function=_Polynomial((1,)), label='1', coefficients=(1,))

    @classmethod
    def from_spade(cls, model, order):
        """
        The functional a SPADE mode measures: ``|C_n|^2 / r_n`` for even
        ``order = 2n`` and ``2 Re(C_n conj(C_n+1)) / s_n`` for odd ``order = 2n+1``.
        """
        return cls(mu=order, function=model.functional(order), label='spade-%d' % order)

    @property
    def is_monomial(self):
        if self.coefficients is None:
            return False
        return all((c == 0) == (k != self.mu) for k, c in enumerate(self.coefficients))

    def __call__(self, x):
        return self.function(x)

    def beta(self, P):
        return P.integrate(self.function)


@attr.s(frozen=True, slots=True)
class _Tilt(object):
    score = attr.ib()
    theta = attr.ib()

    def __call__(self, x):
        return 1 + mpmath.tanh(self.theta * self.score(x))


@attr.s(frozen=True, slots=True)
class _Score(object):
    basis = attr.ib()
    mu = attr.ib()
    delta = attr.ib()

    def __call__(self, x):
        return self.basis.evaluate(self.mu, x / self.delta)


@attr.s(frozen=True, slots=True, eq=False)
class TiltedSubmodel(object):
    """
    :param P0: The true object distribution.
    :param mu: Order of the score ``S = a_mu``, at least one.
    :param c: Half-width of the admissible ``theta`` interval.
    """
    P0 = attr.ib()
    mu = attr.ib()
    c = attr.ib(default=1)
    standard = attr.ib(init=False)
    factor = attr.ib(init=False, repr=False)
    basis = attr.ib(init=False, repr=False)
    score = attr.ib(init=False, repr=False)

    def __attrs_post_init__(self):
        if self.mu < 1:
            raise ValueError('score order mu must be at least 1, got %d' % self.mu)
        if not self.c > 0:
            raise ValueError('theta half-width c must be positive')
        if isinstance(self.P0, Atoms):
            log.warning('%s is a finite-atom measure; bounds on it are outside the infinite-support hypothesis',
                        self.P0.name)
        standard = standardize(self.P0)
        _, V, B = hankel.factorize(standard.base, self.mu)
        object.__setattr__(self, 'standard', standard)
        object.__setattr__(self, 'factor', V)
        object.__setattr__(self, 'basis', B)
        object.__setattr__(self, 'score', _Score(B, self.mu, standard.delta))
        self._check_score()

    def _check_score(self):
        mean = self.P0.integrate(self.score)
        norm = self.P0.integrate(lambda x: self.score(x) ** 2)
        if abs(mean) > SCORE_TOLERANCE or abs(norm - 1) > SCORE_TOLERANCE:
            raise ConvergenceError('score a_%d of %s is not orthonormal (mean %s, norm %s)'
                                   % (self.mu, self.P0.name, mpmath.nstr(mean, 5), mpmath.nstr(norm, 5)))
        nodes, _ = self.P0.quadrature()
        for theta in (-self.c, self.c):
            if any(not _Tilt(self.score, theta)(x) > 0 for x in nodes):
                raise ConvergenceError('tilt at theta=%s is not positive on the support' % theta)

    @property
    def delta(self):
        return self.standard.delta

    def normalizer(self, theta):
        return self.P0.integrate(_Tilt(self.score, theta))

    def tilted_measure(self, theta):
        if abs(theta) > self.c:
            raise ValueError('|theta| must be at most %s, got %s' % (self.c, theta))
        return self.P0.reweight(_Tilt(self.score, theta), name='%s-tilted' % self.P0.name)

    def score_column(self, k_max):
        """
        ``V[k, mu] = <y**k, b_mu>`` on the standardized measure for k <= k_max;
        exactly zero for k < mu.
        """
        R0 = self.standard.base
        moments = [R0.moment(k, max_order=None) for k in range(k_max + self.mu + 1)]
        row = [self.basis[self.mu, s] for s in range(self.mu + 1)]
        column = []
        for k in range(k_max + 1):
            if k < self.mu:
                column.append(mpmath.mpf(0))
            else:
                column.append(mpmath.fdot(row, moments[k:k + self.mu + 1]))
        return column


def g_theta(sub, x, theta):
    """
    Normalized tilt ``(1 + tanh(theta a_mu(x))) / Z(theta)``.
    """
    if abs(theta) > sub.c:
        raise ValueError('|theta| must be at most %s, got %s' % (sub.c, theta))
    if not sub.P0.contains(x):
        raise SupportError('x=%s lies outside the support of %s' % (x, sub.P0.name), node=x)
    return _Tilt(sub.score, theta)(x) / sub.normalizer(theta)


def dot_beta(sub, b):
    """
    ``<b, a_mu>`` under ``P0``; for ``b = x**mu`` this is ``L[mu, mu] = delta**mu V[mu, mu]``.
    """
    if b.is_monomial and b.mu == sub.mu:
        return sub.delta ** sub.mu * sub.factor[sub.mu, sub.mu]
    return sub.P0.integrate(lambda x: b(x) * sub.score(x))


def dot_hankel(sub, J):
    """
    Derivative of the standardized Hankel matrix along the tilt,
    ``dG[q, r] = V[q + r, mu]``.
    """
    column = sub.score_column(2 * J)
    dG = mpmath.matrix(J + 1, J + 1)
    for q in range(J + 1):
        for r in range(J + 1):
            dG[q, r] = column[q + r]
    return dG


@attr.s(frozen=True, slots=True)
class PurifiedScoreReport(object):
    """
    Truncated ``<dPhi|dPhi>`` (``gram``) and ``<Phi0|dPhi>`` (``overlap``).

    ``truncation_order`` counts the purification modes ``|n>`` kept, the
    power series in ``k`` runs to ``series_order``. ``tail_estimate`` is the
    relative change of ``gram`` over the last mode added, ``last_increment``
    the absolute one; ``contributions`` holds the per-mode terms of ``gram``.
    """
    gram = attr.ib()
    overlap = attr.ib()
    truncation_order = attr.ib()
    tail_estimate = attr.ib()
    last_increment = attr.ib()
    purification_norm = attr.ib()
    imag_residual = attr.ib()
    mu = attr.ib()
    delta = attr.ib()
    history = attr.ib(converter=tuple, default=())
    s1 = attr.ib(default=None)
    s2 = attr.ib(default=None)
    cauchy_tail_bound = attr.ib(default=None)
    series_order = attr.ib(default=None)
    contributions = attr.ib(converter=tuple, default=(), repr=False)
    ldot = attr.ib(default=None, repr=False, eq=False)

    @property
    def score_norm_sq_upper(self):
        return 4 * self.gram

    @property
    def score_norm_sq_fs(self):
        return 4 * (self.gram - abs(self.overlap) ** 2)

    def as_dict(self):
        return {
            'gram': to_float(self.gram),
            'overlap': [float(mpmath.re(self.overlap)), float(mpmath.im(self.overlap))],
            'truncation_order': self.truncation_order,
            'tail_estimate': to_float(self.tail_estimate),
            'last_increment': to_float(self.last_increment),
            'purification_norm': to_float(self.purification_norm),
            'imag_residual': to_float(self.imag_residual),
            'score_norm_sq_upper': to_float(self.score_norm_sq_upper),
            'score_norm_sq_fs': to_float(self.score_norm_sq_fs),
            'mu': self.mu,
            'delta': to_float(self.delta),
            'history': [[j, to_float(g)] for j, g in self.history],
            's1': to_float(self.s1),
            's2': to_float(self.s2),
            'cauchy_tail_bound': to_float(self.cauchy_tail_bound),
            'series_order': self.series_order,
            'contributions': [to_float(mpmath.re(c)) for c in self.contributions],
        }


def _mode_terms(left, right, moments, order):
    """
    For each mode ``n <= order`` the complex
    ``sum_{n<=p,q<=order} i**(q-p) m[p+q] left[q, n] right[p, n] / (p! q!)``.

    With ``left == right`` each entry is ``integral |sum_p (-ik)**p/p! left[p, n]|**2 dQ``.
    """
    factorials = [mpmath.factorial(p) for p in range(order + 1)]
    terms = []
    for n in range(order + 1):
        u = [left[q, n] / factorials[q] for q in range(order + 1)]
        v = [right[p, n] / factorials[p] for p in range(order + 1)]
        re_terms = []
        im_terms = []
        for p in range(n, order + 1):
            if not v[p]:
                continue
            for q in range(n, order + 1):
                term = moments[p + q] * u[q] * v[p]
                k = (q - p) % 4
                if _PHASE_RE[k]:
                    re_terms.append(_PHASE_RE[k] * term)
                elif _PHASE_IM[k]:
                    im_terms.append(_PHASE_IM[k] * term)
        terms.append(mpmath.mpc(mpmath.fsum(re_terms), mpmath.fsum(im_terms)))
    return terms


def _evaluate(sub, Q, order, moments):
    R0 = sub.standard.base
    _, V, B = hankel.factorize(R0, order)
    dV = hankel.cholesky_derivative(V, B, dot_hankel(sub, order))
    ldot = hankel.CholeskyFactor(entries=dV, source=R0.name, standardized=True).rescale(sub.delta).entries
    L = V.rescale(sub.delta).entries
    gram = _mode_terms(ldot, ldot, moments, order)
    overlap = _mode_terms(L, ldot, moments, order)
    norm = _mode_terms(L, L, moments, order)
    return gram, overlap, norm, dV, ldot


def _weierstrass(sub, Q, j, dV):
    if not Q.bounded:
        return None, None, None
    x = (Q.half_width * sub.delta) ** 2
    s1 = mpmath.fsum(x ** p / mpmath.factorial(p) for p in range(j + 1))
    s2 = mpmath.fsum(mpmath.fsum((dV[p, n] for n in range(p + 1)), squared=True) / mpmath.factorial(p)
                     for p in range(j + 1))
    return s1, s2, (mpmath.exp(x) - s1) * s2


def _series_order(sub, j_max, series_order):
    if isinstance(sub.P0, Atoms):
        # L2 of a finite-atom measure holds only atom_count polynomial modes
        series_order = min(series_order, sub.P0.atom_count - 1)
    return max(j_max, series_order)


def purified_score_norm(sub, Q, j=None, tol=DEFAULT_TOLERANCE, j_cap=DEFAULT_ORDER_CAP, debug=False,
                        series_order=None):
    """
    Evaluate the truncated purified-score norm.

    The derivative ``|dPhi>`` is expanded in the purification modes ``|n>``
    and ``gram`` keeps the modes ``n <= j``. Every mode adds
    ``integral |sum_p (-ik)**p/p! Ldot[p, n]|**2 dQ >= 0``, so ``gram`` never
    decreases as ``j`` grows, and at ``j == series_order`` it is the full
    series truncated at power ``series_order``.

    :param Q: Spatial-frequency measure; its moments up to ``2 * series_order`` are used.
    :param j:
        Fixed number of modes. When None it grows from ``mu`` until the
        relative change of ``gram`` drops below ``tol``.
    :param j_cap: Largest order tried in adaptive mode.
    :param debug:
        Assert the imaginary part of ``gram`` vanishes (it must for any Q,
        the check catches indexing slips).
    :param series_order:
        Highest power of ``k`` kept, ``j_cap`` when None and never below ``j``.
    :raises ConvergenceError: when the cap is reached first, with the partial report.
    """
    if j is not None:
        if j < 0:
            raise ValueError('truncation order must be nonnegative, got %d' % j)
        orders = [j]
    else:
        if j_cap < sub.mu:
            raise ValueError('truncation cap %d is below the score order %d' % (j_cap, sub.mu))
        orders = range(sub.mu, j_cap + 1)
    j_max = orders[-1]
    order = _series_order(sub, j_max, j_cap if series_order is None else series_order)
    moments = [Q.moment(k, max_order=None) for k in range(2 * order + 1)]
    gram_terms, overlap_terms, norm_terms, dV, ldot = _evaluate(sub, Q, order, moments)
    s1, s2, cauchy = _weierstrass(sub, Q, order, dV)

    history = []
    previous = None
    report = None
    for modes in orders:
        kept = gram_terms[:modes + 1]
        gram = mpmath.fsum(mpmath.re(c) for c in kept)
        gram_imag = mpmath.fsum(mpmath.im(c) for c in kept)
        if debug and abs(gram_imag) > REALNESS_TOLERANCE * max(1, abs(gram)):
            raise ConvergenceError('purified score norm has an imaginary part %s' % mpmath.nstr(gram_imag, 5))
        history.append((modes, gram))
        increment = abs(gram - previous) if previous is not None else abs(gram)
        relative = increment / gram if gram > 0 else mpmath.inf
        report = PurifiedScoreReport(
            gram=gram, overlap=mpmath.fsum(overlap_terms[:modes + 1]), truncation_order=modes,
            tail_estimate=relative if previous is not None else mpmath.inf,
            last_increment=increment,
            purification_norm=mpmath.fsum(mpmath.re(c) for c in norm_terms[:modes + 1]),
            imag_residual=abs(gram_imag), mu=sub.mu, delta=sub.delta, history=history,
            s1=s1, s2=s2, cauchy_tail_bound=cauchy, series_order=order, contributions=kept, ldot=ldot,
        )
        log.debug('mu=%d j=%d gram=%s relative change=%s', sub.mu, modes, mpmath.nstr(gram, 12),
                  mpmath.nstr(relative, 3))
        if j is not None:
            return report
        if previous is not None and gram > 0 and relative < tol:
            return report
        previous = gram

    raise ConvergenceError('purified score norm for mu=%d did not converge to %g by j=%d'
                           % (sub.mu, tol, j_cap), partial=report)


@attr.s(frozen=True, slots=True)
class QuantumBoundReport(object):
    dot_beta = attr.ib()
    score = attr.ib()
    N = attr.ib()
    bound_lower = attr.ib()
    bound_fs = attr.ib()
    bound_trivial = attr.ib()
    provenance = attr.ib(factory=dict)

    @property
    def bound_best(self):
        return max(self.bound_lower, self.bound_trivial)

    def as_dict(self):
        return {
            'dot_beta': to_float(self.dot_beta),
            'N': float(self.N),
            'bound_lower': to_float(self.bound_lower),
            'bound_fs': to_float(self.bound_fs),
            'bound_trivial': to_float(self.bound_trivial),
            'bound_best': to_float(self.bound_best),
            'score': self.score.as_dict(),
            'provenance': dict(self.provenance),
        }


def quantum_bound(sub, b, Q, N, j=None, tol=DEFAULT_TOLERANCE, j_cap=DEFAULT_ORDER_CAP):
    """
    Lower bound on the error of any unbiased estimator of ``b`` from ``N``
    expected photons.

    ``bound_lower`` uses ``4 <dPhi|dPhi>``, ``bound_fs`` the Fubini-Study
    form and ``bound_trivial`` the natural purification (``||S|| = 1``).
    """
    if not N > 0:
        raise ValueError('expected photon number N must be positive, got %s' % N)
    N = mpmath.mpf(N)
    beta = dot_beta(sub, b)
    score = purified_score_norm(sub, Q, j=j, tol=tol, j_cap=j_cap)
    if not score.score_norm_sq_upper > 0:
        raise MomentLimitsError('degenerate submodel: purified score norm vanishes for mu=%d' % sub.mu)
    fs = score.score_norm_sq_fs
    return QuantumBoundReport(
        dot_beta=beta,
        score=score,
        N=N,
        bound_lower=beta ** 2 / (N * score.score_norm_sq_upper),
        bound_fs=beta ** 2 / (N * fs) if fs > 0 else None,
        bound_trivial=beta ** 2 / N,
        provenance={
            'measure': sub.P0.name,
            'frequency_measure': Q.name,
            'functional': b.label,
            'mu': sub.mu,
            'delta': to_float(sub.delta),
            'truncation_order': score.truncation_order,
            'precision_bits': mpmath.mp.prec,
        },
    )


def tilted_factor(sub, theta, J):
    """
    Cholesky factor ``V(theta)`` of the standardized tilted measure.
    """
    R0 = sub.standard.base
    tilted = R0.reweight(_Tilt(_Score(sub.basis, sub.mu, 1), theta), name='%s-tilted' % R0.name)
    return hankel.cholesky(hankel.build_hankel(tilted, J, check=False))


def finite_difference_derivative(sub, J, step=mpmath.mpf('1e-6')):
    """
    Central difference of ``L(theta) = delta**p V(theta)`` at ``theta = 0``.
    """
    step = mpmath.mpf(step)
    plus = tilted_factor(sub, step, J).entries
    minus = tilted_factor(sub, -step, J).entries
    dV = (plus - minus) / (2 * step)
    return hankel.CholeskyFactor(entries=dV, standardized=True).rescale(sub.delta).entries


def structural_zero_order(mu):
    """Rows ``p`` below this order of the score derivative vanish."""
    return int(math.ceil(mu / 2.0))
