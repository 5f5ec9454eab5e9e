"""
Spatial-mode demultiplexing built from the orthonormal polynomials of the
spatial-frequency measure ``Q``.

Mode ``n`` has amplitude ``C_n(x) = sum_p i**(n-p) tildeL[p, n] x**p / p!``
for a point source at ``x``. PAD measurements count photons in single modes,
iPAD measurements in the superpositions ``(C_n +- C_n+1) / sqrt(2)``.

Monte Carlo draws use numpy's Philox counter-based generator. Replicate ``k``
of a run seeded with ``seed`` draws from ``SeedSequence(seed,
spawn_key=(k,))``, so any replicate can be reproduced on its own and worker
processes need no shared state.
"""
import concurrent.futures
import logging
import math

import attr
import mpmath
import numpy

from momentlimits import hankel
from momentlimits.errors import ConvergenceError, OrderError, PrecisionError, SupportError
from momentlimits.measure import GaussianFrequency
from momentlimits.utils import to_float

__all__ = (
    'SpadeModel', 'ModeSelection', 'ModeProbabilities', 'CountRecord', 'EstimateReport',
    'ReplicateRun', 'build_spade', 'mode_probabilities', 'generalized_moments',
    'simulate_counts', 'estimate', 'replicate', 'analytic_variance', 'make_generator',
)

log = logging.getLogger(__name__)

SERIES_TOLERANCE = mpmath.mpf('1e-12')
PROBABILITY_SLACK = 1e-10
DEFAULT_RADIUS = 1


def make_generator(seed, replicate=0):
    """
    Philox generator of replicate ``replicate`` in the run seeded with ``seed``.
    """
    sequence = numpy.random.SeedSequence(int(seed), spawn_key=(int(replicate),))
    return numpy.random.Generator(numpy.random.Philox(sequence))


@attr.s(frozen=True, slots=True, eq=False)
class SpadeModel(object):
    """
    PAD coefficient tables for one frequency measure.

    :param radius: Largest ``|x|`` the truncated series is accurate for.
    :param series: Per mode, the coefficients ``i**(n-p) tildeL[p, n] / p!``.
    """
    Q = attr.ib()
    n_max = attr.ib()
    tildeL = attr.ib(repr=False)
    r = attr.ib(converter=tuple, repr=False)
    s = attr.ib(converter=tuple, repr=False)
    series = attr.ib(converter=tuple, repr=False)
    radius = attr.ib()
    closed_form_gaussian = attr.ib(default=False)

    @property
    def series_order(self):
        return max(len(c) for c in self.series) - 1

    def amplitude(self, n, x):
        """``C_n(x)``; modes up to ``n_max + 1`` are tabulated."""
        if self.closed_form_gaussian:
            sigma = self.Q.sigma
            return mpmath.exp(-(sigma * x) ** 2 / 2) * (sigma * x) ** n / mpmath.sqrt(mpmath.factorial(n))
        value = mpmath.mpc(0)
        for c in reversed(self.series[n]):
            value = value * x + c
        return value

    def functional(self, order):
        """
        The function ``b`` with ``generalized_moments(P)[order] = integral of b dP``.
        """
        n = order // 2
        if n > self.n_max:
            raise OrderError('mode order %d needs n <= %d' % (order, self.n_max), cap=2 * self.n_max + 1)
        return _ModeFunctional(self, order)


@attr.s(frozen=True, slots=True)
class _ModeFunctional(object):
    model = attr.ib()
    order = attr.ib()

    def __call__(self, x):
        n = self.order // 2
        c = self.model.amplitude(n, x)
        if self.order % 2 == 0:
            return abs(c) ** 2 / self.model.r[n]
        d = self.model.amplitude(n + 1, x)
        return 2 * mpmath.re(c * mpmath.conj(d)) / self.model.s[n]


def _series_order(Q, radius, diagonal, n_count):
    # |tildeL[p, n]| <= K**p, so the tail after p is bounded by its first term
    K = Q.half_width
    kr = K * radius
    order = n_count
    while True:
        head = (kr ** (order + 1)) / mpmath.factorial(order + 1)
        worst = min(diagonal[n] * radius ** n / mpmath.factorial(n) for n in range(n_count))
        if head < SERIES_TOLERANCE * worst:
            return order
        order += 1
        if order > hankel.MAX_ORDER:
            raise OrderError('C_n series for %s needs more than %d terms at radius %s'
                             % (Q.name, hankel.MAX_ORDER, mpmath.nstr(radius, 5)), cap=hankel.MAX_ORDER)


def build_spade(Q, n_max, radius=DEFAULT_RADIUS):
    """
    Build PAD/iPAD tables for modes ``0 .. n_max`` (and ``n_max + 1`` for the
    last iPAD pair).

    :param Q:
        A Gaussian frequency measure or a density on a compact interval.
    :param radius:
        Object support radius the generic series must cover.
    :raises SupportError: for atoms or unbounded non-Gaussian ``Q``.
    """
    if n_max < 0:
        raise ValueError('n_max must be nonnegative, got %d' % n_max)
    gaussian = isinstance(Q, GaussianFrequency)
    if not gaussian and (not Q.bounded or not hasattr(Q, 'density')):
        raise SupportError('SPADE needs a frequency measure with a density on a compact interval or a Gaussian; '
                           '%s is not one' % Q.name)
    radius = mpmath.mpf(radius)
    modes = n_max + 2
    _, L, _ = hankel.factorize(Q, modes - 1)
    diagonal = L.diagonal()

    series = []
    if gaussian:
        series_order = modes - 1
    else:
        series_order = _series_order(Q, radius, diagonal, modes)
        if series_order > L.order:
            _, L, _ = hankel.factorize(Q, series_order)
    for n in range(modes):
        row = []
        for p in range(series_order + 1):
            if p < n:
                row.append(mpmath.mpc(0))
                continue
            phase = (1, 1j, -1, -1j)[(n - p) % 4]
            row.append(mpmath.mpc(phase) * L[p, n] / mpmath.factorial(p))
        series.append(tuple(row))

    r = []
    s = []
    for n in range(n_max + 1):
        r.append(diagonal[n] ** 2 / mpmath.factorial(n) ** 2)
        s.append(2 * diagonal[n] * diagonal[n + 1] / (mpmath.factorial(n) * mpmath.factorial(n + 1)))
    log.debug('built SPADE tables for %s: n_max=%d series order %d', Q.name, n_max, series_order)
    return SpadeModel(Q=Q, n_max=n_max, tildeL=L, r=r, s=s, series=series, radius=radius,
                      closed_form_gaussian=gaussian)


@attr.s(frozen=True, slots=True)
class ModeProbabilities(object):
    """
    ``pad[n] = q_n``; ``plus[n]``, ``minus[n]`` are the iPAD pair ``(n, n+1)``.
    """
    pad = attr.ib(converter=tuple)
    plus = attr.ib(converter=tuple)
    minus = attr.ib(converter=tuple)

    def as_dict(self):
        return {
            'pad': [to_float(q) for q in self.pad],
            'plus': [to_float(q) for q in self.plus],
            'minus': [to_float(q) for q in self.minus],
        }


def _check_probability(value, label):
    if not -PROBABILITY_SLACK <= value <= 1 + PROBABILITY_SLACK:
        raise ConvergenceError('probability %s = %s lies outside [0, 1]; the C_n series is truncated too short'
                               % (label, mpmath.nstr(value, 12)))
    return value


def mode_probabilities(model, P):
    """
    Photon probabilities of every PAD mode and iPAD branch for object ``P``.
    """
    if P.half_width > model.radius * (1 + 1e-12) and not model.closed_form_gaussian:
        raise SupportError('support of %s exceeds the series radius %s' % (P.name, mpmath.nstr(model.radius, 5)))
    nodes, weights = P.quadrature()
    table = [[model.amplitude(n, x) for x in nodes] for n in range(model.n_max + 2)]
    pad = []
    plus = []
    minus = []
    for n in range(model.n_max + 1):
        q = mpmath.fdot(weights, [abs(c) ** 2 for c in table[n]])
        pad.append(_check_probability(q, 'q_%d' % n))
        qp = mpmath.fdot(weights, [abs(c + d) ** 2 / 2 for c, d in zip(table[n], table[n + 1])])
        qm = mpmath.fdot(weights, [abs(c - d) ** 2 / 2 for c, d in zip(table[n], table[n + 1])])
        plus.append(_check_probability(qp, 'q_%d+' % n))
        minus.append(_check_probability(qm, 'q_%d-' % n))
    _check_probability(mpmath.fsum(pad), 'sum of PAD modes')
    return ModeProbabilities(pad=pad, plus=plus, minus=minus)


def generalized_moments(model, P, probabilities=None):
    """
    ``beta[2n] = q_n / r_n`` and ``beta[2n+1] = (q_n+ - q_n-) / s_n`` for
    ``n <= n_max``, as a mapping of order to value.
    """
    if probabilities is None:
        probabilities = mode_probabilities(model, P)
    moments = {}
    for n in range(model.n_max + 1):
        if not model.r[n] > 0 or not model.s[n] > 0:
            raise PrecisionError('r_%d or s_%d underflows at %d bits' % (n, n, mpmath.mp.prec),
                                 pivot=n, precision=mpmath.mp.prec)
        moments[2 * n] = probabilities.pad[n] / model.r[n]
        moments[2 * n + 1] = (probabilities.plus[n] - probabilities.minus[n]) / model.s[n]
    return moments


@attr.s(frozen=True, slots=True)
class ModeSelection(object):
    """
    Which modes one experiment measures: a PAD set (``even:0,1``) or one
    iPAD pair (``odd:0``).
    """
    kind = attr.ib(validator=attr.validators.in_(('even', 'odd')))
    modes = attr.ib(converter=tuple)

    def __attrs_post_init__(self):
        if not self.modes or any(n < 0 for n in self.modes):
            raise ValueError('mode selection needs nonnegative mode indices')
        if self.kind == 'odd' and len(self.modes) != 1:
            raise ValueError('an iPAD run measures exactly one pair')
        if len(set(self.modes)) != len(self.modes):
            raise ValueError('mode indices must be distinct')

    @classmethod
    def parse(cls, text):
        kind, sep, rest = text.strip().partition(':')
        if not sep or kind not in ('even', 'odd'):
            raise ValueError('mode selection must look like "even:1" or "odd:0", got %r' % text)
        try:
            modes = [int(m) for m in rest.split(',') if m.strip()]
        except ValueError:
            raise ValueError('mode indices must be integers, got %r' % rest)
        return cls(kind=kind, modes=modes)

    @property
    def orders(self):
        if self.kind == 'even':
            return tuple(2 * n for n in self.modes)
        return (2 * self.modes[0] + 1,)

    @property
    def labels(self):
        if self.kind == 'even':
            return tuple('N%d' % n for n in self.modes)
        n = self.modes[0]
        return ('N%d+' % n, 'N%d-' % n)

    def probabilities(self, probabilities):
        if self.kind == 'even':
            return [probabilities.pad[n] for n in self.modes]
        n = self.modes[0]
        return [probabilities.plus[n], probabilities.minus[n]]

    def __str__(self):
        return '%s:%s' % (self.kind, ','.join(str(n) for n in self.modes))


@attr.s(frozen=True, slots=True)
class CountRecord(object):
    """
    Photon counts of one experiment over ``M`` temporal modes. ``counts``
    follows ``selection.labels``; ``other_count`` holds photons that landed
    outside the measured modes.
    """
    selection = attr.ib()
    counts = attr.ib(converter=tuple)
    other_count = attr.ib()
    M = attr.ib()
    epsilon = attr.ib()
    seed = attr.ib()
    replicate = attr.ib(default=0)
    poisson = attr.ib(default=False)

    @property
    def N(self):
        return self.M * self.epsilon

    def as_dict(self):
        out = {label: count for label, count in zip(self.selection.labels, self.counts)}
        out.update(other=self.other_count, M=self.M, epsilon=self.epsilon, seed=self.seed,
                   replicate=self.replicate, selection=str(self.selection), poisson=self.poisson)
        return out


def _draw(probabilities, M, epsilon, generator, poisson):
    measured = [float(q) for q in probabilities]
    rest = max(0.0, 1.0 - sum(measured))
    if poisson:
        N = M * epsilon
        draws = generator.poisson([N * q for q in measured] + [N * rest])
        return [int(c) for c in draws[:-1]], int(draws[-1])
    pvals = [epsilon * q for q in measured] + [epsilon * rest, 1.0 - epsilon]
    draws = generator.multinomial(int(M), pvals)
    return [int(c) for c in draws[:-2]], int(draws[-2])


def _validate_run(M, epsilon):
    if M < 1:
        raise ValueError('M must be at least 1, got %s' % M)
    if not 0 <= epsilon < 1:
        raise ValueError('epsilon must lie in [0, 1), got %s' % epsilon)


def simulate_counts(model, P, M, epsilon, seed, selection, replicate=0, poisson=False, probabilities=None):
    """
    Simulate one experiment.

    Each of the ``M`` temporal modes carries a photon with probability
    ``epsilon``; a photon lands in a measured branch with its mode
    probability. Independent temporal modes collapse to a single multinomial
    draw over ``M`` trials. With ``poisson`` the counts are independent
    Poisson variables of mean ``N q``.
    """
    _validate_run(M, epsilon)
    if probabilities is None:
        probabilities = mode_probabilities(model, P)
    measured = selection.probabilities(probabilities)
    if mpmath.fsum(measured) > 1 + PROBABILITY_SLACK:
        raise ConvergenceError('measured mode probabilities sum to %s > 1' % mpmath.nstr(mpmath.fsum(measured), 12))
    counts, other = _draw(measured, M, epsilon, make_generator(seed, replicate), poisson)
    return CountRecord(selection=selection, counts=counts, other_count=other, M=int(M), epsilon=float(epsilon),
                       seed=int(seed), replicate=replicate, poisson=poisson)


def analytic_variance(model, selection, probabilities, N, epsilon, poisson=False):
    """
    Exact variance of each estimator under the count law.

    PAD mode ``n``: ``q (1 - eps q) / (r**2 N)``; iPAD pair ``n``:
    ``((q+ + q-) - eps (q+ - q-)**2) / (s**2 N)``. The Poisson law drops the
    ``eps`` terms.
    """
    eps = 0 if poisson else mpmath.mpf(epsilon)
    N = mpmath.mpf(N)
    if selection.kind == 'even':
        return tuple(probabilities.pad[n] * (1 - eps * probabilities.pad[n]) / (model.r[n] ** 2 * N)
                     for n in selection.modes)
    n = selection.modes[0]
    qp, qm = probabilities.plus[n], probabilities.minus[n]
    return (((qp + qm) - eps * (qp - qm) ** 2) / (model.s[n] ** 2 * N),)


def _point_estimates(model, selection, counts, N):
    if selection.kind == 'even':
        return tuple(c / (float(model.r[n]) * N) for n, c in zip(selection.modes, counts))
    n = selection.modes[0]
    return ((counts[0] - counts[1]) / (float(model.s[n]) * N),)


@attr.s(frozen=True, slots=True)
class EstimateReport(object):
    """
    Estimates ``beta_k`` for the measured orders with their variances.

    ``analytic_variances`` use the true mode probabilities when they are
    known and the empirical ones otherwise. Replicated runs also carry the
    empirical means, variances and bias z-scores against ``truth``.
    """
    orders = attr.ib(converter=tuple)
    estimates = attr.ib(converter=tuple)
    analytic_variances = attr.ib(converter=tuple)
    N = attr.ib()
    empirical_variances = attr.ib(default=None)
    truth = attr.ib(default=None)
    bias_z = attr.ib(default=None)
    replicates = attr.ib(default=1)

    @property
    def variance_ratios(self):
        if self.empirical_variances is None:
            return None
        return tuple(e / a for e, a in zip(self.empirical_variances, self.analytic_variances))

    def as_dict(self):
        def floats(values):
            return None if values is None else [to_float(v) for v in values]
        return {
            'orders': list(self.orders),
            'estimates': floats(self.estimates),
            'analytic_variances': floats(self.analytic_variances),
            'empirical_variances': floats(self.empirical_variances),
            'variance_ratios': floats(self.variance_ratios),
            'truth': floats(self.truth),
            'bias_z': floats(self.bias_z),
            'N': float(self.N),
            'replicates': self.replicates,
        }


def estimate(counts, model, probabilities=None):
    """
    ``beta_2n = N_n / (r_n N)`` and ``beta_2n+1 = (N_n+ - N_n-) / (s_n N)``.

    :param probabilities:
        True mode probabilities for the analytic variances; without them the
        empirical frequencies are plugged in.
    """
    N = counts.N
    if not N > 0:
        raise ValueError('N = M * epsilon must be positive to estimate')
    selection = counts.selection
    if probabilities is None:
        empirical = [c / N for c in counts.counts]
        pad = [0] * (model.n_max + 1)
        plus = [0] * (model.n_max + 1)
        minus = [0] * (model.n_max + 1)
        if selection.kind == 'even':
            for n, q in zip(selection.modes, empirical):
                pad[n] = mpmath.mpf(q)
        else:
            plus[selection.modes[0]] = mpmath.mpf(empirical[0])
            minus[selection.modes[0]] = mpmath.mpf(empirical[1])
        probabilities = ModeProbabilities(pad=pad, plus=plus, minus=minus)
    return EstimateReport(
        orders=selection.orders,
        estimates=_point_estimates(model, selection, counts.counts, N),
        analytic_variances=analytic_variance(model, selection, probabilities, N, counts.epsilon, counts.poisson),
        N=N,
    )


def _simulate_batch(measured, M, epsilon, seed, indices, poisson):
    rows = []
    for k in indices:
        counts, other = _draw(measured, M, epsilon, make_generator(seed, k), poisson)
        rows.append(counts + [other])
    return rows


@attr.s(frozen=True, slots=True)
class ReplicateRun(object):
    """
    ``counts`` has one row per replicate: the measured counts followed by
    the other count. ``estimates`` has one row per replicate and one
    column per order.
    """
    selection = attr.ib()
    counts = attr.ib(repr=False, eq=False)
    estimates = attr.ib(repr=False, eq=False)
    report = attr.ib()
    seed = attr.ib()
    M = attr.ib()
    epsilon = attr.ib()


def _batches(count, workers):
    size = int(math.ceil(count / float(workers)))
    return [range(start, min(start + size, count)) for start in range(0, count, size)]


def replicate(model, P, M, epsilon, seed, selection, replicates, workers=1, poisson=False):
    """
    Run ``replicates`` independent experiments and summarize them.

    Replicate ``k`` uses its own Philox stream, so the result does not
    depend on ``workers``.
    """
    _validate_run(M, epsilon)
    if replicates < 2:
        raise ValueError('need at least two replicates, got %d' % replicates)
    probabilities = mode_probabilities(model, P)
    measured = [float(q) for q in selection.probabilities(probabilities)]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_simulate_batch, measured, M, epsilon, seed, list(batch), poisson)
                       for batch in _batches(replicates, workers)]
            rows = [row for future in futures for row in future.result()]
    else:
        rows = _simulate_batch(measured, M, epsilon, seed, range(replicates), poisson)
    counts = numpy.array(rows, dtype=numpy.int64)

    N = M * epsilon
    estimates = numpy.array([_point_estimates(model, selection, row[:-1], N) for row in rows])
    means = estimates.mean(axis=0)
    empirical = estimates.var(axis=0, ddof=1)
    analytic = analytic_variance(model, selection, probabilities, N, epsilon, poisson)
    moments = generalized_moments(model, P, probabilities)
    truth = [moments[k] for k in selection.orders]
    bias_z = [(m - float(t)) / math.sqrt(float(a) / replicates) if a > 0 else 0.0
              for m, t, a in zip(means, truth, analytic)]
    report = EstimateReport(
        orders=selection.orders,
        estimates=[float(m) for m in means],
        analytic_variances=analytic,
        N=N,
        empirical_variances=[float(v) for v in empirical],
        truth=truth,
        bias_z=bias_z,
        replicates=replicates,
    )
    log.info('%d replicates of %s: bias z %s', replicates, selection, ', '.join('%.2f' % z for z in bias_z))
    return ReplicateRun(selection=selection, counts=counts, estimates=estimates, report=report, seed=seed,
                        M=M, epsilon=epsilon)
