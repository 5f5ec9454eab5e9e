"""
Hankel moment matrices, their Cholesky factors and the orthonormal
polynomials those factors define.

All arithmetic happens in mpmath at the working precision. A failed
positive-definiteness check is retried once at doubled precision by
``factorize``.
"""
import functools
import logging

import attr
import mpmath
import numpy

from momentlimits.errors import ConvergenceError, OrderError, PrecisionError, ShapeError
from momentlimits.measure import Atoms

__all__ = (
    'HankelMatrix', 'CholeskyFactor', 'OrthoBasis', 'EigenDecayFit', 'build_hankel',
    'cholesky', 'invert_lower', 'factorize', 'lambda_min_profile', 'cholesky_derivative',
    'reconstruction_residual', 'orthonormality_residual', 'moment_projection_residual',
    'MAX_ORDER',
)

log = logging.getLogger(__name__)

MAX_ORDER = 30
PIVOT_TOLERANCE = 16


def _max_abs(matrix):
    return max(abs(matrix[i, j]) for i in range(matrix.rows) for j in range(matrix.cols))


def _leading(matrix, size):
    out = mpmath.matrix(size, size)
    for i in range(size):
        for j in range(size):
            out[i, j] = matrix[i, j]
    return out


@attr.s(frozen=True, slots=True, repr=False, eq=False)
class HankelMatrix(object):
    """
    ``entries[p, q] = moment(P, p + q)``.

    :param standardized: True for the matrix of a unit half-width base measure.
    """
    entries = attr.ib()
    source = attr.ib(default='')
    standardized = attr.ib(default=False)

    @property
    def order(self):
        return self.entries.rows - 1

    def leading(self, p):
        return attr.evolve(self, entries=_leading(self.entries, p + 1))

    def __repr__(self):
        return '<HankelMatrix(%s, order=%d)>' % (self.source, self.order)


@attr.s(frozen=True, slots=True, repr=False, eq=False)
class CholeskyFactor(object):
    """
    Lower-triangular ``L`` with ``L * L.T == H``.
    """
    entries = attr.ib()
    source = attr.ib(default='')
    standardized = attr.ib(default=False)

    @property
    def order(self):
        return self.entries.rows - 1

    def __getitem__(self, key):
        return self.entries[key]

    def diagonal(self):
        return [self.entries[n, n] for n in range(self.entries.rows)]

    def leading(self, p):
        return attr.evolve(self, entries=_leading(self.entries, p + 1))

    def rescale(self, delta):
        """
        Turn a standardized factor ``V`` into ``L`` with ``L[p, n] = delta**p * V[p, n]``.
        """
        size = self.entries.rows
        out = mpmath.matrix(size, size)
        power = mpmath.mpf(1)
        for p in range(size):
            for n in range(p + 1):
                out[p, n] = power * self.entries[p, n]
            power *= delta
        return attr.evolve(self, entries=out, standardized=False)

    def to_floats(self):
        return [[float(self.entries[i, j]) for j in range(self.entries.cols)] for i in range(self.entries.rows)]

    def __repr__(self):
        return '<CholeskyFactor(%s, order=%d)>' % (self.source, self.order)


@attr.s(frozen=True, slots=True, repr=False, eq=False)
class OrthoBasis(object):
    """
    Coefficients ``A = L^-1`` of the orthonormal polynomials
    ``a_n(x) = sum_p A[n, p] x**p``.
    """
    coefficients = attr.ib()
    source = attr.ib(default='')
    standardized = attr.ib(default=False)

    @property
    def order(self):
        return self.coefficients.rows - 1

    def __getitem__(self, key):
        return self.coefficients[key]

    def evaluate(self, n, x):
        value = mpmath.mpf(0)
        for p in range(n, -1, -1):
            value = value * x + self.coefficients[n, p]
        return value

    def polynomial(self, n):
        if n > self.order:
            raise OrderError('polynomial %d requested from a basis of order %d' % (n, self.order), cap=self.order)
        return functools.partial(self.evaluate, n)

    def __repr__(self):
        return '<OrthoBasis(%s, order=%d)>' % (self.source, self.order)


@attr.s(frozen=True, slots=True)
class EigenDecayFit(object):
    """
    Smallest eigenvalues of the leading Hankel submatrices and the fit
    ``log lambda_min - log(p)/2 = log(prefactor) + p * log(rate)`` over p >= 1.
    """
    orders = attr.ib(converter=tuple)
    values = attr.ib(converter=tuple)
    rate = attr.ib()
    prefactor = attr.ib()
    r_squared = attr.ib()
    szego = attr.ib(default=None)

    @property
    def decreasing(self):
        return all(b < a for a, b in zip(self.values, self.values[1:]))


def _source(P):
    return getattr(P, 'name', '') or type(P).__name__


def build_hankel(P, J, max_order=MAX_ORDER, check=True):
    """
    Build the ``(J+1) x (J+1)`` moment matrix of ``P``.

    :param J: Highest polynomial degree.
    :param max_order: Order cap, ``OrderError`` beyond it.
    :param check:
        Verify every leading minor is positive-definite by running the
        Cholesky factorization.
    """
    if J < 0:
        raise ValueError('Hankel order must be nonnegative, got %d' % J)
    if max_order is not None and J > max_order:
        raise OrderError('Hankel order %d exceeds the configured cap %d' % (J, max_order), cap=max_order)
    if isinstance(P, Atoms) and J >= P.atom_count:
        raise OrderError('Hankel order %d needs more than the %d atoms of %s'
                         % (J, P.atom_count, _source(P)), cap=P.atom_count - 1)

    moments = [P.moment(k, max_order=None) for k in range(2 * J + 1)]
    entries = mpmath.matrix(J + 1, J + 1)
    for p in range(J + 1):
        for q in range(J + 1):
            entries[p, q] = moments[p + q]
    standardized = abs(P.half_width - 1) < 1e-12 if P.bounded else False
    H = HankelMatrix(entries=entries, source=_source(P), standardized=standardized)
    if check:
        cholesky(H)
    return H


def cholesky(H):
    """
    Column-by-column Cholesky factorization of a Hankel matrix.

    :raises PrecisionError: when a pivot is not positive, with its index.
    """
    A = H.entries
    n = A.rows
    L = mpmath.matrix(n, n)
    eps = mpmath.mp.eps
    for j in range(n):
        pivot = A[j, j] - mpmath.fsum((L[j, k] for k in range(j)), squared=True)
        if not pivot > PIVOT_TOLERANCE * eps * abs(A[j, j]):
            raise PrecisionError(
                'leading minor %d of the %s Hankel matrix is not positive-definite at %d bits'
                % (j, H.source, mpmath.mp.prec), pivot=j, precision=mpmath.mp.prec)
        L[j, j] = mpmath.sqrt(pivot)
        for i in range(j + 1, n):
            t = mpmath.fdot((L[i, k] for k in range(j)), (L[j, k] for k in range(j)))
            L[i, j] = (A[i, j] - t) / L[j, j]
    return CholeskyFactor(entries=L, source=H.source, standardized=H.standardized)


def invert_lower(L):
    """
    Invert a lower-triangular factor by forward substitution.
    """
    M = L.entries
    n = M.rows
    A = mpmath.matrix(n, n)
    for c in range(n):
        if not M[c, c] > 0:
            raise PrecisionError('diagonal entry %d is not positive' % c, pivot=c, precision=mpmath.mp.prec)
        A[c, c] = 1 / M[c, c]
        for i in range(c + 1, n):
            A[i, c] = -mpmath.fdot((M[i, k] for k in range(c, i)), (A[k, c] for k in range(c, i))) / M[i, i]
    return OrthoBasis(coefficients=A, source=L.source, standardized=L.standardized)


@functools.lru_cache(maxsize=64)
def _factorize(P, J, max_order, prec):
    with mpmath.mp.workprec(prec):
        H = build_hankel(P, J, max_order=max_order, check=False)
        L = cholesky(H)
        A = invert_lower(L)
    return H, L, A


def factorize(P, J, max_order=MAX_ORDER):
    """
    Hankel matrix, Cholesky factor and orthonormal basis of ``P`` at order
    ``J``.

    On a non-positive pivot the working precision is doubled and the
    factorization retried once; the returned matrices then carry the higher
    precision. A second failure propagates.
    """
    prec = mpmath.mp.prec
    try:
        return _factorize(P, J, max_order, prec)
    except PrecisionError as e:
        log.warning('%s; retrying at %d bits', e.args[0], 2 * prec)
        return _factorize(P, J, max_order, 2 * prec)


def _smallest_eigenvalues(P, p_max, max_order, prec):
    with mpmath.mp.workprec(prec):
        G = build_hankel(P, p_max, max_order=max_order)
        values = []
        for p in range(p_max + 1):
            try:
                eigenvalues = mpmath.eigsy(_leading(G.entries, p + 1), eigvals_only=True)
            except (RuntimeError, ValueError) as e:
                raise ConvergenceError('eigensolve of G_(%d) did not converge: %s' % (p, e), partial=values)
            smallest = min(eigenvalues[i] for i in range(p + 1))
            if not smallest > 0:
                raise PrecisionError('lambda_min of G_(%d) is not positive at %d bits' % (p, prec),
                                     pivot=p, precision=prec)
            values.append(smallest)
    return values


def lambda_min_profile(P, p_max, max_order=MAX_ORDER):
    """
    Smallest eigenvalue of every leading submatrix ``G_(p)``, p <= p_max, and
    a log-linear fit of their decay.

    A non-positive pivot or eigenvalue doubles the working precision once,
    as in :func:`factorize`.

    :param P: A standardized measure (half-width one).
    """
    if p_max < 0:
        raise ValueError('p_max must be nonnegative, got %d' % p_max)
    prec = mpmath.mp.prec
    try:
        values = _smallest_eigenvalues(P, p_max, max_order, prec)
    except PrecisionError as e:
        log.warning('%s; retrying at %d bits', e.args[0], 2 * prec)
        values = _smallest_eigenvalues(P, p_max, max_order, 2 * prec)

    if p_max < 2:
        # too few points for a line through p >= 1
        return EigenDecayFit(orders=range(p_max + 1), values=values, rate=None, prefactor=None,
                             r_squared=None, szego=getattr(P, 'szego', None))

    orders = numpy.arange(1, p_max + 1)
    y = numpy.array([float(mpmath.log(values[int(p)]) - mpmath.log(int(p)) / 2) for p in orders])
    slope, intercept = numpy.polyfit(orders, y, 1)
    fitted = slope * orders + intercept
    ss_res = float(numpy.sum((y - fitted) ** 2))
    ss_tot = float(numpy.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return EigenDecayFit(
        orders=range(p_max + 1),
        values=values,
        rate=float(numpy.exp(slope)),
        prefactor=float(numpy.exp(intercept)),
        r_squared=r_squared,
        szego=getattr(P, 'szego', None),
    )


def cholesky_derivative(V, B, dG):
    """
    Derivative of a Cholesky factor along a symmetric perturbation ``dG``.

    With ``D = B dG B.T``, the derivative is ``V * Phi(D)`` where ``Phi``
    keeps the strict lower triangle of ``D`` and halves its diagonal.
    """
    V = getattr(V, 'entries', V)
    B = getattr(B, 'coefficients', B)
    n = V.rows
    if V.cols != n or B.rows != n or B.cols != n or dG.rows != n or dG.cols != n:
        raise ShapeError('cholesky_derivative needs square inputs of one order, got %dx%d, %dx%d and %dx%d'
                         % (V.rows, V.cols, B.rows, B.cols, dG.rows, dG.cols))
    scale = max(_max_abs(dG), mpmath.mpf(1))
    for i in range(n):
        for j in range(i):
            if abs(dG[i, j] - dG[j, i]) > 64 * mpmath.mp.eps * scale:
                raise ValueError('dG is not symmetric at (%d, %d)' % (i, j))

    D = B * dG * B.T
    phi = mpmath.matrix(n, n)
    for m in range(n):
        phi[m, m] = D[m, m] / 2
        for k in range(m):
            phi[m, k] = D[m, k]
    dV = mpmath.matrix(n, n)
    for p in range(n):
        for k in range(p + 1):
            dV[p, k] = mpmath.fdot((V[p, m] for m in range(k, p + 1)), (phi[m, k] for m in range(k, p + 1)))
    return dV


def reconstruction_residual(H, L):
    """Largest entry of ``|L L^T - H|``."""
    return _max_abs(L.entries * L.entries.T - H.entries)


def _basis_table(basis, nodes):
    return [[basis.evaluate(k, x) for x in nodes] for k in range(basis.order + 1)]


def orthonormality_residual(P, basis, quadrature_order=None):
    """
    Largest deviation of ``integrate(P, a_n a_m)`` from the identity.

    Densities are integrated with an independent rule of ``quadrature_order``
    nodes, twice their own order by default.
    """
    if hasattr(P, 'quadrature_order'):
        P = P.with_quadrature(quadrature_order or 2 * P.quadrature_order)
    nodes, weights = P.quadrature()
    values = _basis_table(basis, nodes)
    worst = mpmath.mpf(0)
    for i, row in enumerate(values):
        weighted = [w * v for w, v in zip(weights, row)]
        for j in range(i + 1):
            value = mpmath.fdot(weighted, values[j])
            worst = max(worst, abs(value - (1 if i == j else 0)))
    return worst


def moment_projection_residual(P, L, basis):
    """Largest deviation of ``<x^p, a_n>_P`` from ``L[p, n]``."""
    nodes, weights = P.quadrature()
    values = _basis_table(basis, nodes)
    worst = mpmath.mpf(0)
    powers = list(weights)
    for p in range(basis.order + 1):
        for k in range(basis.order + 1):
            worst = max(worst, abs(mpmath.fdot(powers, values[k]) - L.entries[p, k]))
        powers = [v * x for v, x in zip(powers, nodes)]
    return worst
