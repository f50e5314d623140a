"""Demmler-Reinsch basis of the natural spline space on an equidistant grid.

The basis diagonalizes both the discrete inner product and the derivative
penalty of order ``q``: the columns of ``phi`` are orthonormal on the grid and
the penalty acts on column ``i`` as multiplication by ``eta[i]``.  Columns
``i <= q`` span the polynomials of degree below ``q`` (the penalty null
space); higher columns are discretized Sobolev-space eigenfunctions, built
from their closed-form cosine main term plus exponentially decaying boundary
corrections, then re-orthonormalized by a QR factorization.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as _legendre
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import BSpline
from scipy.linalg import toeplitz

SUPPORTED_ORDERS = range(1, 7)

_EXACT_MODE_MAX_N = 512


def _decay_roots(beta: int) -> np.ndarray:
    """Roots a (Re a > 0) of the boundary-layer exponentials exp(-a*omega*x).

    These are the characteristic roots of the order-2*beta eigenvalue ODE
    with negative real part, normalized by the frequency: a = exp(i*pi*j /
    (2*beta)) for |j| <= beta - 2 with j of the same parity as beta.
    """
    roots = []
    for j in range(0, beta - 1):
        if j % 2 != beta % 2:
            continue
        a = np.exp(1j * np.pi * j / (2 * beta))
        roots.append(a)
        if j != 0:
            roots.append(np.conj(a))
    return np.array(roots)


@lru_cache(maxsize=None)
def _boundary_coefficients(beta: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of the boundary corrections for order ``beta``.

    Solves the linear system imposed by the natural boundary conditions
    psi^(l)(0) = 0, l = beta..2*beta-1, on the closed-form ansatz
    sqrt(2) * [cos(omega*x + pi*(beta-1)/4) + sum_a r_a exp(-a*omega*x)],
    after dropping terms that vanish exponentially in omega.  The system is
    overdetermined by one equation but consistent; the least-squares residual
    is checked so an unsupported order fails loudly.
    """
    if beta == 1:
        return np.array([]), np.array([])
    a = _decay_roots(beta)
    phase = np.pi * (beta - 1) / 4.0
    ls = np.arange(beta, 2 * beta)
    A = np.array([[(-ak) ** l for ak in a] for l in ls])
    b = -np.cos(phase + ls * np.pi / 2.0)
    coef, *_ = np.linalg.lstsq(A, b.astype(complex), rcond=None)
    resid = np.linalg.norm(A @ coef - b)
    if resid > 1e-8:
        raise ValueError(
            f"boundary-condition solve is inconsistent for order {beta} "
            f"(residual {resid:.2e})"
        )
    return a, coef


def sobolev_eigenvalue(beta: int, i: int) -> float:
    """Eigenvalue of the order-``beta`` Sobolev derivative penalty.

    Zero for the null-space indices ``i <= beta`` and
    ``(pi * (i - (beta + 1) / 2)) ** (2 * beta)`` above.
    """
    if beta < 1 or i < 1:
        raise ValueError("beta and i must be positive integers")
    if i <= beta:
        return 0.0
    return float((np.pi * (i - (beta + 1) / 2.0)) ** (2 * beta))


def sobolev_eigenfunction(beta: int, i: int, x) -> np.ndarray | float:
    """Closed-form eigenfunction of the order-``beta`` penalty on [0, 1].

    Defined for every index with positive frequency, i.e. ``i > (beta+1)/2``:
    a cosine of frequency pi*(i - (beta+1)/2) with phase pi*(beta-1)/4 plus
    boundary-layer corrections that decay exponentially away from 0 and 1.
    The corrections alternate sign with ``i`` so the natural boundary
    conditions hold at both endpoints.
    """
    if i <= (beta + 1) / 2.0:
        raise ValueError(f"index {i} has nonpositive frequency for order {beta}")
    x = np.asarray(x, dtype=float)
    omega = np.pi * (i - (beta + 1) / 2.0)
    out = np.cos(omega * x + np.pi * (beta - 1) / 4.0)
    if beta > 1:
        roots, coef = _boundary_coefficients(beta)
        sign = (-1.0) ** (i + 1)
        for a, r in zip(roots, coef):
            out = out + np.real(
                r * (np.exp(-a * omega * x) + sign * np.exp(-a * omega * (1.0 - x)))
            )
    result = np.sqrt(2.0) * out
    return result if result.ndim else float(result)


def nullspace_polynomial(k: int, x) -> np.ndarray:
    """Orthonormal shifted Legendre polynomial of degree ``k`` on [0, 1]."""
    c = np.zeros(k + 1)
    c[k] = 1.0
    return np.sqrt(2 * k + 1) * _legendre.legval(2.0 * np.asarray(x, float) - 1.0, c)


@dataclass(frozen=True)
class DRBasis:
    """Orthonormal grid basis with penalty eigenvalues.

    Attributes
    ----------
    n : grid size; design points are t_i = (i-1)/(n-1).
    q : penalty order.
    phi : (n, n) orthonormal matrix, columns ordered by eta ascending.
    eta : nonnegative eigenvalues, exactly zero for the first q entries.
    """

    n: int
    q: int
    phi: np.ndarray
    eta: np.ndarray

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)

    @property
    def n_eta(self) -> np.ndarray:
        """Scaled eigenvalues n*eta, the quantity the smoother depends on."""
        return self.n * self.eta


def _polynomial_block(n: int, q: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n)
    M = np.vander(t, q, increasing=True)
    Q, R = np.linalg.qr(M)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def _fix_column_signs(Q: np.ndarray) -> np.ndarray:
    # value at t_1 nonnegative; ties broken by the first nonzero entry
    for j in range(Q.shape[1]):
        col = Q[:, j]
        lead = col[0]
        if lead == 0.0:
            nz = np.nonzero(np.abs(col) > 1e-12)[0]
            lead = col[nz[0]] if nz.size else 1.0
        if lead < 0:
            Q[:, j] = -col
    return Q


@lru_cache(maxsize=32)
def _build_basis_cached(n: int, q: int, exact: bool) -> DRBasis:
    if exact:
        K = natural_spline_penalty(n, q)
        eig, vec = np.linalg.eigh(K)
        eig = np.clip(eig, 0.0, None)
        eig[:q] = 0.0
        vec = _fix_column_signs(vec)
        phi, eta = vec, eig
    else:
        M = np.empty((n, n))
        M[:, :q] = _polynomial_block(n, q)
        t = np.linspace(0.0, 1.0, n)
        rootn = np.sqrt(n)
        for i in range(q + 1, n + 1):
            M[:, i - 1] = sobolev_eigenfunction(q, i, t) / rootn
        Q, R = np.linalg.qr(M)
        s = np.sign(np.diag(R))
        s[s == 0] = 1.0
        phi = _fix_column_signs(Q * s)
        eta = np.array([sobolev_eigenvalue(q, i) / n for i in range(1, n + 1)])
    phi.setflags(write=False)
    eta.setflags(write=False)
    return DRBasis(n=n, q=q, phi=phi, eta=eta)


def build_basis(n: int, q: int, exact: bool = False) -> DRBasis:
    """Construct the order-``q`` basis on the ``n``-point equidistant grid.

    The default construction discretizes the closed-form eigenfunctions and
    re-orthonormalizes, with eigenvalues eta_i = nu_i / n taken from the
    continuous problem.  ``exact=True`` instead diagonalizes the natural
    spline penalty matrix (dense eigensolve, limited to n <= 512); it is
    meant for validation.
    """
    if q not in SUPPORTED_ORDERS:
        raise ValueError(f"penalty order {q} unsupported (expected 1..6)")
    if n < 4 * q:
        raise ValueError(f"grid size {n} too small for order {q} (need n >= {4 * q})")
    if exact and n > _EXACT_MODE_MAX_N:
        raise ValueError(f"exact mode is dense-only, n <= {_EXACT_MODE_MAX_N}")
    return _build_basis_cached(int(n), int(q), bool(exact))


def coefficients(basis: DRBasis, y: np.ndarray) -> np.ndarray:
    """Expansion coefficients phi^T y of a grid vector."""
    y = np.asarray(y, dtype=float)
    if y.shape != (basis.n,):
        raise ValueError(f"expected vector of length {basis.n}, got shape {y.shape}")
    return basis.phi.T @ y


@lru_cache(maxsize=None)
def _bspline_autocorr(q: int) -> tuple[float, ...]:
    """Overlap integrals of the cardinal B-spline of degree q-1 with its shifts."""
    d = q - 1
    B = BSpline.basis_element(np.arange(q + 1), extrapolate=False)
    xg, wg = leggauss(max(2 * d + 2, 3))
    vals = []
    for m in range(q):
        total = 0.0
        for cell in range(m, q):
            xx = 0.5 * xg + cell + 0.5
            v1 = np.nan_to_num(B(xx))
            v2 = np.nan_to_num(B(xx - m))
            total += 0.5 * np.sum(wg * v1 * v2)
        vals.append(total)
    return tuple(vals)


def natural_spline_penalty(n: int, q: int) -> np.ndarray:
    """Penalty matrix K with f^T K f = integral of the squared q-th derivative
    of the natural interpolating spline of degree 2q-1 through (t_i, f_i).

    Uses the divided-difference representation: K = h^(1-2q) D^T G^{-1} D with
    D the q-th order difference matrix and G the Gram matrix of B-splines of
    degree q-1 on the integer grid.
    """
    h = 1.0 / (n - 1)
    D = np.diff(np.eye(n), n=q, axis=0)
    g = np.zeros(n - q)
    g[:q] = _bspline_autocorr(q)
    G = toeplitz(g)
    K = D.T @ np.linalg.solve(G, D) * h ** (1 - 2 * q)
    return 0.5 * (K + K.T)
