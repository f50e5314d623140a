import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from ebsmooth import build_basis, coefficients, sobolev_eigenfunction, sobolev_eigenvalue
from ebsmooth.dr_basis import natural_spline_penalty, nullspace_polynomial
from ebsmooth.noise_model import spectral_from_autocorr


def test_eigenvalue_null_space():
    assert sobolev_eigenvalue(2, 1) == 0.0
    assert sobolev_eigenvalue(2, 2) == 0.0
    assert sobolev_eigenvalue(3, 3) == 0.0


def test_eigenvalue_closed_form():
    np.testing.assert_allclose(sobolev_eigenvalue(2, 3), (1.5 * np.pi) ** 4)
    np.testing.assert_allclose(sobolev_eigenvalue(2, 3), 493.134, rtol=1e-5)
    np.testing.assert_allclose(sobolev_eigenvalue(1, 2), np.pi**2)


def test_eigenfunction_first_order_has_no_boundary_terms():
    # beta = 1 has an empty correction set: pure cosines
    np.testing.assert_allclose(sobolev_eigenfunction(1, 2, 0.5), 0.0, atol=1e-12)
    np.testing.assert_allclose(sobolev_eigenfunction(1, 3, 0.0), np.sqrt(2.0))


def _ode_eigenfunction(beta, i, m=20001):
    """Finite-difference eigensolve of the boundary-value problem: the
    independent oracle for the closed-form eigenfunctions."""
    h = 1.0 / (m - 1)
    coef = np.array([(-1.0) ** k * np.math.comb(beta, k) for k in range(beta + 1)])
    D = sp.diags([np.full(m - beta, c) for c in coef],
                 offsets=list(range(beta + 1)), shape=(m - beta, m)) / h**beta
    K = (D.T @ D).tocsc()  # eigenproblem K v = (nu/h) v under sum v^2 = 1
    nu = sobolev_eigenvalue(beta, i)
    vals, vecs = eigsh(K, k=1, sigma=nu / h)
    psi = vecs[:, 0] / np.sqrt(h)
    return np.linspace(0, 1, m), psi, vals[0] * h


def test_eigenfunction_matches_ode_solve():
    x, psi, nu = _ode_eigenfunction(2, 5)
    target = sobolev_eigenfunction(2, 5, x)
    if psi @ target < 0:
        psi = -psi
    mid = (len(x) - 1) // 2  # x = 0.5 exactly
    assert abs(psi[mid] - sobolev_eigenfunction(2, 5, 0.5)) < 1e-4
    np.testing.assert_allclose(nu, sobolev_eigenvalue(2, 5), rtol=1e-5)


@pytest.mark.parametrize("beta", [2, 3, 4, 5, 6])
def test_eigenfunctions_nearly_orthonormal(beta):
    # the closed forms are asymptotically orthonormal in L2; the deviation is
    # largest for the first oscillatory index and shrinks quickly
    x = np.linspace(0, 1, 4001)
    lo = beta + 1
    G = np.empty((4, 4))
    for a in range(4):
        for b in range(4):
            G[a, b] = np.trapezoid(
                sobolev_eigenfunction(beta, lo + a, x)
                * sobolev_eigenfunction(beta, lo + b, x), x)
    np.testing.assert_allclose(G, np.eye(4), atol=0.05)


def test_build_basis_first_order_constant_column():
    b = build_basis(100, 1)
    np.testing.assert_allclose(b.phi[:, 0], np.full(100, 0.1), atol=1e-12)
    assert b.eta[0] == 0.0


def test_build_basis_eigenvalue_matches_sobolev():
    b = build_basis(200, 2)
    assert b.eta[0] == 0.0 and b.eta[1] == 0.0
    assert abs(200 * b.eta[2] / (1.5 * np.pi) ** 4 - 1) < 0.02


@pytest.mark.parametrize("n,q", [(64, 3), (100, 1), (200, 2), (128, 6)])
def test_orthonormality(n, q):
    b = build_basis(n, q)
    assert np.abs(b.phi.T @ b.phi - np.eye(n)).max() < 1e-8


def test_eta_nonnegative_ascending():
    b = build_basis(150, 4)
    assert np.all(b.eta[:4] == 0.0)
    assert np.all(b.eta[4:] > 0.0)
    assert np.all(np.diff(b.eta) >= 0.0)


def test_nullspace_columns_span_polynomials():
    n, q = 120, 3
    b = build_basis(n, q)
    t = np.linspace(0, 1, n)
    for k in range(q):
        poly = t**k
        resid = poly - b.phi[:, :q] @ (b.phi[:, :q].T @ poly)
        assert np.abs(resid).max() < 1e-10


def test_column_discretizes_eigenfunction():
    # column i > q approximates psi_{q,i}/sqrt(n)
    n, q = 256, 2
    b = build_basis(n, q)
    t = np.linspace(0, 1, n)
    for i in [4, 8, 16]:
        target = sobolev_eigenfunction(q, i, t) / np.sqrt(n)
        err = np.linalg.norm(b.phi[:, i - 1] - target) / np.sqrt(n)
        assert err < 0.05 / n  # L2 error well below O(n^{-3/2}) scale


def test_build_basis_rejects_bad_inputs():
    with pytest.raises(ValueError):
        build_basis(7, 2)  # n < 4q
    with pytest.raises(ValueError):
        build_basis(100, 7)
    with pytest.raises(ValueError):
        build_basis(100, 0)


def test_coefficients_unit_vector_and_isometry():
    b = build_basis(80, 2)
    e1 = np.zeros(80)
    e1[0] = 1.0
    np.testing.assert_allclose(coefficients(b, b.phi[:, 0]), e1, atol=1e-10)
    np.testing.assert_allclose(coefficients(b, np.zeros(80)), 0.0, atol=0)
    rng = np.random.default_rng(5)
    y = rng.standard_normal(80)
    assert abs(np.linalg.norm(coefficients(b, y)) - np.linalg.norm(y)) < 1e-8
    with pytest.raises(ValueError):
        coefficients(b, np.zeros(81))


def test_exact_mode_eigenvalues_improve_with_n():
    # relative agreement with the continuous eigenvalues over the lower half
    # of the spectrum improves as the grid grows (orders >= 2); the first
    # order is checked on a fixed low band where the classical bound applies
    for q in (2, 3):
        worst = []
        for n in (64, 128, 256):
            b = build_basis(n, q, exact=True)
            nu = np.array([sobolev_eigenvalue(q, i) for i in range(1, n + 1)])
            i = slice(q, n // 2)
            worst.append(np.abs(n * b.eta[i] / nu[i] - 1).max())
        assert worst[0] > worst[1] > worst[2], (q, worst)
    worst = []
    for n in (64, 128, 256):
        b = build_basis(n, 1, exact=True)
        nu = np.array([sobolev_eigenvalue(1, i) for i in range(1, n + 1)])
        i = slice(1, 16)
        worst.append(np.abs(n * b.eta[i] / nu[i] - 1).max())
    assert worst[0] > worst[1] > worst[2], worst


def test_exact_penalty_matches_known_integral():
    # f = sin(2 pi t): integral of (f'')^2 equals (2 pi)^4 / 2
    n = 200
    K = natural_spline_penalty(n, 2)
    t = np.linspace(0, 1, n)
    f = np.sin(2 * np.pi * t)
    np.testing.assert_allclose(f @ K @ f, (2 * np.pi) ** 4 / 2, rtol=1e-6)


def test_diagonalization_of_banded_toeplitz():
    # Phi' R Phi is nearly diagonal with the spectral density on the diagonal
    r = np.array([1.0, 0.45, 0.2, 0.1])
    offdiag, diagerr = [], []
    for n in (128, 256, 512):
        b = build_basis(n, 2)
        model = spectral_from_autocorr(r, n)
        full = np.zeros(n)
        full[: r.size] = r
        from scipy.linalg import toeplitz
        M = b.phi.T @ toeplitz(full) @ b.phi
        sub = M[2:, 2:]
        offdiag.append(np.abs(sub - np.diag(np.diag(sub))).max())
        t = np.linspace(0, 1, n)
        rho_true = 1 + 2 * (0.45 * np.cos(np.pi * t) + 0.2 * np.cos(2 * np.pi * t)
                            + 0.1 * np.cos(3 * np.pi * t))
        diagerr.append(np.abs(np.diag(sub) - rho_true[2:]).max())
    assert offdiag[0] > offdiag[1] > offdiag[2]
    assert offdiag[2] < 0.05
    assert diagerr[2] < 10.0 / 512


def test_nullspace_polynomial_orthonormal():
    x = np.linspace(0, 1, 10001)
    for j in range(4):
        np.testing.assert_allclose(
            np.trapezoid(nullspace_polynomial(j, x) ** 2, x), 1.0, rtol=1e-6)
