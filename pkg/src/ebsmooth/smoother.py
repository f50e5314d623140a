"""Spline smoothing under a working correlation.

Two routes: a fast one that is diagonal in the basis (shrinkage weights
1/(1 + lambda*n*eta_i*rho_i)) and an exact dense one that solves the
generalized penalized least-squares system for a full correlation matrix.
The dense route exists for validation; everything in the iteration uses the
diagonal form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .dr_basis import DRBasis, coefficients
from .noise_model import SpectralModel

_DENSE_MAX_N = 2048


@dataclass(frozen=True)
class SmootherSpec:
    """Smoothing parameter, penalty order, and working correlation."""

    lam: float
    q: int
    spectral: SpectralModel

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")


@dataclass(frozen=True)
class SmoothFit:
    fhat: np.ndarray
    coeffs: np.ndarray
    shrink: np.ndarray
    sigma2hat: float
    edf: float


def shrink_weights(lam: float, basis: DRBasis, rho: np.ndarray) -> np.ndarray:
    """w_i = 1/(1 + lambda * n*eta_i * rho_i); exactly 1 on the null space."""
    w = 1.0 / (1.0 + lam * basis.n_eta * rho)
    w[: basis.q] = 1.0
    return w


def sigma2_estimate(lam: float, basis: DRBasis, rho: np.ndarray,
                    B: np.ndarray) -> float:
    """Posterior-mean noise variance in the diagonal approximation:
    (sum_{i>q} B_i^2 * lam*n*eta_i / (1 + lam*n*eta_i*rho_i) + 1) / (n + 1).
    """
    q, n = basis.q, basis.n
    ln = lam * basis.n_eta[q:]
    quad = np.sum(B[q:] ** 2 * ln / (1.0 + ln * rho[q:]))
    return (quad + 1.0) / (n + 1.0)


def apply_fast(spec: SmootherSpec, y: np.ndarray, basis: DRBasis) -> SmoothFit:
    """Diagonal smoother: fhat = Phi diag(w) Phi^T y."""
    if basis.q != spec.q:
        raise ValueError("basis order does not match the smoother order")
    rho = np.asarray(spec.spectral.rho)
    if rho.size != basis.n:
        raise ValueError("spectral model size does not match the basis")
    B = coefficients(basis, y)
    w = shrink_weights(spec.lam, basis, rho)
    fhat = basis.phi @ (w * B)
    return SmoothFit(
        fhat=fhat,
        coeffs=B,
        shrink=w,
        sigma2hat=sigma2_estimate(spec.lam, basis, rho, B),
        edf=float(np.sum(w)),
    )


def apply_exact(spec: SmootherSpec, y: np.ndarray, basis: DRBasis,
                R: np.ndarray) -> SmoothFit:
    """Dense smoother S = Phi (Phi^T R^{-1} Phi + lam diag(n eta))^{-1} Phi^T R^{-1}.

    Requires a symmetric positive definite correlation matrix; limited to
    n <= 2048.
    """
    n, q = basis.n, basis.q
    if n > _DENSE_MAX_N:
        raise ValueError(f"dense smoother limited to n <= {_DENSE_MAX_N}")
    y = np.asarray(y, dtype=float)
    R = np.asarray(R, dtype=float)
    if R.shape != (n, n):
        raise ValueError("correlation matrix has wrong shape")
    try:
        cR = cho_factor(R)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - scipy raises its own
        raise ValueError("correlation matrix is not positive definite") from exc
    except Exception as exc:
        raise ValueError("correlation matrix is not positive definite") from exc
    Riy = cho_solve(cR, y)
    RiP = cho_solve(cR, basis.phi)
    A = basis.phi.T @ RiP + spec.lam * np.diag(basis.n_eta)
    A = 0.5 * (A + A.T)
    try:
        cA = cho_factor(A)
    except Exception as exc:
        raise ValueError("penalized system could not be factorized") from exc
    coef = cho_solve(cA, basis.phi.T @ Riy)
    fhat = basis.phi @ coef
    quad = float(y @ Riy - y @ cho_solve(cR, fhat))
    sigma2 = (quad + 1.0) / (n + 1.0)
    edf = float(np.trace(cho_solve(cA, basis.phi.T @ RiP)))
    w = shrink_weights(spec.lam, basis, np.asarray(spec.spectral.rho))
    B = coefficients(basis, y)
    return SmoothFit(fhat=fhat, coeffs=B, shrink=w, sigma2hat=sigma2, edf=edf)


def log_marginal(spec: SmootherSpec, y: np.ndarray, basis: DRBasis) -> float:
    """Marginal log-likelihood of (lambda, q, rho) in the diagonal
    approximation, up to an additive constant:

        -(n+1)/2 * log(sum_{i>q} B_i^2 lam*n*eta_i w_i + 1)
        + 1/2 * sum_{i>q} log(lam*n*eta_i w_i).
    """
    q, n = basis.q, basis.n
    rho = np.asarray(spec.spectral.rho)
    B = coefficients(basis, y)
    ln = spec.lam * basis.n_eta[q:]
    w = 1.0 / (1.0 + ln * rho[q:])
    quad = np.sum(B[q:] ** 2 * ln * w)
    return float(-(n + 1.0) / 2.0 * np.log(quad + 1.0) + 0.5 * np.sum(np.log(ln * w)))
