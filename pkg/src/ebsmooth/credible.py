"""Empirical posterior sampling and credible sets for the fitted curve.

The posterior for the curve given the plugged-in estimates is a multivariate
t with n+1 degrees of freedom centred at the fit, with scale sigma2hat times
the (symmetrized) product of the smoother and the estimated correlation
matrix.  Credible sets are L2-balls holding a 1-alpha fraction of posterior
draws, reported through their radius and the pointwise envelopes of the
retained draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .dr_basis import build_basis
from .driver import FitResult
from .smoother import shrink_weights


@dataclass(frozen=True)
class CredibleSet:
    alpha: float
    L: float
    radius: float
    s_n: float
    draws: np.ndarray          # retained draws, one curve per row
    band_lo: np.ndarray
    band_hi: np.ndarray


def _scale_eigensystem(fit: FitResult) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of sym(S R), the posterior scale up to sigma2hat.

    S R is not symmetric; it is symmetrized and small negative eigenvalues
    are clipped at zero.  Eigenvalues below -1e-8 signal a broken input.
    """
    n = fit.n
    basis = build_basis(n, fit.q_hat)
    w = shrink_weights(fit.lambda_hat, basis, np.asarray(fit.rho_hat.rho))
    R = toeplitz(fit.r_hat)
    SR = (basis.phi * w) @ (basis.phi.T @ R)
    M = 0.5 * (SR + SR.T)
    eig, vec = np.linalg.eigh(M)
    if eig.min() < -1e-8 * max(eig.max(), 1.0):
        raise ValueError("posterior scale matrix has substantially negative "
                         f"eigenvalues (min {eig.min():.3e})")
    return np.clip(eig, 0.0, None), vec


def sample_posterior(fit: FitResult, num_draws: int, seed: int) -> np.ndarray:
    """Draws from the empirical posterior of the curve (rows = curves)."""
    if num_draws < 100:
        raise ValueError("need at least 100 draws")
    eig, vec = _scale_eigensystem(fit)
    n = fit.n
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((num_draws, n))
    u = rng.chisquare(n + 1, size=num_draws)
    scale = np.sqrt(fit.sigma2hat) * np.sqrt((n + 1.0) / u)
    return fit.fhat + (z * np.sqrt(eig)) @ vec.T * scale[:, None]


def radius_quantile(fit: FitResult, alpha: float, num_draws: int,
                    seed: int) -> float:
    """(1-alpha) quantile s_n of the squared posterior deviation divided by
    sigma2hat.

    Uses the distributional identity: the squared norm of a posterior
    deviation equals sigma2hat * (n+1) * Z' M Z / U with M = sym(S R),
    Z standard normal and U chi-square with n+1 degrees of freedom.
    """
    if num_draws < 100:
        raise ValueError("need at least 100 draws")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    eig, _ = _scale_eigensystem(fit)
    n = fit.n
    rng = np.random.default_rng(seed)
    z2 = rng.standard_normal((num_draws, n)) ** 2
    u = rng.chisquare(n + 1, size=num_draws)
    vals = (n + 1.0) * (z2 @ eig) / u
    return float(np.quantile(vals, 1.0 - alpha, method="inverted_cdf"))


def credible_set(fit: FitResult, alpha: float = 0.05, L: float = 1.0,
                 num_draws: int = 20000, seed: int = 0) -> CredibleSet:
    """Posterior draws trimmed to the 1-alpha fraction closest to the fit.

    The reported radius is L * sigma2hat * s_n where s_n is the empirical
    quantile of the same draws, so every retained draw lies inside the ball
    for any L >= 1.
    """
    if L < 1.0:
        raise ValueError("multiplier L must be at least 1")
    draws = sample_posterior(fit, num_draws, seed)
    d2 = np.sum((draws - fit.fhat) ** 2, axis=1)
    keep = int(np.ceil((1.0 - alpha) * num_draws))
    order = np.argsort(d2, kind="stable")
    retained = draws[order[:keep]]
    s_n = float(d2[order[keep - 1]] / fit.sigma2hat)
    return CredibleSet(
        alpha=alpha,
        L=L,
        radius=L * fit.sigma2hat * s_n,
        s_n=s_n,
        draws=retained,
        band_lo=retained.min(axis=0),
        band_hi=retained.max(axis=0),
    )
