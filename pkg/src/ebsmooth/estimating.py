"""Approximate estimating equations for the smoothing parameter, the penalty
order, and the noise spectral density, plus their solvers.

All three scores are evaluated in the basis where the smoother is diagonal,
so each costs O(n).  Terms with a zero penalty eigenvalue are excluded from
every sum (the 0*log(0) = 0 convention).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .dr_basis import DRBasis, coefficients
from .noise_model import DEFAULT_DELTA, SpectralModel, make_spectral_model
from .smoother import sigma2_estimate

#: relative tolerance of the bisection refinement in solve_lambda
ROOT_RTOL = 1e-6


@dataclass(frozen=True)
class ScorePoint:
    """Scores and the variance estimate at one (lambda, q, rho) triple."""

    lam: float
    q: int
    rho: SpectralModel
    t_lambda: float
    t_q: float
    sigma2hat: float


def scaling_factor(lam: float, q: int, n: int) -> float:
    """n_{lambda,q} = lambda^{-1/(2q)} + n * lambda^{1/(2q)}."""
    e = 1.0 / (2.0 * q)
    return lam**-e + n * lam**e


def t_lambda(lam: float, basis: DRBasis, rho: np.ndarray, B: np.ndarray) -> float:
    """Score for the smoothing parameter.

    Positive when the data demand less smoothing than ``lam`` applies,
    negative when they demand more; its root is the estimate.
    """
    q, n = basis.q, basis.n
    ln = lam * basis.n_eta[q:]
    w = 1.0 / (1.0 + ln * rho[q:])
    sig2 = sigma2_estimate(lam, basis, rho, B)
    val = np.sum(B[q:] ** 2 * ln * w * w) - sig2 * np.sum(w)
    return float(val / scaling_factor(lam, q, n))


def t_q(lam: float, basis: DRBasis, rho: np.ndarray, B: np.ndarray) -> float:
    """Score for the penalty order, with log(n*eta) weights."""
    q, n = basis.q, basis.n
    ln = lam * basis.n_eta[q:]
    w = 1.0 / (1.0 + ln * rho[q:])
    lg = np.log(basis.n_eta[q:])
    sig2 = sigma2_estimate(lam, basis, rho, B)
    val = np.sum(B[q:] ** 2 * ln * lg * w * w) - sig2 * np.sum(lg * w)
    # (log lambda)^2 scaling; guarded so a grid point at lambda == 1 stays finite
    scale = scaling_factor(lam, q, n) * max(np.log(lam) ** 2, 1e-12)
    return float(val / scale)


def score_point(lam: float, basis: DRBasis, spectral: SpectralModel,
                B: np.ndarray) -> ScorePoint:
    rho = np.asarray(spectral.rho)
    return ScorePoint(
        lam=lam,
        q=basis.q,
        rho=spectral,
        t_lambda=t_lambda(lam, basis, rho, B),
        t_q=t_q(lam, basis, rho, B),
        sigma2hat=sigma2_estimate(lam, basis, rho, B),
    )


def default_lambda_grid(n: int, points: int = 101, lam_min: float | None = None,
                        lam_max: float = 10.0) -> np.ndarray:
    """Geometric grid on [n^-3, 10] with 101 points unless overridden."""
    lo = n**-3.0 if lam_min is None else lam_min
    return np.geomspace(lo, lam_max, points)


def solve_lambda(basis: DRBasis, spectral: SpectralModel, B: np.ndarray,
                 grid: np.ndarray) -> tuple[float, bool]:
    """Root of t_lambda bracketed by its first sign change on ``grid``.

    The bracket is refined by bisection in log-lambda to relative tolerance
    ``ROOT_RTOL``.  When the score has no sign change on the grid the root
    lies outside it; the endpoint on the indicated side is returned together
    with a True flag (all-positive scores mean the root is below the grid,
    all-negative scores mean it is above).
    """
    rho = np.asarray(spectral.rho)
    vals = np.array([t_lambda(lam, basis, rho, B) for lam in grid])
    prod = vals[:-1] * vals[1:]
    idx = np.nonzero(prod <= 0)[0]
    if idx.size == 0:
        return (float(grid[0]), True) if vals[0] > 0 else (float(grid[-1]), True)
    k = int(idx[0])
    lo, hi = float(grid[k]), float(grid[k + 1])
    flo = float(vals[k])
    if flo == 0.0:
        return lo, False
    while hi / lo - 1.0 > ROOT_RTOL:
        mid = float(np.sqrt(lo * hi))
        fm = t_lambda(mid, basis, rho, B)
        if flo * fm <= 0:
            hi = mid
        else:
            lo, flo = mid, fm
    return float(np.sqrt(lo * hi)), False


def solve_q(tq_values: dict[int, float]) -> tuple[int, bool]:
    """Order selected from the per-order scores.

    The estimate is the smaller-|t| side of the first sign change in q; if
    the score stays negative the largest order is chosen, and if it stays
    positive the smallest order is chosen and the selection is flagged.
    """
    qs = sorted(tq_values)
    vals = [tq_values[q] for q in qs]
    for k in range(len(qs) - 1):
        if vals[k] == 0.0:
            return qs[k], False
        if vals[k] * vals[k + 1] < 0:
            return (qs[k], False) if abs(vals[k]) <= abs(vals[k + 1]) else (qs[k + 1], False)
    if vals[-1] == 0.0:
        return qs[-1], False
    if all(v < 0 for v in vals):
        return qs[-1], False
    return qs[0], True


def update_rho(lam: float, basis: DRBasis, rho_prev: SpectralModel,
               B: np.ndarray) -> np.ndarray:
    """Raw spectral values solving the per-coordinate score at ``lam``.

    Uses the plug-in eigenvalue estimator B_i^2/sigma2hat * ln_i/(1 + ln_i)
    with ln_i = lam*n*eta_i; the attenuation keeps signal-dominated
    low-frequency coordinates from leaking into the noise spectrum.  The
    previous iterate enters through the variance estimate only.  Null-space
    entries (i <= q) are returned as NaN and must be filled by the smoothing
    stage.
    """
    q, n = basis.q, basis.n
    sig2 = sigma2_estimate(lam, basis, np.asarray(rho_prev.rho), B)
    ln = lam * basis.n_eta[q:]
    raw = np.full(n, np.nan)
    raw[q:] = (B[q:] ** 2 / sig2) * (ln / (1.0 + ln))
    return raw


def smooth_rho(rho_raw: np.ndarray, basis_p: DRBasis,
               delta: float = DEFAULT_DELTA,
               grid: np.ndarray | None = None) -> SpectralModel:
    """Smooth raw spectral values into an admissible spectral model.

    The missing head is filled by constant extension of the first available
    value, the sequence is smoothed by an iid-working spline whose own
    parameter solves the score equation on this sequence, and the result is
    truncated to [delta, 1/delta] then scaled to sum to n.
    """
    rho_raw = np.asarray(rho_raw, dtype=float)
    n = rho_raw.size
    missing = np.isnan(rho_raw)
    if np.sum(~missing) < n / 2:
        raise ValueError("more than half of the raw spectral values are missing")
    filled = rho_raw.copy()
    if missing.any():
        first = filled[~missing][0]
        filled[missing] = first
    flat = make_spectral_model(np.ones(n), delta)
    B = coefficients(basis_p, filled)
    if grid is None:
        grid = default_lambda_grid(n)
    xi, _ = solve_lambda(basis_p, flat, B, grid)
    w = 1.0 / (1.0 + xi * basis_p.n_eta)
    w[: basis_p.q] = 1.0
    smoothed = basis_p.phi @ (w * B)
    return make_spectral_model(smoothed, delta)


def exact_t_lambda(lam: float, basis: DRBasis, y: np.ndarray,
                   R: np.ndarray) -> float:
    """Dense-matrix version of the lambda score, for validation only
    (n <= 512): [Y' R^{-1}(I-S) S Y - sigma2hat (tr S - q)] / n_{lambda,q}.
    """
    n, q = basis.n, basis.q
    if n > 512:
        raise ValueError("exact score limited to n <= 512")
    cR = cho_factor(np.asarray(R, dtype=float))
    RiP = cho_solve(cR, basis.phi)
    A = basis.phi.T @ RiP + lam * np.diag(basis.n_eta)
    cA = cho_factor(0.5 * (A + A.T))
    Riy = cho_solve(cR, y)
    Sy = basis.phi @ cho_solve(cA, basis.phi.T @ Riy)
    RiSy = cho_solve(cR, Sy)
    quad = float(y @ RiSy - Sy @ RiSy)
    trS = float(np.trace(cho_solve(cA, basis.phi.T @ RiP)))
    sigma2 = (float(y @ Riy - y @ RiSy) + 1.0) / (n + 1.0)
    return (quad - sigma2 * (trS - q)) / scaling_factor(lam, q, n)
