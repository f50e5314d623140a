"""Stationary correlation structures: spectral densities, autocorrelations,
and reproducible Gaussian noise generation.

A correlation structure is represented on the fit grid by its spectral
density values rho_i = rho(pi * t_i), constrained to the box [delta, 1/delta]
and normalized to sum to n.  Autocorrelations and spectral values are
connected by cosine transforms on the same grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct, fft, ifft
from scipy.linalg import toeplitz

DEFAULT_DELTA = 0.05

NOISE_KINDS = ("iid", "ar1", "ma1", "arma22", "gp_kernel")

_DENSE_SAMPLING_MAX_N = 2048


def _cosine_sum(a: np.ndarray) -> np.ndarray:
    """S_k = sum_j a_j cos(pi*k*j/(N-1)) for k = 0..N-1, via a type-I DCT."""
    return 0.5 * (dct(a, type=1) + a[0] + (-1.0) ** np.arange(a.size) * a[-1])


@dataclass(frozen=True)
class SpectralModel:
    """Spectral density values on the grid plus derived autocorrelations.

    ``rho[i]`` is the density at frequency pi*t_i, clipped to
    [delta, 1/delta] with sum(rho) == n; ``r`` holds the implied
    autocorrelations at lags 0..n-1 (r[0] == 1).
    """

    rho: np.ndarray
    r: np.ndarray
    delta: float

    @property
    def n(self) -> int:
        return self.rho.size


def _clip_normalize(values: np.ndarray, n: int, delta: float) -> np.ndarray:
    """Alternate box-clipping and sum-normalization until both hold."""
    v = np.asarray(values, dtype=float).copy()
    for _ in range(200):
        v = np.clip(v, delta, 1.0 / delta)
        s = v.sum()
        if abs(s - n) <= 1e-10 * n:
            break
        v *= n / s
    v = np.clip(v, delta, 1.0 / delta)
    v *= n / v.sum()
    return v


def make_spectral_model(values: np.ndarray, delta: float = DEFAULT_DELTA) -> SpectralModel:
    """Project raw density values onto the admissible set and attach the
    autocorrelations recovered by the cosine quadrature."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    rho = _clip_normalize(values, n, delta)
    r = _cosine_sum(rho) / n
    rho.setflags(write=False)
    r.setflags(write=False)
    return SpectralModel(rho=rho, r=r, delta=delta)


def flat_spectral_model(n: int, delta: float = DEFAULT_DELTA) -> SpectralModel:
    """White-noise model, rho identically one."""
    return make_spectral_model(np.ones(n), delta)


def spectral_from_autocorr(r, n: int, delta: float = DEFAULT_DELTA) -> SpectralModel:
    """Spectral values rho_i = 1 + 2 sum_k r_k cos(k*pi*t_i) from lags r.

    The lag-0 entry of ``r`` must be 1.  Raises if more than 10% of the raw
    values are negative, which indicates a non-positive-definite input.
    """
    r = np.asarray(r, dtype=float)
    if abs(r[0] - 1.0) > 1e-8:
        raise ValueError("autocorrelation must have r[0] == 1")
    a = np.zeros(n)
    m = min(r.size, n)
    a[:m] = 2.0 * r[:m]
    a[0] = 1.0
    raw = _cosine_sum(a)
    if np.mean(raw < 0) > 0.10:
        raise ValueError("spectral values negative on more than 10% of the grid; "
                         "input autocorrelation looks non-positive-definite")
    return make_spectral_model(raw, delta)


def autocorr_from_spectral(model: SpectralModel) -> np.ndarray:
    """Autocorrelations r_k = n^{-1} sum_l cos(k*pi*(l-1)/(n-1)) rho_l."""
    return _cosine_sum(np.asarray(model.rho)) / model.n


@dataclass(frozen=True)
class NoiseSpec:
    """Description of a stationary Gaussian noise process.

    kind: one of iid | ar1 | ma1 | arma22 | gp_kernel.
    params: (phi,) for ar1, (theta,) for ma1, (phi1, phi2, theta1, theta2)
        for arma22, (frequency, decay) for gp_kernel (defaults 6.5, 20).
    sigma: marginal standard deviation.
    """

    kind: str
    params: tuple = ()
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind == "ar1":
            (phi,) = self.params
            if abs(phi) >= 1:
                raise ValueError("ar1 coefficient must satisfy |phi| < 1")
        elif self.kind == "ma1":
            (theta,) = self.params
            if abs(theta) >= 1:
                raise ValueError("ma1 coefficient must satisfy |theta| < 1 (invertibility)")
        elif self.kind == "arma22":
            phi1, phi2, theta1, theta2 = self.params
            if np.any(np.abs(np.roots([-phi2, -phi1, 1.0])) <= 1.0):
                raise ValueError("arma22 autoregressive polynomial is not causal")
            if np.any(np.abs(np.roots([theta2, theta1, 1.0])) <= 1.0):
                raise ValueError("arma22 moving-average polynomial is not invertible")
        elif self.kind == "gp_kernel" and not self.params:
            object.__setattr__(self, "params", (6.5, 20.0))

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": list(self.params), "sigma": self.sigma}

    @classmethod
    def from_json(cls, obj: dict) -> "NoiseSpec":
        return cls(kind=obj["kind"], params=tuple(obj.get("params", ())),
                   sigma=float(obj.get("sigma", 1.0)))


@lru_cache(maxsize=64)
def _arma_autocorr(phi: tuple, theta: tuple, nlags: int) -> np.ndarray:
    """ARMA autocorrelations by inverse FFT of the spectral density."""
    m = 1 << 14
    w = 2.0 * np.pi * np.arange(m) / m
    e = np.exp(1j * w)
    num = np.ones(m, dtype=complex)
    for k, th in enumerate(theta, start=1):
        num += th * e**k
    den = np.ones(m, dtype=complex)
    for k, ph in enumerate(phi, start=1):
        den -= ph * e**k
    psd = np.abs(num) ** 2 / np.abs(den) ** 2
    gamma = np.real(ifft(psd))
    r = gamma[:nlags] / gamma[0]
    r.setflags(write=False)
    return r


def _psd_project_toeplitz(r: np.ndarray, delta: float) -> tuple[np.ndarray, bool]:
    """Clip negative circulant-embedding eigenvalues at delta.

    Returns the (possibly unchanged) lag sequence and whether any clipping
    happened.  For a sequence that is already positive definite this is the
    identity.
    """
    n = r.size
    c = np.concatenate([r, r[-2:0:-1]])
    eigs = np.real(fft(c))
    if eigs.min() >= 0.0:
        return r, False
    eigs = np.where(eigs < 0.0, delta, eigs)
    c_new = np.real(ifft(eigs))
    r_new = c_new[:n]
    r_new = r_new / r_new[0]
    return r_new, True


def true_autocorr(spec: NoiseSpec, n: int, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """Exact autocorrelation sequence of the process at lags 0..n-1."""
    if spec.kind == "iid":
        r = np.zeros(n)
        r[0] = 1.0
    elif spec.kind == "ar1":
        (phi,) = spec.params
        r = phi ** np.arange(n)
    elif spec.kind == "ma1":
        (theta,) = spec.params
        r = np.zeros(n)
        r[0] = 1.0
        r[1] = theta / (1.0 + theta**2)
    elif spec.kind == "arma22":
        phi1, phi2, theta1, theta2 = spec.params
        r = np.array(_arma_autocorr((phi1, phi2), (theta1, theta2), n))
    elif spec.kind == "gp_kernel":
        freq, decay = spec.params
        k = np.arange(n)
        r = np.cos(freq * k) * np.exp(-k / decay)
        r, _ = _psd_project_toeplitz(r, delta)
    else:  # pragma: no cover
        raise ValueError(spec.kind)
    return r


def true_spectral(spec: NoiseSpec, n: int, delta: float = DEFAULT_DELTA) -> SpectralModel:
    """Exact spectral density of the process evaluated on the fit grid."""
    x = np.pi * np.linspace(0.0, 1.0, n)
    if spec.kind == "iid":
        raw = np.ones(n)
    elif spec.kind == "ar1":
        (phi,) = spec.params
        raw = (1.0 - phi**2) / (1.0 + phi**2 - 2.0 * phi * np.cos(x))
    elif spec.kind == "ma1":
        (theta,) = spec.params
        raw = (1.0 + theta**2 + 2.0 * theta * np.cos(x)) / (1.0 + theta**2)
    elif spec.kind == "arma22":
        phi1, phi2, theta1, theta2 = spec.params
        e = np.exp(1j * x)
        num = np.abs(1.0 + theta1 * e + theta2 * e**2) ** 2
        den = np.abs(1.0 - phi1 * e - phi2 * e**2) ** 2
        # normalize by the process variance (mean of the density on the circle)
        m = 1 << 12
        wc = np.exp(1j * 2.0 * np.pi * np.arange(m) / m)
        gamma0 = np.mean(np.abs(1.0 + theta1 * wc + theta2 * wc**2) ** 2
                         / np.abs(1.0 - phi1 * wc - phi2 * wc**2) ** 2)
        raw = num / den / gamma0
    elif spec.kind == "gp_kernel":
        freq, decay = spec.params
        rr = np.exp(-1.0 / decay)
        def pk(u):
            return (1.0 - rr**2) / (1.0 + rr**2 - 2.0 * rr * np.cos(u))
        raw = 0.5 * (pk(x - freq) + pk(x + freq))
    else:  # pragma: no cover
        raise ValueError(spec.kind)
    return make_spectral_model(raw, delta)


@lru_cache(maxsize=16)
def _dense_factor(kind: str, params: tuple, n: int, delta: float) -> np.ndarray:
    r = true_autocorr(NoiseSpec(kind=kind, params=params, sigma=1.0), n, delta)
    R = toeplitz(r)
    eig, vec = np.linalg.eigh(R)
    if eig.min() < -1e-8 * eig.max():
        raise ValueError(f"correlation matrix for {kind}{params} is not PSD after projection")
    A = vec * np.sqrt(np.clip(eig, 0.0, None))
    A.setflags(write=False)
    return A


def target_correlation(spec: NoiseSpec, n: int, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """The dense correlation matrix the sampler realizes (after projection)."""
    A = _dense_factor(spec.kind, spec.params, n, delta)
    return A @ A.T


def simulate_noise(spec: NoiseSpec, n: int, seed: int,
                   delta: float = DEFAULT_DELTA) -> np.ndarray:
    """One mean-zero stationary Gaussian draw with unit marginal variance,
    scaled by ``spec.sigma``.  Deterministic given ``seed``."""
    rng = np.random.default_rng(seed)
    if n <= _DENSE_SAMPLING_MAX_N:
        A = _dense_factor(spec.kind, spec.params, n, delta)
        draw = A @ rng.standard_normal(n)
    else:
        draw = _circulant_draw(spec, n, rng, delta)
    return spec.sigma * draw


def _circulant_draw(spec: NoiseSpec, n: int, rng: np.random.Generator,
                    delta: float) -> np.ndarray:
    m = 1 << int(np.ceil(np.log2(2 * n - 2)))
    r_ext = true_autocorr(spec, m // 2 + 1, delta)
    c = np.concatenate([r_ext, r_ext[-2:0:-1]])
    eigs = np.clip(np.real(fft(c)), 0.0, None)
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    y = np.real(fft(z * np.sqrt(eigs))) / np.sqrt(2.0 * m)
    return y[:n]
