"""Level phase shifts and von Mises phase noise on the stored coherences."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bloch import LevelPhases
from .errors import ConfigError
from .medium import EnsembleState

ANALYTIC = "analytic"
MONTE_CARLO = "monte_carlo"

_SERIES_LIMIT = 15.0


def _bessel_scaled(order: int, x) -> np.ndarray:
    """``exp(-x) * I_order(x)`` for ``x >= 0`` (order 0 or 1)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x <= _SERIES_LIMIT
    if np.any(small):
        xs = x[small]
        q = 0.25 * xs * xs
        term = np.ones_like(xs) if order == 0 else 0.5 * xs
        total = term.copy()
        for m in range(1, 80):
            term = term * q / (m * (m + order))
            total += term
        out[small] = total * np.exp(-xs)
    big = ~small
    if np.any(big):
        xb = x[big]
        mu = 4.0 * order * order
        term = np.ones_like(xb)
        total = term.copy()
        for k in range(1, 40):
            nxt = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * xb)
            # asymptotic series: stop once terms stop shrinking
            keep = np.abs(nxt) < np.abs(term)
            if not np.any(keep):
                break
            term = np.where(keep, nxt, 0.0)
            total += term
        out[big] = total / np.sqrt(2.0 * math.pi * xb)
    return out


def bessel_i0e(x):
    return _bessel_scaled(0, x)


def bessel_i1e(x):
    return _bessel_scaled(1, x)


def bessel_i0(x):
    x = np.asarray(x, dtype=float)
    return bessel_i0e(x) * np.exp(x)


def bessel_i1(x):
    x = np.asarray(x, dtype=float)
    return bessel_i1e(x) * np.exp(x)


def _as_output(value, like):
    return float(value) if np.ndim(like) == 0 else value


def von_mises_pdf(phi, k):
    """Density ``exp(k cos(phi)) / (2 pi I0(k))`` on ``[-pi, pi]``."""
    if np.any(np.asarray(k) < 0):
        raise ValueError("von Mises inverse width must be >= 0")
    phi = np.asarray(phi, dtype=float)
    k = np.asarray(k, dtype=float)
    val = np.exp(k * (np.cos(phi) - 1.0)) / (2.0 * math.pi * bessel_i0e(k))
    return _as_output(val, phi if np.ndim(phi) else k)


def dephasing_factor(k):
    """First circular moment ``I1(k)/I0(k)`` of the von Mises law.

    Infinite ``k`` (no noise) gives exactly 1.
    """
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValueError("von Mises inverse width must be >= 0")
    finite = np.isfinite(k)
    kk = np.where(finite, k, 0.0)
    val = np.where(finite, bessel_i1e(kk) / bessel_i0e(kk), 1.0)
    return _as_output(val, k)


def _best_fisher(k: float, rng: np.random.Generator, n: int):
    """Cosines and sines of ``n`` von Mises angles (``0 < k <= 1e6``)."""
    if k < 1e-5:
        r = 1.0 / k + k
    else:
        tau = 1.0 + math.sqrt(1.0 + 4.0 * k * k)
        rho = (tau - math.sqrt(2.0 * tau)) / (2.0 * k)
        r = (1.0 + rho * rho) / (2.0 * rho)
    cos = np.empty(n)
    sin = np.empty(n)
    filled = 0
    while filled < n:
        m = int(1.2 * (n - filled)) + 8
        u1, u2, u3 = rng.random((3, m))
        z = np.cos(math.pi * u1)
        f = (1.0 + r * z) / (r + z)
        c = k * (r - f)
        with np.errstate(divide="ignore"):
            ok = (c * (2.0 - c) > u2) | (np.log(c / u2) + 1.0 - c >= 0.0)
        f = np.clip(f[ok], -1.0, 1.0)
        take = min(f.size, n - filled)
        f = f[:take]
        cos[filled:filled + take] = f
        sin[filled:filled + take] = np.copysign(np.sqrt(1.0 - f * f), u3[ok][:take] - 0.5)
        filled += take
    return cos, sin


def _unit_phasors(k: float, rng: np.random.Generator, n: int) -> np.ndarray:
    """``exp(i phi)`` for ``n`` von Mises angles."""
    if math.isinf(k):
        return np.ones(n, dtype=complex)
    if k == 0 or k > 1e6:
        return np.exp(1j * sample_von_mises(k, rng, n))
    cos, sin = _best_fisher(k, rng, n)
    return cos + 1j * sin


def sample_von_mises(k: float, rng: np.random.Generator, size=None):
    """Draw angles in ``[-pi, pi]`` with the Best-Fisher rejection sampler.

    ``k = 0`` is the uniform circle, ``k = inf`` returns zeros.  Beyond
    ``k = 1e6`` the rejection envelope loses precision and a wrapped normal
    of variance ``1/k`` is used instead.
    """
    if k < 0:
        raise ValueError("von Mises inverse width must be >= 0")
    n = 1 if size is None else int(np.prod(size))
    if math.isinf(k):
        out = np.zeros(n)
    elif k == 0:
        out = rng.uniform(-math.pi, math.pi, n)
    elif k > 1e6:
        out = np.angle(np.exp(1j * rng.normal(0.0, 1.0 / math.sqrt(k), n)))
    else:
        cos, sin = _best_fisher(k, rng, n)
        out = np.copysign(np.arccos(cos), sin)
    if size is None:
        return float(out[0])
    return out.reshape(size)


@dataclass(frozen=True)
class NoiseParams:
    """Inverse widths of the per-level phase noise.

    ``math.inf`` disables noise on that level.
    """

    k1: float = math.inf
    k2: float = math.inf
    k3: float = math.inf
    mode: str = ANALYTIC
    n_samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        for name in ("k1", "k2", "k3"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.mode not in (ANALYTIC, MONTE_CARLO):
            raise ConfigError(f"noise mode must be 'analytic' or 'monte_carlo', got {self.mode!r}")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def is_noiseless(self) -> bool:
        return all(math.isinf(k) for k in (self.k1, self.k2, self.k3))


def apply_level_phases(ensemble: EnsembleState, phases: LevelPhases) -> EnsembleState:
    """Imprint ``sigma_ij -> exp(i (phi_i - phi_j)) sigma_ij`` on every cell."""
    out = ensemble.copy()
    phi = phases.as_array()
    for mu in range(2):
        diff = phi[mu] - phi[2]
        if diff != 0.0:
            factor = complex(math.cos(diff), math.sin(diff))
            out.forward[mu] *= factor
            out.backward[mu] *= factor
    if out.sigma12 is not None and phi[0] != phi[1]:
        out.sigma12 *= np.exp(1j * (phi[0] - phi[1]))
    out.level_phases = out.level_phases + phi
    return out


def _cell_factors(params: NoiseParams, z_index: int, n_classes: int) -> np.ndarray:
    """Empirical means of ``exp(i(phi_1-phi_3))``, ``exp(i(phi_2-phi_3))``
    and ``exp(i(phi_1-phi_2))`` for each class at one depth node."""
    out = np.empty((3, n_classes), dtype=complex)
    ks = (params.k1, params.k2, params.k3)
    for n in range(n_classes):
        rng = np.random.default_rng([params.seed, z_index, n])
        rot = [_unit_phasors(k, rng, params.n_samples) for k in ks]
        out[0, n] = np.mean(rot[0] * np.conj(rot[2]))
        out[1, n] = np.mean(rot[1] * np.conj(rot[2]))
        out[2, n] = np.mean(rot[0] * np.conj(rot[1]))
    return out


def noise_factors(params: NoiseParams, n_z: int, n_classes: int, threads: int = 1) -> np.ndarray:
    """Multipliers for ``(sigma_13, sigma_23, sigma_12)``, shape ``(3, n_z, n_classes)``.

    Monte Carlo streams are keyed on ``(seed, z index, class index)`` so the
    result does not depend on ``threads``.
    """
    if params.mode == ANALYTIC:
        k1, k2, k3 = (dephasing_factor(k) for k in (params.k1, params.k2, params.k3))
        return np.broadcast_to(np.array([k1 * k3, k2 * k3, k1 * k2], dtype=complex)[:, None, None],
                               (3, n_z, n_classes))
    rows = range(n_z)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(lambda j: _cell_factors(params, j, n_classes), rows))
    else:
        cells = [_cell_factors(params, j, n_classes) for j in rows]
    return np.stack(cells, axis=1)


def apply_phase_noise(ensemble: EnsembleState, params: NoiseParams, threads: int = 1) -> EnsembleState:
    """Replace every stored coherence by its average over random level phases."""
    out = ensemble.copy()
    if params.is_noiseless:
        return out
    factors = noise_factors(params, ensemble.n_z, ensemble.grid.n_classes, threads)
    out.forward = out.forward * factors[:2]
    out.backward = out.backward * factors[:2]
    if out.sigma12 is not None:
        out.sigma12 = out.sigma12 * factors[2]
    return out
