"""Unit system, inhomogeneous broadening grid and ensemble state container.

All quantities are dimensionless.  Time is measured in units of the input
pulse duration ``T0`` (the pulse intensity falls to ``1/e`` at ``t_c ± T0``),
frequencies in ``1/T0`` and the longitudinal coordinate is the cumulative
optical depth ``u = alpha * z`` running from 0 to ``alpha * L``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError

WEAK = "weak"
FULL = "full"
MODES = (WEAK, FULL)

#: Spectral half-width of a unit-duration Gaussian pulse (intensity 1/e point).
PULSE_SPECTRAL_HALF_WIDTH = 1.0


@dataclass(frozen=True)
class UnitConvention:
    """Dimensionless units shared by every module.

    Only the optical depth is free; the time unit is fixed to the pulse
    duration so one configuration fully determines a run.
    """

    optical_depth: float
    time_unit: str = "T0"
    frequency_unit: str = "1/T0"

    def __post_init__(self):
        if not self.optical_depth > 0:
            raise ConfigError(f"optical depth must be > 0, got {self.optical_depth}")


@dataclass(frozen=True)
class InhomogeneousProfile:
    """Normalized, even inhomogeneous line shape ``G(Delta)``."""

    half_width: float
    shape: str = "rectangular"

    def __post_init__(self):
        if self.shape != "rectangular":
            raise ConfigError(f"unsupported profile shape {self.shape!r}")
        if not self.half_width > 0:
            raise ConfigError(f"half_width must be > 0, got {self.half_width}")

    def density(self, delta):
        delta = np.asarray(delta, dtype=float)
        inside = np.abs(delta) <= self.half_width
        return np.where(inside, 0.5 / self.half_width, 0.0)

    @property
    def peak_density(self) -> float:
        """``G(0)``."""
        return 0.5 / self.half_width

    def check_bandwidth(self, pulse_half_width: float = PULSE_SPECTRAL_HALF_WIDTH) -> bool:
        """Warn when the line is narrower than ten pulse bandwidths."""
        ok = self.half_width >= 10.0 * pulse_half_width
        if not ok:
            warnings.warn(
                f"broadening half-width {self.half_width} is below 10x the pulse "
                f"spectral half-width {pulse_half_width}; absorption will be incomplete",
                stacklevel=2,
            )
        return ok


@dataclass(frozen=True, eq=False)
class DetuningGrid:
    """Equidistant frequency classes with trapezoid quadrature weights."""

    profile: InhomogeneousProfile
    detunings: np.ndarray
    weights: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.detunings.size

    @property
    def spacing(self) -> float:
        return float(self.detunings[1] - self.detunings[0])

    @property
    def revival_time(self) -> float:
        """Period after which the discrete comb rephases spuriously."""
        return 2.0 * math.pi / self.spacing


def build_detuning_grid(
    profile: InhomogeneousProfile, n_classes: int, window: float | None = None
) -> DetuningGrid:
    """Discretize ``profile`` into ``n_classes`` equidistant frequency classes.

    Parameters
    ----------
    profile : InhomogeneousProfile
        Line shape to discretize.
    n_classes : int
        Odd number of classes (at least 3) so that ``Delta = 0`` is a node.
    window : float, optional
        Total simulated time span.  When given, the comb revival time
        ``2*pi/spacing`` must exceed it.

    Returns
    -------
    DetuningGrid
        Detunings spanning ``[-Gamma, Gamma]`` and weights summing to one.
    """
    if n_classes < 3 or n_classes % 2 == 0:
        raise ConfigError(f"n_classes must be odd and >= 3, got {n_classes}")
    gamma = profile.half_width
    # gamma * (k/m) is exactly sign-symmetric and hits +-gamma exactly
    m = (n_classes - 1) // 2
    detunings = gamma * (np.arange(-m, m + 1) / m)
    detunings[m] = 0.0
    step = gamma / m
    weights = profile.density(detunings) * step
    weights[0] *= 0.5
    weights[-1] *= 0.5
    weights = weights / weights.sum()
    grid = DetuningGrid(profile, detunings, weights)
    if window is not None and not grid.revival_time > window:
        needed = int(math.ceil(gamma * window / math.pi)) + 1
        needed += 1 - needed % 2
        raise ConfigError(
            f"comb revival time {grid.revival_time:.4g} does not exceed the simulated "
            f"window {window:.4g}; use n_classes >= {needed}"
        )
    return grid


@dataclass(eq=False)
class EnsembleState:
    """Atomic variables for every (z node, frequency class).

    ``forward`` and ``backward`` hold the slowly varying coherence envelopes
    with shape ``(2, n_z, n_classes)``; index 0 is ``sigma_13`` and index 1
    is ``sigma_23``.  In full mode ``populations`` (``sigma_11``,
    ``sigma_22``, ``sigma_33``) and ``sigma12`` are tracked explicitly;
    in weak mode they are implicitly ``(0, 0, 1)`` and 0.
    """

    z: np.ndarray
    grid: DetuningGrid
    mode: str
    forward: np.ndarray
    backward: np.ndarray
    populations: np.ndarray | None = None
    sigma12: np.ndarray | None = None
    detuning_sign: int = 1
    phase_matched: bool = False
    level_phases: np.ndarray = field(default_factory=lambda: np.zeros(3))
    #: running maxima of sigma_11, sigma_22, |sigma_12| and |trace - 1| (full mode)
    peaks: np.ndarray = field(default_factory=lambda: np.zeros(4))

    @property
    def n_z(self) -> int:
        return self.z.size

    @property
    def detunings(self) -> np.ndarray:
        """Detunings currently governing the free evolution."""
        return self.detuning_sign * self.grid.detunings

    def coherences(self, direction: str) -> np.ndarray:
        return self.backward if direction == "backward" else self.forward

    def copy(self) -> "EnsembleState":
        return replace(
            self,
            forward=self.forward.copy(),
            backward=self.backward.copy(),
            populations=None if self.populations is None else self.populations.copy(),
            sigma12=None if self.sigma12 is None else self.sigma12.copy(),
            level_phases=self.level_phases.copy(),
            peaks=self.peaks.copy(),
        )

    def trace(self) -> np.ndarray:
        if self.populations is None:
            return np.ones((self.n_z, self.grid.n_classes))
        return self.populations.sum(axis=0)


def init_ground_state(n_z: int, grid: DetuningGrid, mode: str = WEAK,
                      optical_depth: float = 1.0) -> EnsembleState:
    """All atoms in the ground level ``|3>`` on ``n_z`` equidistant depth nodes."""
    if n_z < 2:
        raise ConfigError(f"n_z must be >= 2, got {n_z}")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    shape = (n_z, grid.n_classes)
    state = EnsembleState(
        z=np.linspace(0.0, optical_depth, n_z),
        grid=grid,
        mode=mode,
        forward=np.zeros((2,) + shape, dtype=complex),
        backward=np.zeros((2,) + shape, dtype=complex),
    )
    if mode == FULL:
        state.populations = np.zeros((3,) + shape)
        state.populations[2] = 1.0
        state.sigma12 = np.zeros(shape, dtype=complex)
    return state


@dataclass(frozen=True)
class QubitState:
    """Polarization qubit ``c_L |L> + c_R |R>``.

    The ``L`` amplitude travels on the 1-3 transition and ``R`` on 2-3.
    """

    c_L: complex
    c_R: complex

    @classmethod
    def from_split(cls, s_L: float, s_R: float, theta: float = 0.0) -> "QubitState":
        return cls(complex(math.sqrt(s_L)), math.sqrt(s_R) * complex(math.cos(theta), math.sin(theta)))

    @property
    def norm(self) -> float:
        return abs(self.c_L) ** 2 + abs(self.c_R) ** 2

    def normalized(self) -> "QubitState":
        n = math.sqrt(self.norm)
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return QubitState(self.c_L / n, self.c_R / n)

    def as_array(self) -> np.ndarray:
        return np.array([self.c_L, self.c_R], dtype=complex)
