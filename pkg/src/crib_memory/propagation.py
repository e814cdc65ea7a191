"""Field propagation through the ensemble and the CRIB protocol stages.

In the frame co-moving with the pulse the field obeys, along its own
propagation direction ``s``::

    dOmega/ds = -i * c * sum_n w_n sigma_n(t)

with ``s`` measured in optical depth and ``c = 1 / J(0) = 1 / (2 pi G(0))``
so that a weak pulse loses intensity as ``exp(-s)``.  The depth sweep
alternates between integrating every frequency class over the full time
window at the current node and advancing the field to the next node with
Heun's predictor-corrector.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bloch import FullPropagator, WeakPropagator
from .errors import ConfigError, NumericalError, ProtocolError
from .medium import FULL, DetuningGrid, EnsembleState

FORWARD = "forward"
BACKWARD = "backward"
DIRECTIONS = (FORWARD, BACKWARD)


@dataclass(frozen=True)
class PulseSpec:
    """Gaussian input pulse ``sqrt(s_mu) * peak * exp(-(t - t_c)**2 / 2)``.

    ``theta`` is the relative phase carried by the 2-3 (``R``) component.
    """

    peak: float = 1e-3
    center: float = -10.0
    s_L: float = 0.5
    s_R: float = 0.5
    theta: float = 0.0
    shape: str = "gaussian"

    def __post_init__(self):
        if self.shape != "gaussian":
            raise ConfigError(f"unsupported pulse shape {self.shape!r}")
        if not self.peak > 0:
            raise ConfigError(f"peak Rabi frequency must be > 0, got {self.peak}")
        if not (0.0 <= self.s_L <= 1.0 and 0.0 <= self.s_R <= 1.0):
            raise ConfigError("intensity split components must lie in [0, 1]")
        if abs(self.s_L + self.s_R - 1.0) > 1e-12:
            raise ConfigError(f"intensity split must sum to 1, got {self.s_L + self.s_R}")

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([math.sqrt(self.s_L),
                         math.sqrt(self.s_R) * complex(math.cos(self.theta), math.sin(self.theta))])

    def envelope(self, t) -> np.ndarray:
        """Field envelopes of both transitions, shape ``(2, len(t))``."""
        t = np.asarray(t, dtype=float)
        profile = self.peak * np.exp(-0.5 * (t - self.center) ** 2)
        return self.amplitudes[:, None] * profile[None, :]


@dataclass(eq=False)
class StageRecord:
    """Field envelopes on the full (z, t) grid for one protocol stage.

    ``omega`` has shape ``(2, n_z, n_t)`` and is stored in increasing-z
    order regardless of the propagation direction.
    """

    stage: str
    direction: str
    t: np.ndarray
    z: np.ndarray
    omega: np.ndarray
    reference_intensity: float
    notes: list = field(default_factory=list)
    final_state: EnsembleState | None = None

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def entry_series(self) -> np.ndarray:
        return self.omega[:, 0 if self.direction == FORWARD else -1]

    @property
    def exit_series(self) -> np.ndarray:
        return self.omega[:, -1 if self.direction == FORWARD else 0]

    @property
    def z0_series(self) -> np.ndarray:
        return self.omega[:, 0]

    @property
    def zL_series(self) -> np.ndarray:
        return self.omega[:, -1]

    def energy_profile(self) -> np.ndarray:
        """Time-integrated ``|Omega|^2`` per channel and node, shape ``(2, n_z)``."""
        return np.sum(np.abs(self.omega) ** 2, axis=-1) * self.dt


def coupling_prefactor(grid: DetuningGrid) -> float:
    """Source prefactor per unit optical depth, ``1 / J(0)``."""
    return 1.0 / (2.0 * math.pi * grid.profile.peak_density)


def field_source(coherences, grid: DetuningGrid, prefactor: float, direction: str = FORWARD):
    """z-derivative of the field envelopes produced by a coherence slice.

    ``coherences`` has the class index last.  The quadrature over the
    inhomogeneous line is the weighted class sum; a forward field gains
    ``-i * prefactor * P`` per unit depth, a backward field (travelling
    towards decreasing z) gains ``+i * prefactor * P``.
    """
    coherences = np.asarray(coherences)
    if coherences.shape[-1] != grid.n_classes:
        raise ValueError("coherence slice does not match the detuning grid")
    pol = coherences @ grid.weights
    sign = -1.0 if direction == FORWARD else 1.0
    return sign * 1j * prefactor * pol


def _node_order(n_z: int, direction: str) -> np.ndarray:
    idx = np.arange(n_z)
    return idx if direction == FORWARD else idx[::-1]


def _sweep(solve, launch, states, du, prefactor, direction):
    """Heun depth sweep along the propagation direction.

    ``states`` are the per-node initial atomic states in propagation order.
    Returns the field at every node and the atomic states at the end of the
    window, both in propagation order.
    """
    n_z = len(states)
    fields = np.empty((n_z,) + launch.shape, dtype=complex)
    ends = [None] * n_z
    fields[0] = launch
    pol, ends[0] = solve(launch, states[0])
    for j in range(n_z - 1):
        try:
            src = -1j * prefactor * pol
            guess = fields[j] + du * src
            pol_guess, _ = solve(guess, states[j + 1])
            fields[j + 1] = fields[j] + 0.5 * du * (src - 1j * prefactor * pol_guess)
            pol, ends[j + 1] = solve(fields[j + 1], states[j + 1])
        except NumericalError as exc:
            node = j + 1 if direction == FORWARD else n_z - 2 - j
            raise NumericalError(f"{exc} at depth node {node} ({direction} sweep)") from exc
    return fields, ends


def _time_step(times) -> float:
    times = np.asarray(times, dtype=float)
    steps = np.diff(times)
    if times.size < 2 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise ConfigError("time grid must be uniform with at least two samples")
    return float(steps[0])


def _check_stability(ensemble: EnsembleState, dt: float):
    if dt * ensemble.grid.profile.half_width > 0.5 + 1e-12:
        raise ConfigError(
            f"time step {dt} violates dt * half_width <= 0.5 "
            f"(half_width {ensemble.grid.profile.half_width})")


def _propagate(ensemble: EnsembleState, launch, times, direction):
    """Run one stage; returns the field (z order) and the updated ensemble."""
    dt = _time_step(times)
    _check_stability(ensemble, dt)
    n_t = len(times)
    grid = ensemble.grid
    order = _node_order(ensemble.n_z, direction)
    du = float(ensemble.z[1] - ensemble.z[0])
    prefactor = coupling_prefactor(grid)
    coh = ensemble.coherences(direction)
    out = ensemble.copy()
    out_coh = out.coherences(direction)
    if ensemble.mode == FULL:
        prop = FullPropagator(ensemble.detunings, grid.weights, dt, n_t)
        states = [np.stack([ensemble.populations[0, j], ensemble.populations[1, j],
                            ensemble.populations[2, j], ensemble.sigma12[j],
                            coh[0, j], coh[1, j]]).astype(complex) for j in order]
        fields, ends = _sweep(prop.solve, launch, states, du, prefactor, direction)
        for end, j in zip(ends, order):
            out.populations[:, j] = end[:3].real
            out.sigma12[j] = end[3]
            out_coh[:, j] = end[4:]
        np.maximum(out.peaks, prop.peaks, out=out.peaks)
    else:
        prop = WeakPropagator(ensemble.detunings, grid.weights, dt, n_t)
        states = [coh[:, j] for j in order]
        fields, ends = _sweep(prop.solve, launch, states, du, prefactor, direction)
        for end, j in zip(ends, order):
            out_coh[:, j] = end
    omega = np.empty((2, ensemble.n_z, n_t), dtype=complex)
    omega[:, order] = np.moveaxis(fields, 0, 1)
    return omega, out


def run_absorption(ensemble: EnsembleState, pulse: PulseSpec, times,
                   weak_threshold: float = 1e-3):
    """Send ``pulse`` into the ground-state medium from z = 0.

    Returns the ensemble at the last time sample and the stage record.
    """
    if (np.any(ensemble.forward) or np.any(ensemble.backward)
            or ensemble.detuning_sign != 1 or ensemble.phase_matched):
        raise ProtocolError("absorption requires a fresh ground-state ensemble")
    times = np.asarray(times, dtype=float)
    launch = pulse.envelope(times)
    notes = []
    if ensemble.mode != FULL and np.abs(launch).max() > weak_threshold:
        notes.append(f"peak Rabi frequency {np.abs(launch).max():.3g} exceeds the "
                     f"weak-field threshold {weak_threshold:.3g}")
    omega, out = _propagate(ensemble, launch, times, FORWARD)
    with np.errstate(over="ignore"):
        ref = float(np.sum(np.abs(pulse.amplitudes * pulse.peak) ** 2))
    if not math.isfinite(ref):
        raise NumericalError(f"input intensity overflows for peak {pulse.peak:g}")
    record = StageRecord("absorption", FORWARD, times, ensemble.z.copy(), omega, ref, notes)
    return out, record


def free_evolution(ensemble: EnsembleState, duration: float) -> EnsembleState:
    """Field-free evolution for ``duration``: each class rotates at its detuning."""
    out = ensemble.copy()
    phase = np.exp(1j * ensemble.detunings * duration)
    out.forward *= phase
    out.backward *= phase
    return out


def reverse_detunings(ensemble: EnsembleState) -> EnsembleState:
    """Flip the sign of every class detuning for all later evolution."""
    if ensemble.detuning_sign == -1:
        warnings.warn("detunings reversed twice; the original evolution is restored",
                      stacklevel=2)
    out = ensemble.copy()
    out.detuning_sign = -ensemble.detuning_sign
    return out


def apply_phase_matching(ensemble: EnsembleState, direction: str = BACKWARD) -> EnsembleState:
    """Turn the forward coherence components into backward ones.

    Physically a pair of counter-propagating transfer pulses; here only its
    net effect is kept.
    """
    if direction != BACKWARD:
        raise ProtocolError("phase matching only applies to backward retrieval")
    out = ensemble.copy()
    out.backward = out.backward + out.forward
    out.forward = np.zeros_like(out.forward)
    out.phase_matched = True
    return out


def run_retrieval(ensemble: EnsembleState, direction: str, times,
                  reference_intensity: float = 1.0) -> StageRecord:
    """Let the stored coherences re-emit with no input field.

    The launch face is z = 0 for forward and z = L for backward emission.
    """
    if direction not in DIRECTIONS:
        raise ConfigError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    if direction == BACKWARD and not ensemble.phase_matched:
        raise ProtocolError("backward retrieval requires phase matching")
    if direction == FORWARD and ensemble.phase_matched:
        raise ProtocolError("forward retrieval must not follow phase matching")
    if ensemble.detuning_sign != -1:
        warnings.warn("retrieving without reversed detunings; no echo will form", stacklevel=2)
    times = np.asarray(times, dtype=float)
    launch = np.zeros((2, times.size), dtype=complex)
    omega, out = _propagate(ensemble, launch, times, direction)
    return StageRecord(f"retrieval-{direction}", direction, times, ensemble.z.copy(),
                       omega, reference_intensity, final_state=out)
