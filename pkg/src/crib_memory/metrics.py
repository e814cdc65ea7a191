"""Efficiencies, normalized intensities, weak-field diagnostics and qubit fidelity."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .medium import QubitState

#: Weak-field threshold on excited populations and the excited-state coherence.
WEAK_FIELD_LIMIT = 1e-6


def spectral_energy(series, dt: float):
    """``sum |W(w)|^2 dw`` of the unitary angular Fourier transform.

    With ``W(w) = (2 pi)^-1/2 int Omega(t) exp(i w t) dt`` Parseval gives
    exactly the time-domain ``sum |Omega|^2 dt``, so there is no extra
    constant.  Works along the last axis.
    """
    series = np.asarray(series)
    n = series.shape[-1]
    if n == 0:
        raise ValueError("empty series")
    spec = np.fft.fft(series, axis=-1) * dt / math.sqrt(2.0 * math.pi)
    d_omega = 2.0 * math.pi / (n * dt)
    energy = np.sum(np.abs(spec) ** 2, axis=-1) * d_omega
    return float(energy) if np.ndim(energy) == 0 else energy


def efficiency(input_series, output_series, dt: float):
    """Output over input spectral energy, per channel (last axis is time)."""
    e_in = np.asarray(spectral_energy(input_series, dt))
    if np.any(e_in == 0):
        raise ValueError("input energy is zero")
    out = np.asarray(spectral_energy(output_series, dt)) / e_in
    return float(out) if out.ndim == 0 else out


def total_efficiency(input_series, output_series, dt: float) -> float:
    """Energy ratio summed over both channels."""
    e_in = float(np.sum(spectral_energy(input_series, dt)))
    if e_in == 0:
        raise ValueError("input energy is zero")
    return float(np.sum(spectral_energy(output_series, dt))) / e_in


def normalized_intensity(record):
    """``|Omega_m3(z, t)|^2`` over the total input peak intensity.

    Returns an array of shape ``(2, n_z, n_t)``.  The reference is the input
    value ``|Omega_13(0, t_c)|^2 + |Omega_23(0, t_c)|^2`` stored on the record.
    """
    ref = record.reference_intensity
    if not ref > 0:
        raise ValueError("reference intensity must be > 0")
    return np.abs(record.omega) ** 2 / ref


@dataclass(frozen=True)
class WeakFieldVerdict:
    max_sigma11: float
    max_sigma22: float
    max_sigma12: float
    threshold: float

    @property
    def passed(self) -> bool:
        return max(self.max_sigma11, self.max_sigma22, self.max_sigma12) <= self.threshold


def weak_field_check(peaks, threshold: float = WEAK_FIELD_LIMIT) -> WeakFieldVerdict:
    """Compare the run maxima of ``sigma_11``, ``sigma_22``, ``|sigma_12|`` with ``threshold``."""
    peaks = np.asarray(peaks, dtype=float)
    return WeakFieldVerdict(float(peaks[0]), float(peaks[1]), float(peaks[2]), threshold)


def transfer_coefficients(input_series, output_series, dt: float) -> np.ndarray:
    """Complex input-to-output amplitude factor of each channel.

    The modulus is the square root of the channel efficiency; the phase is
    that of the zero-frequency component ratio (the carrier is resonant, and
    time reversal leaves the zero-frequency value unchanged).  Channels with
    no input get 0.
    """
    inp = np.asarray(input_series)
    outp = np.asarray(output_series)
    e_in = np.asarray(spectral_energy(inp, dt))
    e_out = np.asarray(spectral_energy(outp, dt))
    out = np.zeros(inp.shape[0], dtype=complex)
    for mu in range(inp.shape[0]):
        a_in = inp[mu].sum()
        if e_in[mu] == 0 or a_in == 0:
            continue
        ratio = outp[mu].sum() / a_in
        phase = ratio / abs(ratio) if ratio != 0 else 1.0
        out[mu] = math.sqrt(e_out[mu] / e_in[mu]) * phase
    return out


def relative_phase(t_L: complex, t_R: complex) -> float:
    """Phase acquired by the ``L`` amplitude relative to ``R``.

    A level phase ``phi1`` imprinted on level 1 shows up here as ``+phi1``.
    """
    return float(np.angle(t_L * np.conj(t_R)))


def qubit_fidelity(qubit: QubitState, t_L: complex, t_R: complex):
    """``(efficiency, conditional, unconditional)`` for a retrieved qubit.

    The output amplitudes are ``t_mu c_mu``.  The conditional fidelity is the
    overlap with the input after normalizing the output; the unconditional
    one weights it by the efficiency (the lost light is a reflected beam
    that is traced out).
    """
    if abs(qubit.norm - 1.0) > 1e-9:
        raise ValueError(f"input qubit must be normalized, norm = {qubit.norm}")
    if t_L == 0 and t_R == 0:
        raise ValueError("both transfer coefficients are zero; fidelity undefined")
    c = qubit.as_array()
    out = np.array([t_L, t_R]) * c
    eff = float(np.sum(np.abs(out) ** 2))
    if eff == 0:
        raise ValueError("retrieved state is empty; fidelity undefined")
    cond = float(abs(np.vdot(c, out)) ** 2 / eff)
    cond = min(cond, 1.0)
    return eff, cond, eff * cond


def time_reversal_overlap(output_intensity, reference_intensity) -> float:
    """Zero-lag normalized correlation of two intensity profiles on one grid."""
    a = np.asarray(output_intensity, dtype=float).ravel()
    b = np.asarray(reference_intensity, dtype=float).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


@dataclass
class RunDiagnostics:
    """Summary numbers of one protocol run."""

    max_sigma11: float = 0.0
    max_sigma22: float = 0.0
    max_sigma12: float = 0.0
    max_trace_error: float = 0.0
    weak_field_threshold: float = WEAK_FIELD_LIMIT
    efficiency_exit: list = field(default_factory=lambda: [0.0, 0.0])
    efficiency_max_over_z: list = field(default_factory=lambda: [0.0, 0.0])
    efficiency_total: float = 0.0
    efficiency_total_max_over_z: float = 0.0
    conditional_fidelity: float | None = None
    unconditional_fidelity: float | None = None
    relative_phase: float | None = None
    time_reversal_overlap: float | None = None
    notes: list = field(default_factory=list)

    @property
    def weak_field_pass(self) -> bool:
        return max(self.max_sigma11, self.max_sigma22, self.max_sigma12) <= self.weak_field_threshold

    def as_dict(self) -> dict:
        out = asdict(self)
        out["weak_field_pass"] = self.weak_field_pass
        return out
