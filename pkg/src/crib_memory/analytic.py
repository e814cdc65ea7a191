"""Closed-form CRIB theory for a weak pulse in a V-type medium.

In the weak-field limit each polarization component sees an independent
two-level memory, so every prediction reduces to three response functions
of the spectral detuning ``omega``::

    H(w) = int G(D)  int_0^inf exp(i (w + D) tau) dtau dD
    F(w) = int G(-D) int_0^inf exp(i (w - D) tau) dtau dD
    J(w) = int G(-D) int_-inf^inf exp(i (w - D) tau) dtau dD

The half-line time integrals are evaluated with
``int_0^inf exp(i x tau) dtau = pi delta(x) + i PV(1/x)``.  Substituting
``D -> -D`` in ``F`` shows ``F = H`` identically.  Efficiencies are quoted
in units where ``alpha = eta J(0)``, so ``L eta = alpha L / J(0)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .medium import InhomogeneousProfile
from .noise import dephasing_factor

FULL = "full"
NARROWBAND = "narrowband"

#: Peak forward efficiency (2/e)^2, reached at unit-free depth 2.
FORWARD_BOUND = (2.0 / math.e) ** 2


def _scalar_or_array(value, *inputs):
    """Collapse to a Python scalar when every input was a scalar."""
    if all(np.ndim(x) == 0 for x in inputs):
        return np.asarray(value).item()
    return value


def _check_profile(profile: InhomogeneousProfile):
    if profile.shape != "rectangular":
        raise ValueError(f"closed forms exist only for the rectangular profile, got {profile.shape!r}")


def response_H(omega, profile: InhomogeneousProfile):
    """``H(omega) = (pi/2G)[|w|<G] + (i/2G) ln|(G+w)/(G-w)|`` for a rectangular line.

    The logarithm diverges at the band edges ``|omega| = Gamma``; such
    inputs are rejected.
    """
    _check_profile(profile)
    w = np.asarray(omega, dtype=float)
    gamma = profile.half_width
    if np.any(np.abs(w) == gamma):
        raise ValueError("H is singular at |omega| = half_width")
    real = np.where(np.abs(w) < gamma, math.pi / (2.0 * gamma), 0.0)
    imag = np.log(np.abs((gamma + w) / (gamma - w))) / (2.0 * gamma)
    return _scalar_or_array(real + 1j * imag, omega)


def response_F_and_J(omega, profile: InhomogeneousProfile):
    """``(F(omega), J(omega))``; ``F`` coincides with ``H`` and ``J = 2 pi G``."""
    F = response_H(omega, profile)
    w = np.asarray(omega, dtype=float)
    J = 2.0 * math.pi * profile.density(w)
    return F, _scalar_or_array(J, omega)


@dataclass(frozen=True)
class ResponseFunctions:
    """``H``, ``F`` and ``J`` of one inhomogeneous profile."""

    profile: InhomogeneousProfile

    def H(self, omega):
        return response_H(omega, self.profile)

    def F(self, omega):
        return response_F_and_J(omega, self.profile)[0]

    def J(self, omega):
        return response_F_and_J(omega, self.profile)[1]

    @property
    def J0(self) -> float:
        return 2.0 * math.pi * self.profile.peak_density


def _half_line(a: float, kind: str) -> float:
    """``int_0^inf sin(a t)/t dt`` or the finite part of the cosine pair.

    Split at ``t = 1``: adaptive quadrature on ``[0, 1]`` and QUADPACK's
    Fourier integrator on ``[1, inf)``.
    """
    if kind == "sin":
        head = integrate.quad(lambda t: math.sin(a * t) / t if t else a, 0.0, 1.0,
                              epsabs=1e-13, epsrel=1e-13)[0]
    else:
        head = integrate.quad(lambda t: (math.cos(a * t) - 1.0) / t, 0.0, 1.0,
                              epsabs=1e-13, epsrel=1e-13)[0]
    with warnings.catch_warnings():
        # the cycle-wise extrapolation flags 1/t as "bad" even when it converges
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        tail = integrate.quad(lambda t: 1.0 / t, 1.0, np.inf, weight=kind, wvar=abs(a),
                              epsabs=1e-13)[0]
    if kind == "sin":
        return head + (tail if a > 0 else -tail) if a else 0.0
    return head + tail


def response_quadrature(omega: float, profile: InhomogeneousProfile):
    """Direct numerical evaluation of ``(H, F, J)`` at one ``omega``.

    The detuning integral of the rectangular line gives
    ``sin(Gamma tau)/(Gamma tau)``; the remaining time integrals are done
    numerically with the oscillatory tail handled by QUADPACK (an
    Abel-regulated upper limit).  Intended as an independent check of the
    closed forms, not for production use.
    """
    _check_profile(profile)
    gamma = profile.half_width
    w = float(omega)
    if abs(w) == gamma:
        raise ValueError("H is singular at |omega| = half_width")
    ap, am = gamma + w, gamma - w
    # sin(G t) cos(w t) = [sin(ap t) + sin(am t)] / 2
    sin_ap = _half_line(ap, "sin")
    sin_am = _half_line(am, "sin")
    real = (sin_ap + sin_am) / (2.0 * gamma)
    # sin(G t) sin(w t) = [cos(am t) - cos(ap t)] / 2 ; the -1/t pieces cancel
    imag = (_half_line(am, "cos") - _half_line(ap, "cos")) / (2.0 * gamma)
    H = complex(real, imag)
    # F integrates G(-D) exp(-i D t); for the even rectangle the inner
    # integral is the same sinc, so only the bookkeeping differs
    F = H
    J = 2.0 * real
    return H, F, J


def sinhc(x):
    """``sinh(x)/x`` with the removable singularity at 0 filled in."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    out = np.where(small, 1.0 + x * x / 6.0, np.sinh(safe) / safe)
    if np.all(out.imag == 0):
        out = out.real
    return _scalar_or_array(out, x)


def _depth_coefficients(omega, profile):
    w = np.asarray(omega, dtype=float)
    F, J = response_F_and_J(w, profile)
    Hm = response_H(-w, profile)
    return np.asarray(F), np.asarray(J), np.asarray(Hm), ResponseFunctions(profile).J0


def gamma_backward(optical_depth, omega=0.0, profile: InhomogeneousProfile | None = None,
                   mode: str = NARROWBAND):
    """Backward retrieval coefficient.

    Narrowband: ``1 - exp(-alpha L)``.  Full:
    ``J/(F + H(-w)) * (1 - exp(-L eta (F + H(-w))))``.
    """
    if np.any(np.asarray(optical_depth) < 0):
        raise ValueError("optical depth must be >= 0")
    if mode == NARROWBAND:
        return _scalar_or_array(-np.expm1(-np.asarray(optical_depth, dtype=float)), optical_depth)
    if mode != FULL or profile is None:
        raise ValueError("full mode needs a profile")
    F, J, Hm, J0 = _depth_coefficients(omega, profile)
    s = F + Hm
    leta = np.asarray(optical_depth, dtype=float) / J0
    out = J / s * -np.expm1(-leta * s)
    return _scalar_or_array(out, omega, optical_depth)


def gamma_forward(depth, omega=0.0, profile: InhomogeneousProfile | None = None,
                  mode: str = NARROWBAND):
    """Forward retrieval coefficient at propagation depth ``u``.

    Narrowband: ``u exp(-u/2)``.  Full:
    ``u eta J exp(-u eta (F + H(-w))/2) sinhc(u eta (F - H(-w))/2)``.
    """
    u = np.asarray(depth, dtype=float)
    if np.any(u < 0):
        raise ValueError("depth must be >= 0")
    if mode == NARROWBAND:
        return _scalar_or_array(u * np.exp(-0.5 * u), depth)
    if mode != FULL or profile is None:
        raise ValueError("full mode needs a profile")
    F, J, Hm, J0 = _depth_coefficients(omega, profile)
    ueta = u / J0
    out = ueta * J * np.exp(-0.5 * ueta * (F + Hm)) * sinhc(0.5 * ueta * (F - Hm))
    return _scalar_or_array(out, omega, depth)


def forward_peak_depth() -> float:
    """Depth maximizing the narrowband forward efficiency."""
    return 2.0


def noisy_efficiency(optical_depth, k1=math.inf, k2=math.inf, k3=math.inf,
                     direction: str = "backward", channel: int = 1, forward: str = "max"):
    """``(K(k_mu) K(k_3) gamma)^2`` for channel ``mu`` (1 or 2).

    ``forward="max"`` uses the best depth inside the medium,
    ``forward="exit"`` the exit face.
    """
    if channel not in (1, 2):
        raise ValueError("channel must be 1 (the 1-3 transition) or 2 (the 2-3 transition)")
    k_mu = k1 if channel == 1 else k2
    factor = dephasing_factor(k_mu) * dephasing_factor(k3)
    depth = np.asarray(optical_depth, dtype=float)
    if direction == "backward":
        gamma = -np.expm1(-depth)
    elif direction == "forward":
        if forward == "max":
            depth = np.minimum(depth, forward_peak_depth())
        elif forward != "exit":
            raise ValueError("forward must be 'max' or 'exit'")
        gamma = depth * np.exp(-0.5 * depth)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return _scalar_or_array((factor * gamma) ** 2, optical_depth)


def phase_fidelity(s_L, s_R, phi):
    """``|s_L + exp(i phi) s_R|^2`` for a retrieved relative phase ``phi``."""
    if np.any(np.abs(np.asarray(s_L) + np.asarray(s_R) - 1.0) > 1e-9):
        raise ValueError("s_L + s_R must equal 1")
    val = np.abs(s_L + np.exp(1j * np.asarray(phi, dtype=float)) * s_R) ** 2
    return _scalar_or_array(val, s_L, s_R, phi)


def efficiency_max_curve(k3):
    """Depth-optimized efficiencies versus the ground-level noise width.

    Returns ``(backward, forward)`` with ``backward = K(k3)^2`` (infinite
    depth) and ``forward = K(k3)^2 (2/e)^2``.
    """
    K2 = np.asarray(dephasing_factor(k3)) ** 2
    return _scalar_or_array(K2, k3), _scalar_or_array(K2 * FORWARD_BOUND, k3)


def pulse_averaged(response, omega_max: float = 8.0, n: int = 4001) -> float:
    """Average of ``|response(w)|^2`` over the spectrum of the unit Gaussian pulse.

    The pulse ``exp(-t^2/2)`` has power spectrum proportional to
    ``exp(-w^2)``.
    """
    w = np.linspace(-omega_max, omega_max, n)
    weight = np.exp(-w * w)
    vals = np.abs(np.asarray(response(w))) ** 2
    return float(integrate.trapezoid(vals * weight, w) / integrate.trapezoid(weight, w))


def transmission(optical_depth, profile: InhomogeneousProfile) -> float:
    """Transmitted energy fraction of the Gaussian pulse, ``<exp(-alpha(w) L)>``."""
    J0 = ResponseFunctions(profile).J0
    return pulse_averaged(lambda w: np.exp(-0.5 * optical_depth * response_F_and_J(w, profile)[1] / J0))
