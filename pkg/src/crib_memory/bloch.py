"""Atomic time evolution at a fixed depth node.

Two levels of description are provided:

* the weak-field equations, where the ground level stays fully populated
  and the two optical coherences obey independent linear equations
  ``d sigma_m3/dt = i Delta sigma_m3 - i Omega_m3``;
* the full V-system density-matrix equations including excited-state
  populations and the excited-state coherence ``sigma_12``.

Both are integrated with the classical fourth-order Runge-Kutta scheme,
using linearly interpolated field values at the half step.  Because the
weak-field RK4 update is linear in the state and the field samples, the
whole time history for one depth node can be written as a causal
convolution; :class:`WeakPropagator` exploits this to integrate every
frequency class in a handful of vectorized operations while reproducing
the step-by-step RK4 result to rounding error.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

from .errors import NumericalError


class FieldSample(NamedTuple):
    """Rabi-frequency envelopes of the two transitions at one instant."""

    omega13: complex
    omega23: complex


@dataclass(frozen=True)
class LevelPhases:
    """Phases imprinted on levels 1, 2 and 3 (radians, modulo 2*pi)."""

    phi1: float = 0.0
    phi2: float = 0.0
    phi3: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.phi1, self.phi2, self.phi3])


@numba.njit(cache=True)
def _weak_rhs(s13, s23, o13, o23, delta):
    return (1j * delta * s13 - 1j * o13, 1j * delta * s23 - 1j * o23)


@numba.njit(cache=True)
def _full_rhs(s11, s22, s33, s12, s13, s23, o13, o23, delta):
    a = 1j * s13 * np.conj(o13)
    b = 1j * s23 * np.conj(o23)
    d11 = a + np.conj(a)
    d22 = b + np.conj(b)
    d33 = -a - np.conj(a) - b - np.conj(b)
    d12 = 1j * s13 * np.conj(o23) - 1j * np.conj(s23) * o13
    d13 = 1j * delta * s13 + 1j * s12 * o23 - 1j * (s33 - s11) * o13
    d23 = 1j * delta * s23 + 1j * np.conj(s12) * o13 - 1j * (s33 - s22) * o23
    return (d11, d22, d33, d12, d13, d23)


def weak_coherence_derivative(sigma13, sigma23, field: FieldSample, delta):
    """Time derivative of ``(sigma_13, sigma_23)`` in the weak-field limit.

    The ``sigma_12`` cross term vanishes because ``sigma_12`` stays zero, so
    each coherence only sees its own field component.
    """
    return _weak_rhs(np.asarray(sigma13, dtype=complex), np.asarray(sigma23, dtype=complex),
                     complex(field.omega13), complex(field.omega23), np.asarray(delta, dtype=float))


def full_bloch_derivative(state, field: FieldSample, delta):
    """Right-hand side of the full three-level equations.

    ``state`` is a sequence ``(s11, s22, s33, s12, s13, s23)`` of scalars or
    arrays.  The excited levels are degenerate in the rotating frame, so
    ``sigma_12`` carries no free phase.  The ``sigma_33`` rate is the
    negative sum of the excited-state rates, which is what a closed
    three-level system demands.
    """
    s = [np.asarray(x, dtype=complex) for x in state]
    return _full_rhs(*s, complex(field.omega13), complex(field.omega23),
                     np.asarray(delta, dtype=float))


def rk4_step(rhs, y, f0, fh, f1, dt, *params):
    """One classical Runge-Kutta step.

    Parameters
    ----------
    rhs : callable
        ``rhs(*y, *field, *params)`` returning a tuple like ``y``.
    y : tuple of arrays
        State at time ``t``.
    f0, fh, f1 : tuple
        Field samples at ``t``, ``t + dt/2`` and ``t + dt``.
    dt : float
        Time step.
    """
    k1 = rhs(*y, *f0, *params)
    k2 = rhs(*[a + 0.5 * dt * k for a, k in zip(y, k1)], *fh, *params)
    k3 = rhs(*[a + 0.5 * dt * k for a, k in zip(y, k2)], *fh, *params)
    k4 = rhs(*[a + dt * k for a, k in zip(y, k3)], *f1, *params)
    out = tuple(a + dt / 6.0 * (p + 2.0 * q + 2.0 * r + s)
                for a, p, q, r, s in zip(y, k1, k2, k3, k4))
    for a in out:
        if not np.all(np.isfinite(a)):
            raise NumericalError("non-finite state after RK4 step")
    return out


def closed_form_constant_drive(omega: complex, delta: float, t: float) -> complex:
    """Exact weak-field coherence under a constant drive switched on at t=0."""
    if delta == 0:
        return -1j * omega * t
    return omega / delta * (1.0 - np.exp(1j * delta * t))


def _weak_step_coefficients(detunings: np.ndarray, dt: float):
    """Per-class RK4 amplification and field coefficients.

    The weak RK4 step is linear in ``(sigma, Omega(t), Omega(t+dt/2),
    Omega(t+dt))``, so applying it to unit inputs gives its exact
    coefficients.
    """
    ones = np.ones_like(detunings, dtype=complex)
    zero = np.zeros_like(ones)
    off = (0.0, 0.0)
    on = (1.0, 0.0)
    amp = rk4_step(_weak_rhs, (ones, zero), off, off, off, dt, detunings)[0]
    c0 = rk4_step(_weak_rhs, (zero, zero), on, off, off, dt, detunings)[0]
    ch = rk4_step(_weak_rhs, (zero, zero), off, on, off, dt, detunings)[0]
    c1 = rk4_step(_weak_rhs, (zero, zero), off, off, on, dt, detunings)[0]
    return amp, c0 + 0.5 * ch, c1 + 0.5 * ch


class WeakPropagator:
    """RK4 solution of the weak-field equations for a whole time window.

    With the half-step field taken as the mean of its neighbours, one RK4
    step reads ``s[k+1] = A s[k] + b0 Omega[k] + b1 Omega[k+1]`` per class.
    Unrolling the recurrence turns the weighted class sum
    ``P[k] = sum_n w_n s_n[k]`` into a causal convolution of the field with
    a precomputed kernel plus the free decay of the initial state.

    Parameters
    ----------
    detunings, weights : ndarray
        Current (possibly reversed) class detunings and quadrature weights.
    dt : float
        Time step.
    n_t : int
        Number of time samples in the window (including both ends).
    """

    def __init__(self, detunings, weights, dt, n_t):
        if n_t < 2:
            raise ValueError("need at least two time samples")
        detunings = np.asarray(detunings, dtype=float)
        weights = np.asarray(weights, dtype=float)
        self.n_t = n_t
        amp, b0, b1 = _weak_step_coefficients(detunings, dt)
        powers = np.empty((n_t, detunings.size), dtype=complex)
        powers[0] = 1.0
        powers[1:] = np.cumprod(np.broadcast_to(amp, (n_t - 1, amp.size)), axis=0)
        g0 = powers @ (weights * b0)
        g1 = powers @ (weights * b1)
        self._kernel = g1.copy()
        self._kernel[1:] += g0[:-1]
        self._edge = g1
        self._free = powers * weights
        last = n_t - 1
        rev = powers[last - 1::-1].T
        self._final_map = np.zeros((detunings.size, n_t), dtype=complex)
        self._final_map[:, :last] += b0[:, None] * rev
        self._final_map[:, 1:] += b1[:, None] * rev
        self._final_amp = amp * powers[last - 1]

    def solve(self, omega: np.ndarray, sigma0: np.ndarray):
        """Integrate one depth node.

        Parameters
        ----------
        omega : ndarray, shape (2, n_t)
            Field envelopes of the 1-3 and 2-3 transitions.
        sigma0 : ndarray, shape (2, n_classes)
            Coherences at the start of the window.

        Returns
        -------
        polarization : ndarray, shape (2, n_t)
            Weighted class sums ``sum_n w_n sigma_n(t)``.
        sigma_end : ndarray, shape (2, n_classes)
            Coherences at the end of the window.
        """
        n_t = self.n_t
        pol = np.empty((2, n_t), dtype=complex)
        for c in range(2):
            pol[c] = np.convolve(omega[c], self._kernel)[:n_t]
            pol[c] -= self._edge * omega[c, 0]
            pol[c] += self._free @ sigma0[c]
        sigma_end = self._final_amp * sigma0 + omega @ self._final_map.T
        if not (np.all(np.isfinite(pol)) and np.all(np.isfinite(sigma_end))):
            raise NumericalError("non-finite coherence in weak-field propagation")
        return pol, sigma_end


@numba.njit(cache=True)
def _full_window(state, detunings, weights, omega, dt):
    n_t = omega.shape[1]
    n_c = detunings.size
    pol = np.zeros((2, n_t), dtype=np.complex128)
    peaks = np.zeros(4)  # max sigma11, sigma22, |sigma12|, |trace - 1|
    s = state.copy()
    for k in range(n_t):
        p13 = 0j
        p23 = 0j
        for n in range(n_c):
            p13 += weights[n] * s[4, n]
            p23 += weights[n] * s[5, n]
            peaks[0] = max(peaks[0], s[0, n].real)
            peaks[1] = max(peaks[1], s[1, n].real)
            peaks[2] = max(peaks[2], abs(s[3, n]))
            peaks[3] = max(peaks[3], abs(s[0, n].real + s[1, n].real + s[2, n].real - 1.0))
        pol[0, k] = p13
        pol[1, k] = p23
        if k == n_t - 1:
            break
        a13, a23 = omega[0, k], omega[1, k]
        c13, c23 = omega[0, k + 1], omega[1, k + 1]
        h13, h23 = 0.5 * (a13 + c13), 0.5 * (a23 + c23)
        for n in range(n_c):
            d = detunings[n]
            y0, y1, y2, y3, y4, y5 = s[0, n], s[1, n], s[2, n], s[3, n], s[4, n], s[5, n]
            k1 = _full_rhs(y0, y1, y2, y3, y4, y5, a13, a23, d)
            k2 = _full_rhs(y0 + 0.5 * dt * k1[0], y1 + 0.5 * dt * k1[1], y2 + 0.5 * dt * k1[2],
                           y3 + 0.5 * dt * k1[3], y4 + 0.5 * dt * k1[4], y5 + 0.5 * dt * k1[5],
                           h13, h23, d)
            k3 = _full_rhs(y0 + 0.5 * dt * k2[0], y1 + 0.5 * dt * k2[1], y2 + 0.5 * dt * k2[2],
                           y3 + 0.5 * dt * k2[3], y4 + 0.5 * dt * k2[4], y5 + 0.5 * dt * k2[5],
                           h13, h23, d)
            k4 = _full_rhs(y0 + dt * k3[0], y1 + dt * k3[1], y2 + dt * k3[2],
                           y3 + dt * k3[3], y4 + dt * k3[4], y5 + dt * k3[5],
                           c13, c23, d)
            s[0, n] = y0 + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            s[1, n] = y1 + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            s[2, n] = y2 + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
            s[3, n] = y3 + dt / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
            s[4, n] = y4 + dt / 6.0 * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4])
            s[5, n] = y5 + dt / 6.0 * (k1[5] + 2.0 * k2[5] + 2.0 * k3[5] + k4[5])
    return pol, s, peaks


class FullPropagator:
    """RK4 integration of the full three-level equations, class by class.

    ``solve`` takes a state block of shape ``(6, n_classes)`` ordered as
    ``(s11, s22, s33, s12, s13, s23)`` and tracks the largest excited-state
    populations, ``|sigma_12|`` and trace drift seen during the window.
    """

    def __init__(self, detunings, weights, dt, n_t):
        self.detunings = np.ascontiguousarray(detunings, dtype=float)
        self.weights = np.ascontiguousarray(weights, dtype=float)
        self.dt = float(dt)
        self.n_t = n_t
        self.peaks = np.zeros(4)

    def solve(self, omega: np.ndarray, block: np.ndarray):
        pol, end, peaks = _full_window(np.ascontiguousarray(block, dtype=complex),
                                       self.detunings, self.weights,
                                       np.ascontiguousarray(omega, dtype=complex), self.dt)
        if not (np.all(np.isfinite(pol)) and np.all(np.isfinite(end))):
            raise NumericalError("non-finite state in full Bloch propagation")
        np.maximum(self.peaks, peaks, out=self.peaks)
        return pol, end
