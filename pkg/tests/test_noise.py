import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from crib_memory import analytic
from crib_memory.bloch import LevelPhases
from crib_memory.config import RunSpec
from crib_memory.errors import ConfigError
from crib_memory.medium import InhomogeneousProfile, build_detuning_grid, init_ground_state
from crib_memory.noise import (MONTE_CARLO, NoiseParams, apply_level_phases,
                               apply_phase_noise, bessel_i0, bessel_i0e, bessel_i1, bessel_i1e,
                               dephasing_factor, noise_factors, sample_von_mises, von_mises_pdf)
from crib_memory.protocol import absorb, retrieve

K5 = 0.893383


# Bessel functions and the von Mises law ----------------------------------------

def test_bessel_frozen_values():
    assert bessel_i0(1.0) == pytest.approx(1.2660658777520082, rel=1e-12)
    assert bessel_i1(1.0) == pytest.approx(0.5651591039924851, rel=1e-12)
    assert bessel_i0(0.0) == 1.0 and bessel_i1(0.0) == 0.0


def test_bessel_against_scipy():
    x = np.concatenate([np.linspace(0, 30, 601), [14.999, 15.0, 15.001, 50, 200, 1e4]])
    np.testing.assert_allclose(bessel_i0e(x), special.i0e(x), rtol=1e-12)
    np.testing.assert_allclose(bessel_i1e(x), special.i1e(x), rtol=1e-12, atol=1e-300)


def test_pdf_examples():
    assert von_mises_pdf(1.3, 0.0) == pytest.approx(1 / (2 * math.pi), abs=1e-12)
    assert von_mises_pdf(0.0, 1.0) == pytest.approx(0.341710, abs=1e-6)
    assert von_mises_pdf(0.0, 1.0) == pytest.approx(math.e / (2 * math.pi * 1.2660658777520082), rel=1e-9)
    for k in (0.0, 1.0, 5.0, 20.0):
        total = integrate.quad(von_mises_pdf, -math.pi, math.pi, args=(k,), epsabs=1e-12)[0]
        assert abs(total - 1) <= 1e-8
    with pytest.raises(ValueError):
        von_mises_pdf(0.0, -1.0)


def test_dephasing_factor_values():
    assert dephasing_factor(0.0) == 0.0
    assert dephasing_factor(5.0) == pytest.approx(K5, abs=1e-6)
    # the true ratio is 0.9746705; the rounded 0.974667 is 3.5e-6 off
    assert dephasing_factor(20.0) == pytest.approx(0.9746705, abs=1e-6)
    assert dephasing_factor(math.inf) == 1.0
    assert dephasing_factor(1e6) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        dephasing_factor(-0.1)


def test_dephasing_factor_asymptotics_and_monotonicity():
    k = np.linspace(0, 40, 100)
    K = dephasing_factor(k)
    assert np.all(np.diff(K) > 0) and K[-1] < 1
    big = np.array([20.0, 30.0, 40.0])
    asym = 1 - 1 / (2 * big) - 1 / (8 * big ** 2)
    # next term of the expansion is -1/(8 k^3)
    assert np.all(np.abs(dephasing_factor(big) - asym) <= 1 / big ** 3)
    np.testing.assert_allclose(dephasing_factor(k), special.i1e(k) / special.i0e(k), rtol=1e-12)


# sampler -----------------------------------------------------------------------

def test_sampler_uniform_at_zero():
    phi = sample_von_mises(0.0, np.random.default_rng(1), 10 ** 6)
    assert abs(np.mean(np.exp(1j * phi))) <= 0.005
    assert phi.min() >= -math.pi and phi.max() <= math.pi


def test_sampler_first_moment():
    phi = sample_von_mises(5.0, np.random.default_rng(2), 10 ** 6)
    assert abs(np.mean(np.cos(phi)) - K5) <= 1e-3
    assert abs(np.mean(np.sin(phi))) <= 3e-3


def test_sampler_histogram_matches_pdf():
    phi = sample_von_mises(1.0, np.random.default_rng(3), 400_000)
    hist, edges = np.histogram(phi, bins=40, range=(-math.pi, math.pi), density=True)
    mid = 0.5 * (edges[1:] + edges[:-1])
    np.testing.assert_allclose(hist, von_mises_pdf(mid, 1.0), atol=0.01)


def test_sampler_limits_and_reproducibility():
    assert sample_von_mises(math.inf, np.random.default_rng(0)) == 0.0
    a = sample_von_mises(5.0, np.random.default_rng(99), (3, 4))
    b = sample_von_mises(5.0, np.random.default_rng(99), (3, 4))
    assert a.shape == (3, 4)
    np.testing.assert_array_equal(a, b)
    wide = sample_von_mises(1e8, np.random.default_rng(0), 10_000)
    assert np.std(wide) == pytest.approx(1e-4, rel=0.05)
    with pytest.raises(ValueError):
        sample_von_mises(-1.0, np.random.default_rng(0))


# deterministic and stochastic phases on an ensemble -----------------------------

@pytest.fixture(scope="module")
def ensemble():
    grid = build_detuning_grid(InhomogeneousProfile(10.0), 21)
    ens = init_ground_state(6, grid, optical_depth=4.5)
    rng = np.random.default_rng(4)
    shape = ens.forward.shape
    ens.forward = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return ens


def test_global_phase_is_identity(ensemble):
    out = apply_level_phases(ensemble, LevelPhases(0.7, 0.7, 0.7))
    np.testing.assert_array_equal(out.forward, ensemble.forward)
    np.testing.assert_array_equal(out.backward, ensemble.backward)


def test_ground_phase_is_common_factor(ensemble):
    out = apply_level_phases(ensemble, LevelPhases(0.0, 0.0, 1.1))
    ratio = out.forward / ensemble.forward
    np.testing.assert_allclose(ratio, np.exp(-1.1j), rtol=1e-15)


def test_excited_phase_sign(ensemble):
    out = apply_level_phases(ensemble, LevelPhases(math.pi, 0.0, 0.0))
    np.testing.assert_allclose(out.forward[0], -ensemble.forward[0], rtol=1e-15)
    np.testing.assert_array_equal(out.forward[1], ensemble.forward[1])


def test_noise_params_validation():
    for bad in (dict(k1=-1.0), dict(mode="exact"), dict(n_samples=0), dict(seed=-1)):
        with pytest.raises(ConfigError):
            NoiseParams(**bad)
    assert NoiseParams().is_noiseless


def test_analytic_factors():
    f = noise_factors(NoiseParams(k3=5.0), 3, 4)
    np.testing.assert_allclose(f[:2], K5, atol=1e-6)
    np.testing.assert_allclose(f[2], 1.0)
    f = noise_factors(NoiseParams(k1=1e6, k2=1e6, k3=1e6), 2, 2)
    np.testing.assert_allclose(f, 1.0, atol=2e-6)


def test_monte_carlo_factor_converges():
    f = noise_factors(NoiseParams(k3=5.0, mode=MONTE_CARLO, n_samples=100_000, seed=11), 1, 3)
    assert np.all(np.abs(f[0].real / K5 - 1) <= 0.01)


def test_monte_carlo_thread_invariance():
    p = NoiseParams(k1=2.0, k3=5.0, mode=MONTE_CARLO, n_samples=200, seed=5)
    np.testing.assert_array_equal(noise_factors(p, 7, 9, threads=1), noise_factors(p, 7, 9, threads=3))


@settings(max_examples=15, deadline=None)
@given(k=st.floats(0.1, 50), seed=st.integers(0, 2 ** 32))
def test_monte_carlo_factor_bounded(k, seed):
    f = noise_factors(NoiseParams(k3=k, mode=MONTE_CARLO, n_samples=50, seed=seed), 1, 2)
    assert np.all(np.abs(f) <= 1 + 1e-12)


def test_level_one_noise_touches_only_first_channel(ensemble):
    out = apply_phase_noise(ensemble, NoiseParams(k1=3.0))
    np.testing.assert_allclose(out.forward[0], dephasing_factor(3.0) * ensemble.forward[0])
    np.testing.assert_array_equal(out.forward[1], ensemble.forward[1])


# noise in the full protocol ---------------------------------------------------

@pytest.fixture(scope="module")
def depth_runs():
    out = {}
    for depth in (1.0, 2.0, 4.5):
        spec = RunSpec().updated(medium={"optical_depth": depth})
        out[depth] = (spec, absorb(spec))
    return out


@pytest.mark.parametrize("depth", [1.0, 2.0, 4.5])
def test_noisy_backward_efficiency_formula(depth_runs, depth):
    spec, stored = depth_runs[depth]
    res = retrieve(spec.updated(noise={"k3": 5.0}), stored)
    want = (K5 * analytic.gamma_backward(depth)) ** 2
    assert abs(res.diagnostics.efficiency_total - want) <= 0.02


def test_level_one_noise_leaves_second_channel(depth_runs):
    spec, stored = depth_runs[4.5]
    clean = retrieve(spec, stored).diagnostics.efficiency_exit
    noisy = retrieve(spec.updated(noise={"k1": 2.0}), stored).diagnostics.efficiency_exit
    assert abs(noisy[1] - clean[1]) <= 1e-8
    assert noisy[0] == pytest.approx(clean[0] * dephasing_factor(2.0) ** 2, rel=1e-9)


@pytest.mark.slow
def test_monte_carlo_agrees_with_analytic_within_two_sigma():
    base = RunSpec().updated(medium={"n_z": 10}, broadening={"n_classes": 101})
    stored = absorb(base)
    want = retrieve(base.updated(noise={"k3": 5.0}), stored).diagnostics.efficiency_total
    vals = [retrieve(base.updated(noise={"k3": 5.0, "mode": MONTE_CARLO, "n_samples": 10_000,
                                         "seed": s}), stored).diagnostics.efficiency_total
            for s in range(5)]
    err = np.std(vals, ddof=1) / math.sqrt(len(vals))
    assert abs(np.mean(vals) - want) <= 2 * err
