import math
import warnings

import numpy as np
import pytest

from crib_memory import analytic
from crib_memory.errors import ConfigError, NumericalError, ProtocolError
from crib_memory.medium import InhomogeneousProfile, build_detuning_grid, init_ground_state
from crib_memory.metrics import spectral_energy
from crib_memory.propagation import (BACKWARD, FORWARD, PulseSpec, apply_phase_matching,
                                     coupling_prefactor, field_source, free_evolution,
                                     reverse_detunings, run_absorption, run_retrieval)

PROFILE = InhomogeneousProfile(10.0)
T_ABS = -15 + 0.02 * np.arange(501)
T_RET = 0.02 * np.arange(751)


@pytest.fixture(scope="module")
def grid():
    return build_detuning_grid(PROFILE, 201, window=30.0)


@pytest.fixture(scope="module")
def absorbed(grid):
    ens = init_ground_state(100, grid, optical_depth=4.5)
    return run_absorption(ens, PulseSpec(s_L=0.6, s_R=0.4), T_ABS)


# field source ------------------------------------------------------------------

def test_field_source_examples():
    g = build_detuning_grid(InhomogeneousProfile(1.0), 201)
    pref = 0.7
    assert field_source(np.zeros((2, 201)), g, pref).tolist() == [0, 0]
    c = 0.3 - 0.2j
    np.testing.assert_allclose(field_source(np.full(201, c), g, pref, FORWARD), -1j * pref * c)
    np.testing.assert_allclose(field_source(np.full(201, c), g, pref, BACKWARD), 1j * pref * c)
    for tau in (0.5, 3.0, 10.0):
        src = field_source(np.exp(1j * g.detunings * tau), g, pref, FORWARD)
        assert abs(src - (-1j * pref * math.sin(tau) / tau)) <= 1e-4
    with pytest.raises(ValueError):
        field_source(np.zeros(5), g, pref)


def test_coupling_prefactor():
    g = build_detuning_grid(PROFILE, 21)
    assert coupling_prefactor(g) == pytest.approx(10.0 / math.pi)


def test_pulse_spec():
    p = PulseSpec(peak=2e-3, s_L=0.6, s_R=0.4, theta=0.5)
    env = p.envelope(np.array([-10.0]))
    assert abs(env[0, 0]) == pytest.approx(2e-3 * math.sqrt(0.6))
    assert np.angle(env[1, 0]) == pytest.approx(0.5)
    for bad in (dict(peak=0), dict(s_L=0.7, s_R=0.4), dict(s_L=-0.1, s_R=1.1), dict(shape="square")):
        with pytest.raises(ConfigError):
            PulseSpec(**bad)


# absorption ---------------------------------------------------------------------

def test_empty_medium_transmits_unchanged(grid):
    ens = init_ground_state(10, grid, optical_depth=0.0)
    _, rec = run_absorption(ens, PulseSpec(), T_ABS)
    np.testing.assert_allclose(rec.exit_series, rec.entry_series, rtol=0, atol=1e-10)


def test_beer_law_transmission(absorbed):
    _, rec = absorbed
    frac = spectral_energy(rec.exit_series, rec.dt).sum() / spectral_energy(rec.entry_series, rec.dt).sum()
    assert abs(frac / math.exp(-4.5) - 1) <= 0.15
    # finite-bandwidth spectral oracle
    assert abs(frac / analytic.transmission(4.5, PROFILE) - 1) <= 0.01


def test_transmitted_component_ratio(absorbed):
    _, rec = absorbed
    e = spectral_energy(rec.exit_series, rec.dt)
    assert abs(e[0] / e[1] - 0.6 / 0.4) <= 1e-6 * 1.5


def test_energy_non_increasing_in_depth(absorbed):
    _, rec = absorbed
    prof = rec.energy_profile()
    assert np.all(np.diff(prof, axis=1) <= 1e-14 * prof[:, :1])


def test_absorption_needs_fresh_ensemble(absorbed):
    ens, _ = absorbed
    with pytest.raises(ProtocolError):
        run_absorption(ens, PulseSpec(), T_ABS)


def test_weak_threshold_note(grid):
    ens = init_ground_state(5, grid, optical_depth=1.0)
    _, rec = run_absorption(ens, PulseSpec(peak=0.1), T_ABS)
    assert rec.notes and "weak-field threshold" in rec.notes[0]


def test_stability_bound(grid):
    ens = init_ground_state(5, grid, optical_depth=1.0)
    with pytest.raises(ConfigError, match="dt"):
        run_absorption(ens, PulseSpec(), -15 + 0.06 * np.arange(100))


# storage operations -----------------------------------------------------------

def test_reversal_rephases(absorbed):
    ens, _ = absorbed
    out = free_evolution(reverse_detunings(free_evolution(ens, 3.7)), 3.7)
    np.testing.assert_allclose(out.forward, ens.forward, rtol=0, atol=1e-14 * np.abs(ens.forward).max())


def test_double_reversal_warns_and_restores(absorbed):
    ens, _ = absorbed
    once = reverse_detunings(ens)
    with pytest.warns(UserWarning, match="twice"):
        twice = reverse_detunings(once)
    assert twice.detuning_sign == 1
    np.testing.assert_array_equal(twice.detunings, ens.detunings)


def test_zero_detuning_class_unaffected(absorbed):
    ens, _ = absorbed
    mid = ens.grid.n_classes // 2
    a = free_evolution(ens, 2.0)
    b = free_evolution(reverse_detunings(ens), 2.0)
    np.testing.assert_array_equal(a.forward[:, :, mid], b.forward[:, :, mid])


def test_phase_matching_bookkeeping(absorbed, grid):
    ens, _ = absorbed
    pm = apply_phase_matching(ens)
    assert not pm.forward.any()
    np.testing.assert_array_equal(pm.backward, ens.forward)
    assert pm.phase_matched
    ground = init_ground_state(4, grid)
    g2 = apply_phase_matching(ground)
    assert not g2.forward.any() and not g2.backward.any()
    with pytest.raises(ProtocolError):
        apply_phase_matching(ens, FORWARD)


# retrieval ------------------------------------------------------------------------

def stored(ens, direction):
    s = reverse_detunings(free_evolution(ens, 5.0))
    return apply_phase_matching(s) if direction == BACKWARD else s


def test_retrieval_contracts(absorbed):
    ens, _ = absorbed
    rev = reverse_detunings(ens)
    with pytest.raises(ProtocolError):
        run_retrieval(rev, BACKWARD, T_RET)
    with pytest.raises(ProtocolError):
        run_retrieval(apply_phase_matching(rev), FORWARD, T_RET)
    with pytest.raises(ConfigError):
        run_retrieval(rev, "sideways", T_RET)
    with pytest.warns(UserWarning, match="without reversed"):
        run_retrieval(ens, FORWARD, T_RET)


def test_backward_efficiency(absorbed):
    ens, rec_abs = absorbed
    rec = run_retrieval(stored(ens, BACKWARD), BACKWARD, T_RET)
    eff = spectral_energy(rec.exit_series, rec.dt) / spectral_energy(rec_abs.entry_series, rec.dt)
    np.testing.assert_allclose(eff, (1 - math.exp(-4.5)) ** 2, atol=0.02)
    # exit face of a backward emission is z = 0
    np.testing.assert_array_equal(rec.exit_series, rec.z0_series)


def test_forward_efficiency_depth_two(grid):
    ens = init_ground_state(100, grid, optical_depth=2.0)
    ens, rec_abs = run_absorption(ens, PulseSpec(), T_ABS)
    rec = run_retrieval(stored(ens, FORWARD), FORWARD, T_RET)
    eff = spectral_energy(rec.exit_series, rec.dt).sum() / spectral_energy(rec_abs.entry_series, rec.dt).sum()
    assert abs(eff - (2 / math.e) ** 2) <= 0.02


def test_forward_interior_maximum_near_depth_two(absorbed):
    ens, rec_abs = absorbed
    rec = run_retrieval(stored(ens, FORWARD), FORWARD, T_RET)
    prof = rec.energy_profile().sum(axis=0)
    du = rec.z[1] - rec.z[0]
    assert abs(rec.z[np.argmax(prof)] - 2.0) <= du
    # causality: interior energy at u is the exit efficiency of a depth-u medium
    e_in = spectral_energy(rec_abs.entry_series, rec.dt).sum()
    assert prof.max() / e_in == pytest.approx((2 / math.e) ** 2, abs=0.01)


def test_skipping_phase_matching_gives_forward_physics(absorbed):
    ens, rec_abs = absorbed
    rec = run_retrieval(stored(ens, FORWARD), FORWARD, T_RET)
    eff = spectral_energy(rec.exit_series, rec.dt).sum() / spectral_energy(rec_abs.entry_series, rec.dt).sum()
    want = analytic.gamma_forward(4.5) ** 2
    assert abs(eff - want) <= 0.01
    assert abs(eff - analytic.gamma_backward(4.5) ** 2) > 0.5


def test_numerical_failure_names_depth(absorbed):
    ens, _ = absorbed
    bad = stored(ens, BACKWARD)
    bad.backward[0, 40, 3] = np.nan
    with pytest.raises(NumericalError, match="depth node"):
        run_retrieval(bad, BACKWARD, T_RET)


def test_reversing_twice_matches_never_reversing(absorbed):
    ens, _ = absorbed
    base = free_evolution(ens, 5.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = run_retrieval(base, FORWARD, T_RET)
        b = run_retrieval(reverse_detunings(reverse_detunings(base)), FORWARD, T_RET)
    np.testing.assert_array_equal(a.omega, b.omega)
