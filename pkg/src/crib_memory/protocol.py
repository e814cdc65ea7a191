"""Protocol orchestration and serialization of run results.

One run is: absorption, field-free storage gap, detuning reversal, phase
matching (backward only), deterministic level phases, phase noise,
retrieval, metrics.  Absorption is kept separate from the rest so that
several retrieval variants can share one stored ensemble.
"""
from __future__ import annotations

import csv
import json
import math
import os
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytic, metrics
from .config import SCHEMA_VERSION, RunSpec
from .errors import NumericalError
from .medium import EnsembleState, QubitState, build_detuning_grid, init_ground_state
from .noise import apply_level_phases, apply_phase_noise
from .propagation import (BACKWARD, StageRecord, apply_phase_matching, free_evolution,
                          reverse_detunings, run_absorption, run_retrieval)


@dataclass(eq=False)
class StoredPulse:
    """Ensemble right after absorption, together with the absorption record."""

    spec: RunSpec
    ensemble: EnsembleState
    record: StageRecord


@dataclass(eq=False)
class RunResult:
    spec: RunSpec
    absorption: StageRecord
    retrieval: StageRecord
    diagnostics: metrics.RunDiagnostics
    transfer: np.ndarray
    summary: dict = field(default_factory=dict)

    @property
    def records(self):
        return [self.absorption, self.retrieval]


def absorb(spec: RunSpec) -> StoredPulse:
    """Build the medium and run the absorption stage."""
    grid = build_detuning_grid(spec.broadening.profile, spec.broadening.n_classes,
                               spec.numerics.window)
    ensemble = init_ground_state(spec.medium.n_z, grid, spec.numerics.mode,
                                 spec.medium.optical_depth)
    ensemble, record = run_absorption(ensemble, spec.pulse, spec.absorption_times(),
                                      spec.numerics.weak_field_threshold)
    return StoredPulse(spec, ensemble, record)


def _prepare_retrieval(spec: RunSpec, ensemble: EnsembleState, threads: int) -> EnsembleState:
    state = free_evolution(ensemble, spec.protocol.storage_time)
    state = reverse_detunings(state)
    if spec.protocol.phase_matching:
        state = apply_phase_matching(state, BACKWARD)
    state = apply_level_phases(state, spec.deterministic_phases)
    return apply_phase_noise(state, spec.noise, threads)


def _finite(x):
    return None if x is None or not math.isfinite(x) else float(x)


def retrieve(spec: RunSpec, stored: StoredPulse, threads: int = 1) -> RunResult:
    """Run everything after absorption with the protocol settings of ``spec``.

    ``spec`` may differ from ``stored.spec`` only in the protocol, noise and
    phase sections.
    """
    state = _prepare_retrieval(spec, stored.ensemble, threads)
    times = spec.retrieval_times()
    rec = run_retrieval(state, spec.protocol.direction, times, stored.record.reference_intensity)
    absorb_rec = stored.record
    dt = rec.dt
    inp = absorb_rec.entry_series
    out = rec.exit_series
    with np.errstate(over="ignore"):
        e_in = np.asarray(metrics.spectral_energy(inp, dt))
        e_out = np.asarray(metrics.spectral_energy(out, dt))
        e_prof = rec.energy_profile()
    if not (np.all(np.isfinite(e_in)) and np.all(np.isfinite(e_prof))):
        raise NumericalError("field energy overflows; reduce the pulse peak")
    diag = metrics.RunDiagnostics(weak_field_threshold=spec.numerics.population_threshold)
    with np.errstate(invalid="ignore", divide="ignore"):
        diag.efficiency_exit = [_finite(v) for v in e_out / e_in]
        diag.efficiency_max_over_z = [_finite(v) for v in e_prof.max(axis=1) / e_in]
    diag.efficiency_total = float(e_out.sum() / e_in.sum())
    diag.efficiency_total_max_over_z = float(e_prof.sum(axis=0).max() / e_in.sum())
    transfer = metrics.transfer_coefficients(inp, out, dt)
    qubit = QubitState.from_split(spec.pulse.s_L, spec.pulse.s_R, spec.pulse.theta)
    if np.any(transfer != 0):
        _, cond, uncond = metrics.qubit_fidelity(qubit, transfer[0], transfer[1])
        diag.conditional_fidelity, diag.unconditional_fidelity = cond, uncond
        if np.all(transfer != 0):
            diag.relative_phase = metrics.relative_phase(transfer[0], transfer[1])
    ref = np.sum(np.abs(spec.pulse.envelope(-times)) ** 2, axis=0)
    diag.time_reversal_overlap = metrics.time_reversal_overlap(np.sum(np.abs(out) ** 2, axis=0), ref)
    peaks = np.maximum(stored.ensemble.peaks, rec.final_state.peaks)
    diag.max_sigma11, diag.max_sigma22, diag.max_sigma12, diag.max_trace_error = map(float, peaks)
    diag.notes = list(absorb_rec.notes) + list(rec.notes)
    result = RunResult(spec, absorb_rec, rec, diag, transfer)
    result.summary = build_summary(result)
    return result


def run_protocol(spec: RunSpec, threads: int = 1) -> RunResult:
    """Execute the complete protocol described by ``spec``."""
    return retrieve(spec, absorb(spec), threads)


def analytic_predictions(spec: RunSpec) -> dict:
    """Narrowband closed-form efficiencies for the run's depth and noise."""
    n = spec.noise
    d = spec.medium.optical_depth
    out = {}
    for ch, name in ((1, "L"), (2, "R")):
        if spec.protocol.direction == BACKWARD:
            out[name] = {"exit": analytic.noisy_efficiency(d, n.k1, n.k2, n.k3, "backward", ch)}
            out[name]["max_over_z"] = out[name]["exit"]
        else:
            out[name] = {
                "exit": analytic.noisy_efficiency(d, n.k1, n.k2, n.k3, "forward", ch, forward="exit"),
                "max_over_z": analytic.noisy_efficiency(d, n.k1, n.k2, n.k3, "forward", ch, forward="max"),
            }
    return out


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    return value


def build_summary(result: RunResult) -> dict:
    spec, diag = result.spec, result.diagnostics
    return _jsonable({
        "schema_version": SCHEMA_VERSION,
        "seed": spec.noise.seed,
        "parameters": spec.to_dict(),
        "efficiency": {
            "direction": spec.protocol.direction,
            "exit": {"L": diag.efficiency_exit[0], "R": diag.efficiency_exit[1],
                     "total": diag.efficiency_total},
            "max_over_z": {"L": diag.efficiency_max_over_z[0], "R": diag.efficiency_max_over_z[1],
                           "total": diag.efficiency_total_max_over_z},
            "analytic": analytic_predictions(spec),
        },
        "fidelity": {
            "conditional": diag.conditional_fidelity,
            "unconditional": diag.unconditional_fidelity,
            "relative_phase": diag.relative_phase,
            "transfer": {"L": [result.transfer[0].real, result.transfer[0].imag],
                         "R": [result.transfer[1].real, result.transfer[1].imag]},
        },
        "diagnostics": {
            "max_sigma11": diag.max_sigma11,
            "max_sigma22": diag.max_sigma22,
            "max_sigma12": diag.max_sigma12,
            "max_trace_error": diag.max_trace_error,
            "population_threshold": diag.weak_field_threshold,
            "weak_field_pass": diag.weak_field_pass,
            "mode": spec.numerics.mode,
            "time_reversal_overlap": diag.time_reversal_overlap,
            "notes": diag.notes,
        },
    })


def dumps_summary(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True) + "\n"


def write_stage_grid(record: StageRecord, path: str):
    """CSV with columns ``t, z, I13, I23``; one row per (z, t) node, z-major."""
    inten = metrics.normalized_intensity(record)
    n_z, n_t = record.z.size, record.t.size
    table = np.column_stack([
        np.tile(record.t, n_z),
        np.repeat(record.z, n_t),
        inten[0].ravel(),
        inten[1].ravel(),
    ])
    np.savetxt(path, table, delimiter=",", header="t,z,I13,I23", comments="", fmt="%.10e")


class _Staging:
    """Write into a scratch directory and move files into place on success."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir

    def __enter__(self):
        os.makedirs(self.out_dir, exist_ok=True)
        self.tmp = tempfile.mkdtemp(prefix=".partial-", dir=self.out_dir)
        return self.tmp

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None:
                for name in sorted(os.listdir(self.tmp)):
                    os.replace(os.path.join(self.tmp, name), os.path.join(self.out_dir, name))
        finally:
            shutil.rmtree(self.tmp, ignore_errors=True)
        return False


def cmd_run(spec: RunSpec, out_dir: str | None = None, threads: int = 1) -> dict:
    """Run the protocol and write ``summary.json`` plus one CSV grid per stage."""
    out_dir = out_dir or spec.output.directory
    with _Staging(out_dir) as tmp:
        result = run_protocol(spec, threads)
        if spec.output.write_grids:
            for rec in result.records:
                write_stage_grid(rec, os.path.join(tmp, f"{rec.stage}.csv"))
        with open(os.path.join(tmp, "summary.json"), "w", encoding="utf-8") as fh:
            fh.write(dumps_summary(result.summary))
    return result.summary


SWEEP_COLUMNS = ("optical_depth", "k3", "direction", "efficiency_exit", "efficiency_max_over_z",
                 "analytic_exit", "analytic_max_over_z")


def _sweep_depth(spec: RunSpec, depth: float, k3_values) -> list:
    base = spec.updated(medium={"optical_depth": float(depth)})
    stored = absorb(base)
    rows = []
    for k3 in k3_values:
        run = retrieve(base.updated(noise={"k3": float(k3)}), stored)
        pred = run.summary["efficiency"]["analytic"]
        # channel-weighted analytic value
        s = (spec.pulse.s_L, spec.pulse.s_R)
        a_exit = s[0] * pred["L"]["exit"] + s[1] * pred["R"]["exit"]
        a_max = s[0] * pred["L"]["max_over_z"] + s[1] * pred["R"]["max_over_z"]
        rows.append((float(depth), float(k3), spec.protocol.direction,
                     run.diagnostics.efficiency_total, run.diagnostics.efficiency_total_max_over_z,
                     a_exit, a_max))
    return rows


def sweep(spec: RunSpec, depths, k3_values, threads: int = 1) -> list:
    """Efficiency table over optical depth x ground-level noise width.

    Points sharing a depth reuse one absorption; depths run in parallel
    when ``threads > 1``.  Row order is fixed by the input axes.
    """
    depths = list(depths)
    k3_values = list(k3_values)
    if not depths or not k3_values:
        raise ValueError("sweep axes must be non-empty")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(lambda d: _sweep_depth(spec, d, k3_values), depths))
    else:
        blocks = [_sweep_depth(spec, d, k3_values) for d in depths]
    return [row for block in blocks for row in block]


def write_table(path: str, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def cmd_sweep(spec: RunSpec, depths, k3_values, out_dir: str | None = None, threads: int = 1):
    out_dir = out_dir or spec.output.directory
    with _Staging(out_dir) as tmp:
        rows = sweep(spec, depths, k3_values, threads)
        write_table(os.path.join(tmp, "sweep.csv"), SWEEP_COLUMNS, rows)
    return rows


def analytic_tables(spec: RunSpec) -> dict:
    """Closed-form curves: retrieval coefficients, K(k), depth-optimized
    efficiencies, noisy efficiency versus depth and the phase-fidelity surface."""
    profile = spec.broadening.profile
    depths = np.round(np.linspace(0.0, 10.0, 101), 10)
    gamma_rows = []
    for d in depths:
        gb = analytic.gamma_backward(d)
        gf = analytic.gamma_forward(d)
        eb = analytic.pulse_averaged(lambda w: analytic.gamma_backward(d, w, profile, "full"))
        ef = analytic.pulse_averaged(lambda w: analytic.gamma_forward(d, w, profile, "full"))
        gamma_rows.append((float(d), gb, gf, gb * gb, gf * gf, eb, ef))
    ks = np.round(np.linspace(0.0, 30.0, 301), 10)
    k_rows = [(float(k), float(analytic.dephasing_factor(k))) for k in ks]
    max_rows = []
    for k in ks:
        b, f = analytic.efficiency_max_curve(float(k))
        max_rows.append((float(k), b, f))
    noisy_rows = []
    for k3 in (0.0, 1.0, 5.0, 20.0, math.inf):
        for d in depths:
            noisy_rows.append((float(d), k3,
                               analytic.noisy_efficiency(d, k3=k3, direction="backward"),
                               analytic.noisy_efficiency(d, k3=k3, direction="forward", forward="exit"),
                               analytic.noisy_efficiency(d, k3=k3, direction="forward", forward="max")))
    fid_rows = []
    for s_L in np.round(np.linspace(0.0, 1.0, 11), 10):
        for phi in np.round(np.linspace(0.0, 2.0 * math.pi, 73), 12):
            fid_rows.append((float(s_L), float(phi), analytic.phase_fidelity(s_L, 1.0 - s_L, phi)))
    return {
        "retrieval_coefficients.csv": (("optical_depth", "gamma_backward", "gamma_forward",
                                        "efficiency_backward", "efficiency_forward",
                                        "efficiency_backward_pulse", "efficiency_forward_pulse"),
                                       gamma_rows),
        "dephasing_factor.csv": (("k", "K"), k_rows),
        "max_efficiency.csv": (("k3", "backward", "forward"), max_rows),
        "noisy_efficiency.csv": (("optical_depth", "k3", "backward", "forward_exit", "forward_max"),
                                 noisy_rows),
        "phase_fidelity.csv": (("s_L", "phi", "fidelity"), fid_rows),
    }


def cmd_analytic(spec: RunSpec, out_dir: str | None = None) -> list:
    out_dir = out_dir or spec.output.directory
    tables = analytic_tables(spec)
    with _Staging(out_dir) as tmp:
        for name, (cols, rows) in tables.items():
            write_table(os.path.join(tmp, name), cols, rows)
    return sorted(tables)
