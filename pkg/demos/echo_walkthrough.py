"""Store and recall a weak pulse, one protocol step at a time."""
import numpy as np

from crib_memory import metrics
from crib_memory.config import RunSpec
from crib_memory.medium import build_detuning_grid, init_ground_state
from crib_memory.propagation import (BACKWARD, PulseSpec, apply_phase_matching, free_evolution,
                                     reverse_detunings, run_absorption, run_retrieval)

spec = RunSpec(pulse=PulseSpec(s_L=0.6, s_R=0.4))
grid = build_detuning_grid(spec.broadening.profile, spec.broadening.n_classes, spec.numerics.window)
medium = init_ground_state(spec.medium.n_z, grid, optical_depth=spec.medium.optical_depth)

# absorption: the pulse enters at z = 0 and is mostly gone by the far face
medium, absorbed = run_absorption(medium, spec.pulse, spec.absorption_times())
inten = metrics.normalized_intensity(absorbed)
k = np.argmin(np.abs(absorbed.t - spec.pulse.center))
print("I13, I23 at the entry face, pulse peak:", inten[0, 0, k], inten[1, 0, k])
left = absorbed.energy_profile().sum(axis=0)
print("energy left at the far face: %.4f (Beer law %.4f)" % (left[-1] / left[0], np.exp(-4.5)))

# storage: free dephasing, then flip every detuning and swap the wave vector
stored = free_evolution(medium, spec.protocol.storage_time)
stored = apply_phase_matching(reverse_detunings(stored), BACKWARD)

# retrieval: the echo leaves through z = 0, travelling backwards
echo = run_retrieval(stored, BACKWARD, spec.retrieval_times(), absorbed.reference_intensity)
eff = metrics.efficiency(absorbed.entry_series, echo.exit_series, echo.dt)
print("efficiency per channel:", eff, " closed form:", (1 - np.exp(-4.5)) ** 2)

# the echo is the time-reversed input
t = spec.retrieval_times()
ref = np.sum(np.abs(spec.pulse.envelope(-t)) ** 2, axis=0)
out = np.sum(np.abs(echo.exit_series) ** 2, axis=0)
print("overlap with the reversed input: %.6f" % metrics.time_reversal_overlap(out, ref))
print("echo peak at t = %.2f" % t[np.argmax(out)])
