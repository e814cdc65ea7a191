"""Polarization qubit through the memory: level phases and fidelity."""
import math

import numpy as np

from crib_memory import analytic
from crib_memory.config import RunSpec
from crib_memory.propagation import PulseSpec
from crib_memory.protocol import absorb, retrieve

base = RunSpec(pulse=PulseSpec(s_L=0.6, s_R=0.4))
stored = absorb(base)

print("phi1     rel. phase   conditional   closed form   unconditional")
for phi in np.linspace(0, math.pi, 5):
    run = retrieve(base.updated(deterministic_phases={"phi1": float(phi)}), stored)
    d = run.diagnostics
    want = analytic.phase_fidelity(0.6, 0.4, phi)
    print(f"{phi:5.3f}    {d.relative_phase:+.4f}      {d.conditional_fidelity:.6f}      "
          f"{want:.6f}      {d.unconditional_fidelity:.6f}")

# a shift of the ground level multiplies both coherences alike: nothing changes
low = retrieve(base.updated(deterministic_phases={"phi3": 2.0}), stored).diagnostics
ref = retrieve(base, stored).diagnostics
print("\nground-level phase: efficiency change %.1e, fidelity change %.1e"
      % (abs(low.efficiency_total - ref.efficiency_total),
         abs(low.conditional_fidelity - ref.conditional_fidelity)))

# random phase noise lowers the efficiency but leaves the state intact when
# both channels see the same noise; unequal noise bends the state as well
for noise in ({"k3": 5.0}, {"k1": 2.0}):
    d = retrieve(base.updated(noise=noise), stored).diagnostics
    print(f"noise {noise}: efficiency {d.efficiency_total:.4f}, "
          f"conditional {d.conditional_fidelity:.6f}, unconditional {d.unconditional_fidelity:.4f}")
