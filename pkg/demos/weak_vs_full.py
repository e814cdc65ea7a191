"""Linear coherence equations against the full three-level density matrix."""
import math

import numpy as np

from crib_memory.config import RunSpec
from crib_memory.propagation import PulseSpec
from crib_memory.protocol import absorb, retrieve

for peak in (1e-3, 1e-2, 0.3):
    spec = RunSpec(pulse=PulseSpec(peak=peak, s_L=0.6, s_R=0.4)).updated(
        medium={"n_z": 40}, numerics={"weak_field_threshold": 1.0})
    weak = retrieve(spec, absorb(spec))
    full_spec = spec.updated(numerics={"mode": "full"})
    full = retrieve(full_spec, absorb(full_spec))
    a, b = weak.retrieval.exit_series, full.retrieval.exit_series
    l2 = np.linalg.norm(a - b) / np.linalg.norm(a)
    d = full.diagnostics
    print(f"peak {peak:g}: weak {weak.diagnostics.efficiency_total:.5f}, full {d.efficiency_total:.5f}, "
          f"relative L2 {l2:.2e}")
    # the resonant class absorbs a pulse area sqrt(2 pi) * peak
    print(f"    max sigma11 {d.max_sigma11:.3e} (small-area estimate {0.6 * 2 * math.pi * peak ** 2:.3e}), "
          f"max |sigma12| {d.max_sigma12:.3e}")
