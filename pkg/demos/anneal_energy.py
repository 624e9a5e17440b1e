"""Energy left after the annealing ramp, for a single disorder realization.

Slow ramps end close to the ground-state energy, fast ramps close to zero
(the energy of the untouched x-polarized state).

    python demos/anneal_energy.py [N] [seed]
"""

import sys

import numpy as np

from xyanneal.geometry import DISORDER_PRESETS, sample_disordered
from xyanneal.operators import XYModel
from xyanneal.protocols import CYCLE, in_medium_units, scan_energy
from xyanneal.spectra import ground_state_energy

n = int(sys.argv[1]) if len(sys.argv) > 1 else 8
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0

_, cm, _ = sample_disordered(n, DISORDER_PRESETS["weak"], seed)
model = XYModel(in_medium_units(cm))
eg = ground_state_energy(model)
print(f"N = {n}, seed = {seed}, ground-state energy per spin {eg:.4f} J_med")

speeds = np.logspace(-2, 2, 9)
for pt in scan_energy(model, 2.4, speeds, probe=0.0, ground_energy=eg):
    print(f"  v_r = {pt.ramp_speed:8.3f}  t_r = {2.4 / pt.ramp_speed / CYCLE:7.2f} cycles  "
          f"eps/|eps_g| = {pt.epsilon_over_ground:+.3f}")
