"""ZFA versus FA susceptibility for a small ensemble.

A quick, small version of the hysteresis sweep: six spins, a handful of
realizations per regime.  Expect the two protocols to agree in weak
disorder and to split at slow ramps in strong disorder; with so few
realizations the error bars are large.

    python demos/hysteresis.py [N] [realizations]
"""

import sys

from xyanneal.ensemble import EnsembleConfig, SweepParams, run_ensemble
from xyanneal.geometry import DISORDER_PRESETS

n = int(sys.argv[1]) if len(sys.argv) > 1 else 6
count = int(sys.argv[2]) if len(sys.argv) > 2 else 8
speeds = (0.05, 0.3, 1.5, 20.0)

for regime in ("weak", "strong"):
    s = run_ensemble(EnsembleConfig(7, n, count, DISORDER_PRESETS[regime], SweepParams("hysteresis", speeds)))
    st = s.stats
    sem = s.combined_sem("chi_zfa", "chi_fa")
    print(f"{regime} disorder, N = {n}, {s.n_effective} realizations")
    print("     v_r   eps/|eg|   chi_ZFA   chi_FA    gap     SEM")
    for k, v in enumerate(speeds):
        zfa, fa = st["chi_zfa"].mean[k], st["chi_fa"].mean[k]
        print(f"  {v:6.2f}   {st['eps_over_mean_eg'].mean[k]:+.3f}   {zfa:+.3f}    {fa:+.3f}   "
              f"{fa - zfa:+.3f}  {sem[k]:.3f}")
