"""Collision probability against the reservation interval at three densities.

The proposed model decreases steadily as the interval grows. The baseline is
nearly flat above 20 ms because its reselection-counter range shrinks in step
with the candidate pool, so the product of the two barely moves.
"""

import numpy as np

from nrv2x import preset_config
from nrv2x.baseline import BaselineParams, baseline_collision
from nrv2x.coupled import solve
from nrv2x.scheduler import rc_bounds
from nrv2x.sweep import baseline_params

RRIS = (10, 20, 50, 100)

print(f"{'rho/km':>7} {'RRI ms':>7} {'proposed':>10} {'baseline':>10} {'base@RC(20ms)':>14}")
rc20 = float(np.mean(rc_bounds(20)))
for rho in (50.0, 100.0, 150.0):
    for rri in RRIS:
        cfg = preset_config("high", rri_ms=float(rri), density_per_km=rho)
        bp = baseline_params(cfg)
        held = BaselineParams(bp.n, bp.p_rk, rc20, bp.csr_t, bp.rri, bp.t1)
        print(f"{rho:7.0f} {rri:7d} {solve(cfg).p_col:10.3g} "
              f"{baseline_collision(bp):10.3g} {baseline_collision(held):14.3g}")
