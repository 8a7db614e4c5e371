"""Collision probability against the number of vehicles at high intensity.

Both curves grow with N. The improvement column is baseline over proposed,
so values below one mean the proposed model predicts more collisions.
"""

from nrv2x import preset_config
from nrv2x.baseline import baseline_collision
from nrv2x.coupled import solve
from nrv2x.sweep import baseline_params

cfg = preset_config("high")
print(f"{'N':>5} {'proposed':>10} {'baseline':>10} {'improvement':>12}")
for n in (10, 50, 100, 150):
    point = cfg.replace(n=n)
    prop = solve(point).p_col
    base = baseline_collision(baseline_params(point))
    print(f"{n:5d} {prop:10.3g} {base:10.3g} {base / prop if prop else float('inf'):12.2f}")
