"""Fast self-checks behind ``nrv2x check``: closed forms against exact chains."""

from __future__ import annotations

import numpy as np

from .baseline import BaselineParams, baseline_collision
from .config import preset_config
from .coupled import collision_probability, solve
from .dtmc import balance_residual, compare, steady_state
from .queue_model import QueueParams, queue_matrix, queue_steady_state
from .scheduler import PoolGeometry, SchedulerParams, check_against_matrix
from .traffic import (
    CamParams,
    DenmParams,
    QueueInputs,
    cam_closed_form,
    cam_matrix,
    denm_closed_form,
    denm_matrix,
)


def _generators():
    worst = 0.0
    for t_c in (4, 10, 20):
        for p_s in (0.1, 0.5, 0.9):
            ss = cam_closed_form(CamParams(t_c, p_s))
            oracle = steady_state(cam_matrix(CamParams(t_c, p_s)))
            worst = max([worst] + [r.abs_error for r in compare(ss.as_dict(), oracle, 0.0)])
    p = DenmParams(4, 8, 3, 0.4)
    oracle = steady_state(denm_matrix(p))
    worst = max([worst] + [r.abs_error for r in compare(denm_closed_form(p).as_dict(), oracle, 0.0)])
    return worst < 1e-9, f"max generator error {worst:.2e}"


def _queue():
    worst = 0.0
    for a0, a, b in ((0.3, 0.2, 0.5), (0.1, 0.4, 0.4), (0.6, 0.3, 0.2)):
        p = QueueParams(QueueInputs(a0, a, b, 0.0), 8)
        ss = queue_steady_state(p)
        m = queue_matrix(p)
        oracle = steady_state(m)
        worst = max(worst, float(np.max(np.abs(ss.phi - oracle.probs))))
        worst = max(worst, balance_residual(m, oracle))
    return worst < 1e-12, f"max queue error {worst:.2e}"


def _scheduler():
    bad = 0
    for t2, r_u, p_re in ((6, 2, 0.1), (9, 3, 0.3), (12, 4, 0.0)):
        p = SchedulerParams(1, t2, 2, 1, r_u, 0.4, 0.3, 0.2, 0.8, p_re, rri=t2)
        bad += len(check_against_matrix(p))
    return bad == 0, f"{bad} scheduler states off by more than 1e-8"


def _trivial():
    geom = PoolGeometry(n=1, window_slots=18)
    ok = baseline_collision(BaselineParams(1, 0.4, 10, 216, 20)) == 0.0
    ok &= collision_probability(0.01, 20, geom, 0.4).p_col == 0.0
    ok &= collision_probability(0.01, 20, PoolGeometry(n=50, window_slots=18), 1.0).p_col == 0.0
    ok &= float(cam_closed_form(CamParams(10, 1.0)).phi_txp.sum()) == 0.0
    return ok, "single vehicle and keep-always give zero collisions"


def _coupled():
    sol = solve(preset_config("low", density_per_km=50.0))
    return sol.converged, f"low-intensity solve: {sol.iterations} iterations, residual {sol.residual:.1e}"


CHECKS = {
    "generator closed forms": _generators,
    "queue balance": _queue,
    "scheduler closed form": _scheduler,
    "trivial cases": _trivial,
    "coupled convergence": _coupled,
}


def run_checks() -> list[tuple[str, bool, str]]:
    out = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
