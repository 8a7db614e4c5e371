"""Fixed-point coupling of the generator, queue and scheduler chains."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig
from .errors import InfeasibleScenario, InvalidParams, NoConvergence, PoolExhausted
from .queue_model import QueueParams, QueueSteadyState, mean_latency, queue_steady_state
from .scheduler import (
    PoolGeometry,
    SchedulerParams,
    SchedulerSteadyState,
    estimate_p_csr,
    estimate_p_re,
    scheduler_closed_form,
)
from .traffic import (
    CamParams,
    DenmParams,
    GeneratorSteadyState,
    QueueInputs,
    cam_closed_form,
    denm_closed_form,
    queue_inputs,
)

log = logging.getLogger(__name__)

P_QE_CEILING = 1.0 - 1e-12
OSCILLATION_WINDOW = 10
VARIABLES = ("p_s", "p_qe", "p_arr", "p_re", "p_csr")


@dataclass(frozen=True)
class CollisionResult:
    p_col: float
    p_c: float
    truncated_at: int | None = None


@dataclass
class CoupledSolution:
    p_s: float
    p_qe: float
    p_arr: float
    p_re: float
    p_csr: float
    cam_ss: GeneratorSteadyState
    denm_ss: GeneratorSteadyState | None
    queue_inputs: QueueInputs
    queue_ss: QueueSteadyState
    sched_ss: SchedulerSteadyState
    p_col: float
    latency_slots: float
    iterations: int
    residual: float
    converged: bool
    damping: float
    flags: list = field(default_factory=list)

    def latency_ms(self, slots_per_ms: int) -> float:
        return self.latency_slots / slots_per_ms

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, v) for v in VARIABLES])


def collision_probability(
    phi_10: float,
    t2: int,
    geom: PoolGeometry,
    p_rc: float,
    exponent: str = "interferers",
) -> CollisionResult:
    """Proposed-model collision probability from the reselection-state mass.

    ``p_c`` is the chance that an interferer reaches a reselection within the
    window; each such interferer lands on the tagged resource with probability
    ``p_c (1-p_rc)/(CSR_t - N)``. ``exponent="interferers"`` raises the miss
    probability to ``N-1``; ``"printed"`` uses ``N``. Product factors stop at
    the first ``i`` with ``phi_10 * i >= 1``.
    """
    n = geom.n
    if geom.csr_t <= n:
        raise PoolExhausted(f"csr_t={geom.csr_t} does not exceed n={n}")
    if exponent not in ("interferers", "printed"):
        raise ValueError(f"unknown exponent {exponent!r}")
    power = n - 1 if exponent == "interferers" else n
    i = np.arange(1, t2 + 1)
    valid = phi_10 * i < 1.0
    truncated = None
    if not valid.all():
        truncated = int(np.argmin(valid))
        i = i[:truncated]
    factors = np.clip(1.0 - phi_10 / (1.0 - phi_10 * i), 0.0, 1.0)
    p_c = float(1.0 - np.prod(factors))
    if power == 0 or p_rc == 1.0:
        return CollisionResult(0.0, p_c, truncated)
    hit = p_c * (1.0 - p_rc) / (geom.csr_t - n)
    return CollisionResult(float(1.0 - (1.0 - hit) ** power), p_c, truncated)


def channel_occupancy(cfg: ScenarioConfig, sched: SchedulerSteadyState) -> float:
    """Share of the CSRs in one reservation period held by the other vehicles."""
    holding = 1.0 - sched.phi_idle - float(sched.phi_w.sum())
    per_period = cfg.csr_per_slot * cfg.rri
    return float(min(1.0, max(0.0, (cfg.n_vehicles - 1) * holding / per_period)))


class _Model:
    """One evaluation of the coupled map ``F`` with every intermediate kept."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.geom = cfg.geometry()
        self.r_l, self.r_u = cfg.rc_range

    def __call__(self, x: np.ndarray) -> dict:
        cfg = self.cfg
        p_s, p_qe, p_arr, p_re, p_csr = (float(v) for v in x)
        cam = cam_closed_form(CamParams(cfg.t_c, p_s))
        denm = None
        if cfg.has_denm:
            denm = denm_closed_form(
                DenmParams(cfg.t_avg, cfg.t_d, cfg.k, p_s, cfg.delta_t_d, cfg.idle_reading)
            )
        inputs = queue_inputs(cam, denm, p_s)
        queue = queue_steady_state(QueueParams(inputs, cfg.queue_capacity))
        sp = SchedulerParams(
            t1=cfg.t1,
            t2=cfg.t2,
            t3=cfg.t3,
            r_l=self.r_l,
            r_u=self.r_u,
            p_rc=cfg.keep_probability,
            p_qe=min(queue.p_qe, P_QE_CEILING),
            p_arr=inputs.p_arr,
            p_csr=p_csr,
            p_re=p_re if cfg.reevaluation else 0.0,
            rri=cfg.rri,
        )
        sched = scheduler_closed_form(sp, cfg.scheduler_form)
        if not cfg.reevaluation:
            new_re = 0.0
        elif cfg.p_re is not None:
            new_re = cfg.p_re
        else:
            new_re = estimate_p_re(self.geom, sched.phi_10, cfg.keep_probability)
        if cfg.p_csr is not None:
            new_csr = cfg.p_csr
        else:
            new_csr = estimate_p_csr(self.geom, channel_occupancy(cfg, sched))
        fx = np.array([sched.p_s, queue.p_qe, inputs.p_arr, new_re, new_csr])
        return dict(fx=fx, cam=cam, denm=denm, inputs=inputs, queue=queue, sched=sched)

    def start(self) -> np.ndarray:
        cfg = self.cfg
        p_re = 0.0 if not cfg.reevaluation else (cfg.p_re if cfg.p_re is not None else 0.0)
        p_csr = 1.0 if cfg.p_csr is None else cfg.p_csr
        p_arr = 1.0 / cfg.t_c
        return np.array([0.9, 0.5, p_arr, p_re, p_csr])


def solve(cfg: ScenarioConfig, strict: bool = False) -> CoupledSolution:
    """Damped fixed-point solve of the coupled chains.

    Iterates ``x <- (1-lam) x + lam F(x)`` until ``max |F(x) - x| < cfg.tol``.
    ``lam`` starts at ``cfg.damping`` and halves whenever the scheduling
    probability update alternates in sign for ten consecutive steps. A run that
    hits ``cfg.max_iter`` comes back with ``converged=False`` unless ``strict``
    is set, in which case :class:`NoConvergence` is raised.
    """
    if cfg.t2 - cfg.t1 < 2:
        raise InfeasibleScenario("selection window shorter than two slots")
    cfg.validate()
    try:
        model = _Model(cfg)
    except InvalidParams as exc:
        raise InfeasibleScenario(str(exc)) from exc
    lam = cfg.damping
    x = model.start()
    signs: list[float] = []
    out = model(x)
    residual = float(np.max(np.abs(out["fx"] - x)))
    it = 0
    while residual >= cfg.tol and it < cfg.max_iter:
        step = out["fx"] - x
        signs.append(np.sign(step[0]))
        if len(signs) >= OSCILLATION_WINDOW:
            recent = signs[-OSCILLATION_WINDOW:]
            if all(a * b < 0 for a, b in zip(recent, recent[1:])):
                lam *= 0.5
                signs.clear()
                log.debug("oscillation detected, damping reduced to %g", lam)
        x = np.clip(x + lam * step, 0.0, 1.0)
        x[0] = max(x[0], 1e-12)
        out = model(x)
        residual = float(np.max(np.abs(out["fx"] - x)))
        it += 1
    converged = residual < cfg.tol
    if not converged and strict:
        raise NoConvergence(f"residual {residual:.3e} after {it} iterations")

    sched = out["sched"]
    flags = []
    if not converged:
        flags.append("no-convergence")
    col = collision_probability(
        sched.phi_10, cfg.t2, model.geom, cfg.keep_probability, cfg.collision_exponent
    )
    if col.truncated_at is not None:
        flags.append(f"p_c-product-truncated-at-{col.truncated_at}")
    inputs = out["inputs"]
    lat = mean_latency(out["queue"], inputs.alpha, cfg.eta_value)
    if out["cam"].discrepancies:
        flags.append("cam-normalization-defect")
    return CoupledSolution(
        p_s=float(x[0]),
        p_qe=float(x[1]),
        p_arr=float(x[2]),
        p_re=float(x[3]),
        p_csr=float(x[4]),
        cam_ss=out["cam"],
        denm_ss=out["denm"],
        queue_inputs=inputs,
        queue_ss=out["queue"],
        sched_ss=sched,
        p_col=col.p_col,
        latency_slots=lat,
        iterations=it,
        residual=residual,
        converged=converged,
        damping=lam,
        flags=flags,
    )


def latency(sol: CoupledSolution, eta: float) -> float:
    return mean_latency(sol.queue_ss, sol.queue_inputs.alpha, eta)
