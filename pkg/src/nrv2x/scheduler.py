"""Mode 2 semi-persistent scheduler chain with re-evaluation.

State labels:

* ``"idle"``          no reservation and nothing to select for;
* ``("w", j)``        selection window, ``j`` slots before the chosen resource;
* ``("s", i, j)``     reservation with counter value ``i``, ``j`` slots before
  the next reserved slot. ``("s", i, 0)`` is a scheduling opportunity.

A re-evaluation check in ``("w", j)`` succeeds with probability ``p_re`` and
moves the chain uniformly to one of the ``j - t3`` earlier window positions
that still leave ``t3`` slots of processing time. Positions ``j < max(2, t3+1)``
are never re-evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from .dtmc import DiscrepancyRecord, TransitionMatrix, compare, steady_state
from .errors import InvalidParams, InvalidWindow, OutOfRange

AGREEMENT_TOL = 1e-8

# deviations of the printed closed forms from the chain they describe
PRINTED_SOURCES = {
    "reselection-coefficient": "reselection coefficient uses P_qe where the chain moves with P_qne",
    "top-window-feed": "top window state fed with P_qne*P_qe*phi_10 instead of P_qne*P_RC*phi_10",
    "rc-level-scaling": "non-top RC levels divided by P_qne squared",
}


@dataclass(frozen=True)
class SchedulerParams:
    t1: int
    t2: int
    t3: int
    r_l: int
    r_u: int
    p_rc: float
    p_qe: float
    p_arr: float
    p_csr: float
    p_re: float
    rri: int | None = None

    def __post_init__(self):
        problems = []
        if self.t2 - self.t1 < 2:
            problems.append(f"selection window t2 - t1 = {self.t2 - self.t1} < 2")
        if self.t1 < 0:
            problems.append("t1 must be >= 0")
        if self.t3 < 1:
            problems.append("t3 must be >= 1")
        if not 1 <= self.r_l <= self.r_u:
            problems.append(f"need 1 <= r_l <= r_u, got ({self.r_l}, {self.r_u})")
        if self.rri is not None and self.rri < 1:
            problems.append("rri must be >= 1 slot")
        for name in ("p_rc", "p_qe", "p_arr", "p_csr", "p_re"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                problems.append(f"{name}={v} outside [0, 1]")
        if self.p_qe >= 1.0:
            problems.append("p_qe = 1 freezes every reselection counter")
        if problems:
            if any("window" in s for s in problems):
                raise InvalidWindow("; ".join(problems))
            raise InvalidParams("; ".join(problems))

    @property
    def p_qne(self) -> float:
        return 1.0 - self.p_qe

    @property
    def window(self) -> int:
        return self.t2 - self.t1

    @property
    def period(self) -> int:
        return self.t2 if self.rri is None else self.rri

    @property
    def n_rc(self) -> int:
        return self.r_u - self.r_l + 1

    def reevaluable(self, j: int) -> bool:
        return j >= max(2, self.t3 + 1)

    def printed_sources(self) -> list[str]:
        """Printed-form deviations that actually change the numbers for these params."""
        out = []
        if self.p_qe != self.p_qne and self.p_rc < 1.0 and self.p_csr > 0.0:
            out.append("reselection-coefficient")
        if self.p_qe != self.p_rc and self.p_qne > 0.0:
            out.append("top-window-feed")
        if self.p_qne != 1.0 and self.r_l < self.r_u:
            out.append("rc-level-scaling")
        return out


@dataclass
class SchedulerSteadyState:
    phi_idle: float
    phi_w: np.ndarray
    phi_sched: np.ndarray  # row i-1 holds counter value i
    virtual_flow: float = 0.0
    form: str = "consistent"
    discrepancies: list = field(default_factory=list)

    @property
    def p_s(self) -> float:
        return float(self.phi_sched[:, 0].sum())

    @property
    def phi_10(self) -> float:
        return float(self.phi_sched[0, 0])

    @property
    def total(self) -> float:
        return float(self.phi_idle + self.phi_w.sum() + self.phi_sched.sum())

    def as_dict(self) -> dict:
        d = {"idle": float(self.phi_idle)}
        d.update({("w", j): float(v) for j, v in enumerate(self.phi_w)})
        r_u, per = self.phi_sched.shape
        for i in range(r_u):
            for j in range(per):
                d[("s", i + 1, j)] = float(self.phi_sched[i, j])
        return d


def _window_masses(p: SchedulerParams, spread: float, top: float) -> tuple[np.ndarray, float]:
    """Window occupancy given the uniform entry flow and the extra top-state inflow.

    Re-evaluation only moves mass to lower positions, so one top-down sweep
    solves the window balance equations exactly. Returns the masses and the
    total re-evaluation outflow.
    """
    W = p.window
    phi = np.zeros(W)
    redistributed = np.zeros(W)
    reeval_out = 0.0
    for j in range(W - 1, -1, -1):
        inflow = spread / W + redistributed[j]
        if j == W - 1:
            inflow += top
        else:
            above = phi[j + 1]
            inflow += above * (1.0 - p.p_re) if p.reevaluable(j + 1) else above
        phi[j] = inflow
        if p.reevaluable(j) and p.p_re > 0.0:
            out = p.p_re * phi[j]
            reeval_out += out
            targets = j - p.t3
            redistributed[:targets] += out / targets
    return phi, reeval_out


def _level_throughput(p: SchedulerParams) -> np.ndarray:
    i = np.arange(1, p.r_u + 1)
    return np.where(i >= p.r_l, (p.r_u - i + 1) / p.n_rc, 1.0)


def scheduler_closed_form(p: SchedulerParams, form: str = "consistent") -> SchedulerSteadyState:
    """Closed-form steady state of the scheduler chain.

    ``form="consistent"`` uses the flow-balanced coefficients and reproduces the
    explicit chain exactly. ``form="printed"`` uses the published coefficients
    verbatim (see :data:`PRINTED_SOURCES`), normalizes, and records one
    discrepancy per state that moved relative to the consistent solution.
    """
    if form not in ("consistent", "printed"):
        raise ValueError(f"unknown form {form!r}")
    if p.p_csr <= 0.0:
        raise InvalidParams("p_csr must be positive for the closed form")
    qne, qe = p.p_qne, p.p_qe
    throughput = 1.0  # flow through the window exit, i.e. unnormalized phi_{w,0}
    phi_10 = throughput / qne
    idle = (1.0 - p.p_rc) * (1.0 / p.p_csr - 1.0) / (p.p_arr + qne * (1.0 - p.p_arr)) * throughput
    a = (qne + p.p_arr - qne * p.p_arr) * p.p_csr
    printed = form == "printed"
    b = (qe if printed else qne) * (1.0 - p.p_rc) * p.p_csr
    keep = qne * (qe if printed else p.p_rc) * phi_10
    spread = a * idle + b * phi_10
    phi_w, reeval_out = _window_masses(p, spread, keep)

    x = _level_throughput(p) * throughput
    sched = np.repeat((x / qne)[:, None], p.period, axis=1)
    if printed:
        mid = np.arange(1, p.r_u + 1)
        rows = (mid >= p.r_l) & (mid < p.r_u)
        sched[rows, 1:] = (x[rows] / qne**2)[:, None]

    total = idle + phi_w.sum() + sched.sum()
    ss = SchedulerSteadyState(
        phi_idle=idle / total,
        phi_w=phi_w / total,
        phi_sched=sched / total,
        virtual_flow=(spread + reeval_out) / total,
        form=form,
    )
    if printed:
        tags = "+".join(p.printed_sources())
        ref = scheduler_closed_form(p, "consistent").as_dict()
        for label, val in ss.as_dict().items():
            if abs(val - ref[label]) > AGREEMENT_TOL:
                ss.discrepancies.append(DiscrepancyRecord(label, val, ref[label], tags))
    return ss


def scheduler_matrix(p: SchedulerParams) -> TransitionMatrix:
    W, per = p.window, p.period
    qne, qe = p.p_qne, p.p_qe
    states = ["idle"] + [("w", j) for j in range(W)]
    states += [("s", i, j) for i in range(1, p.r_u + 1) for j in range(per)]
    a = (qne + p.p_arr - qne * p.p_arr) * p.p_csr
    tr = [("idle", "idle", 1.0 - a)]
    tr += [("idle", ("w", j), a / W) for j in range(W)]
    for j in range(1, W):
        if p.reevaluable(j):
            tr.append((("w", j), ("w", j - 1), 1.0 - p.p_re))
            targets = j - p.t3
            tr += [(("w", j), ("w", t), p.p_re / targets) for t in range(targets)]
        else:
            tr.append((("w", j), ("w", j - 1), 1.0))
    tr += [(("w", 0), ("s", i, per - 1), 1.0 / p.n_rc) for i in range(p.r_l, p.r_u + 1)]
    for i in range(1, p.r_u + 1):
        for j in range(1, per):
            tr.append((("s", i, j), ("s", i, j - 1), 1.0))
        tr.append((("s", i, 0), ("s", i, per - 1), qe))
        if i > 1:
            tr.append((("s", i, 0), ("s", i - 1, per - 1), qne))
    reselect = qne * (1.0 - p.p_rc)
    tr.append((("s", 1, 0), ("w", W - 1), qne * p.p_rc))
    tr += [(("s", 1, 0), ("w", j), reselect * p.p_csr / W) for j in range(W)]
    tr.append((("s", 1, 0), "idle", reselect * (1.0 - p.p_csr)))
    return TransitionMatrix.from_transitions(states, tr)


def check_against_matrix(p: SchedulerParams, form: str = "consistent", tol: float = AGREEMENT_TOL):
    """Compare a closed form with the exact chain; records carry the printed-form tags."""
    ss = scheduler_closed_form(p, form)
    oracle = steady_state(scheduler_matrix(p))
    tags = "+".join(p.printed_sources()) if form == "printed" else ""
    return compare(ss.as_dict(), oracle, tol, tags or "unexplained")


@dataclass(frozen=True)
class PoolGeometry:
    """Resource pool seen by one vehicle.

    ``csr_per_slot`` counts single-slot candidate resources per slot: a 4 RB
    message on 4 sub-channels of 12 RBs gives 12.
    """

    n: int
    window_slots: int
    n_subch: int = 4
    csr_per_slot: int = 12
    slots_per_ms: int = 2
    rho: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParams("need at least one vehicle")
        if self.window_slots < 1 or self.csr_per_slot < 1:
            raise InvalidParams("empty resource pool")

    @property
    def csr_t(self) -> int:
        return self.csr_per_slot * self.window_slots


def estimate_p_re(geom: PoolGeometry, phi_10: float, p_rc: float) -> float:
    """Per-slot chance that some neighbour newly reserves the tagged resource."""
    if geom.n <= 1:
        return 0.0
    x = phi_10 * (1.0 - p_rc) / geom.csr_t
    return float(min(1.0, max(0.0, 1.0 - (1.0 - x) ** (geom.n - 1))))


def estimate_p_csr(
    geom: PoolGeometry,
    channel_occupancy: float,
    threshold: float = 0.2,
    reservations_per_vehicle: float = 1.0,
    floor: float = 1e-6,
) -> float:
    """Probability that at least ``threshold`` of the window's resources stay free.

    Each resource is taken independently with probability ``channel_occupancy``.
    """
    if geom.n <= 1:
        return 1.0
    occ = min(1.0, max(0.0, channel_occupancy))
    if occ >= 1.0:
        return floor
    if geom.n * math.ceil(reservations_per_vehicle) <= (1.0 - threshold) * geom.csr_t:
        return 1.0
    need = math.ceil(threshold * geom.csr_t)
    p = float(binom.sf(need - 1, geom.csr_t, 1.0 - occ))
    return max(floor, p)


def rc_bounds(rri_ms: float) -> tuple[int, int]:
    """Reselection counter range for a reservation interval in milliseconds."""
    if not 1 <= rri_ms <= 1000:
        raise OutOfRange(f"RRI {rri_ms} ms outside [1, 1000]")
    if rri_ms >= 100:
        return 5, 15
    c = 100.0 / max(20.0, rri_ms)
    return int(round(5 * c)), int(round(15 * c))
