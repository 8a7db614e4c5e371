"""CAM and DENM message-generator chains and the queue inputs they induce.

Every chain step is one physical-layer slot. State labels:

* ``("tx", j)``    ring of successfully handed-over messages, ``j`` slots left
  until the next generation instant;
* ``("txp", j)``   a message still waiting for a scheduling opportunity;
* ``("delay", j)`` DENM fixed inter-time line;
* ``"idle"``       DENM exponential wait before the next event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dtmc import DiscrepancyRecord, TransitionMatrix
from .errors import DegenerateP_S, InvalidParams

NORMALIZATION_TOL = 1e-9


def idle_exit_probability(t_avg: int, t_d: int, reading: str = "p_arr") -> float:
    """Per-slot probability of leaving the DENM idle state.

    ``"p_arr"`` uses rate ``1/(t_d - t_avg/2)``; ``"mean_gap"`` uses the
    exponential mean ``t_d - t_avg``. Equal ``t_avg`` and ``t_d`` means no
    exponential part, so the idle state is left immediately.
    """
    if t_d == t_avg:
        return 1.0
    if reading == "p_arr":
        mean = t_d - t_avg / 2.0
    elif reading == "mean_gap":
        mean = float(t_d - t_avg)
    else:
        raise ValueError(f"unknown idle-exit reading {reading!r}")
    return 1.0 - math.exp(-1.0 / mean)


@dataclass(frozen=True)
class CamParams:
    t_c: int
    p_s: float

    def __post_init__(self):
        if int(self.t_c) != self.t_c or self.t_c < 2:
            raise InvalidParams(f"t_c must be an integer >= 2, got {self.t_c}")
        if not 0.0 <= self.p_s <= 1.0:
            raise InvalidParams(f"p_s must be in [0, 1], got {self.p_s}")


@dataclass(frozen=True)
class DenmParams:
    t_avg: int
    t_d: int
    k: int
    p_s: float
    delta_t_d: int | None = None
    idle_reading: str = "p_arr"

    def __post_init__(self):
        problems = []
        if not (1 <= self.t_avg <= self.t_d):
            problems.append(f"need 1 <= t_avg <= t_d, got t_avg={self.t_avg}, t_d={self.t_d}")
        if self.t_d < 2:
            problems.append("t_d must be >= 2 slots")
        if self.k < 1:
            problems.append(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.p_s <= 1.0:
            problems.append(f"p_s must be in [0, 1], got {self.p_s}")
        if problems:
            raise InvalidParams("; ".join(problems))

    @property
    def idle_exit(self) -> float:
        return idle_exit_probability(self.t_avg, self.t_d, self.idle_reading)


@dataclass
class GeneratorSteadyState:
    phi_tx: np.ndarray
    phi_txp: np.ndarray
    phi_idle: float = 0.0
    phi_delay: np.ndarray = field(default_factory=lambda: np.zeros(0))
    # carried so queue_inputs can rebuild the DENM terms
    repeat_weight: float = 1.0
    idle_exit: float = 0.0
    normalization_defect: float = 0.0
    discrepancies: list = field(default_factory=list)

    @property
    def total(self) -> float:
        return float(self.phi_tx.sum() + self.phi_txp.sum() + self.phi_idle + self.phi_delay.sum())

    @property
    def waiting_mass(self) -> float:
        return float(self.phi_txp.sum())

    def as_dict(self) -> dict:
        d = {("tx", j): float(v) for j, v in enumerate(self.phi_tx)}
        d.update({("txp", j): float(v) for j, v in enumerate(self.phi_txp)})
        d.update({("delay", j): float(v) for j, v in enumerate(self.phi_delay)})
        if self.phi_delay.size:
            d["idle"] = float(self.phi_idle)
        return d


@dataclass(frozen=True)
class QueueInputs:
    alpha0: float
    alpha: float
    beta: float
    p_arr: float

    def __post_init__(self):
        for name in ("alpha0", "alpha", "beta", "p_arr"):
            v = getattr(self, name)
            if not -1e-12 <= v <= 1 + 1e-12:
                raise InvalidParams(f"{name}={v} outside [0, 1]")


def _waiting_profile(length: int, p_s: float) -> np.ndarray:
    """(1-P_S)^(L-j) / [1-(1-P_S)^(L-1)] for j = 0..L-1."""
    q = 1.0 - p_s
    denom = 1.0 - q ** (length - 1)
    if p_s <= 0.0 or denom <= 0.0:
        raise DegenerateP_S("P_S = 0 collapses the waiting-branch denominator")
    j = np.arange(length)
    return q ** (length - j) / denom


def _ring_from_waiting(fresh: float, txp: np.ndarray, p_s: float) -> np.ndarray:
    # tx_j = P_S (fresh + sum_{z>j} txp_z); tail sums by reverse cumsum
    length = txp.size
    tail = np.concatenate([np.cumsum(txp[::-1])[::-1][1:], [0.0]])
    tx = p_s * (fresh + tail)
    return tx


def cam_closed_form(p: CamParams) -> GeneratorSteadyState:
    """CAM generator steady state from the printed closed forms.

    The normalizing constant follows the printed expression with its undefined
    inner index read as the outer one; whatever mass defect that leaves is
    recorded and then divided out.
    """
    t_c, p_s = int(p.t_c), float(p.p_s)
    shape = _waiting_profile(t_c, p_s)
    inner = 0.0
    for z in range(1, t_c - 1):
        inner += shape[z + 1 :].sum()
    phi0 = 1.0 / (1.0 + p_s + p_s * inner + shape.sum())

    txp = phi0 * shape
    tx = _ring_from_waiting(phi0, txp, p_s)
    tx[0] = phi0
    raw_total = tx.sum() + txp.sum()
    defect = raw_total - 1.0
    records = []
    if abs(defect) > NORMALIZATION_TOL:
        records.append(DiscrepancyRecord("normalization", raw_total, 1.0, "cam-normalizer"))
    return GeneratorSteadyState(
        phi_tx=tx / raw_total,
        phi_txp=txp / raw_total,
        normalization_defect=defect,
        discrepancies=records,
    )


def cam_matrix(p: CamParams) -> TransitionMatrix:
    t_c, p_s = int(p.t_c), float(p.p_s)
    q = 1.0 - p_s
    states = [("tx", j) for j in range(t_c)] + [("txp", j) for j in range(t_c)]
    tr = [
        (("tx", 0), ("tx", t_c - 1), p_s),
        (("tx", 0), ("txp", t_c - 1), q),
        (("txp", 0), ("txp", t_c - 1), 1.0),
    ]
    for j in range(1, t_c):
        tr.append((("tx", j), ("tx", j - 1), 1.0))
        tr.append((("txp", j), ("tx", j - 1), p_s))
        tr.append((("txp", j), ("txp", j - 1), q))
    return TransitionMatrix.from_transitions(states, tr)


def denm_closed_form(p: DenmParams, idle_form: str = "chain") -> GeneratorSteadyState:
    """DENM generator steady state.

    ``idle_form="chain"`` sets the idle mass from the per-slot exit probability
    of the explicit chain; ``"printed"`` uses the published idle expression
    with its undefined ``T`` read as ``t_d``. The normalizing constant is
    obtained numerically in both cases.
    """
    t_avg, t_d, k, p_s = int(p.t_avg), int(p.t_d), int(p.k), float(p.p_s)
    w = (k - 1) / k
    shape = _waiting_profile(t_d, p_s)
    txp = w * shape
    tx = _ring_from_waiting(w, txp, p_s)
    tx[0] = 1.0
    tx[t_d - 1] = p_s * w
    delay = np.full(t_avg, 1.0 / k)
    p_exit = p.idle_exit
    if idle_form == "chain":
        idle = 1.0 / (k * p_exit)
    elif idle_form == "printed":
        idle = 1.0 / ((1.0 + t_avg) * (1.0 - math.exp(-t_d / t_avg)) * k)
    else:
        raise ValueError(f"unknown idle_form {idle_form!r}")
    total = tx.sum() + txp.sum() + delay.sum() + idle
    return GeneratorSteadyState(
        phi_tx=tx / total,
        phi_txp=txp / total,
        phi_idle=idle / total,
        phi_delay=delay / total,
        repeat_weight=w,
        idle_exit=p_exit,
    )


def denm_matrix(p: DenmParams) -> TransitionMatrix:
    t_avg, t_d, k, p_s = int(p.t_avg), int(p.t_d), int(p.k), float(p.p_s)
    q = 1.0 - p_s
    w = (k - 1) / k
    p_exit = p.idle_exit
    states = (
        [("tx", j) for j in range(t_d)]
        + [("txp", j) for j in range(t_d)]
        + [("delay", j) for j in range(t_avg)]
        + ["idle"]
    )
    tr = [
        (("tx", 0), ("tx", t_d - 1), w * p_s),
        (("tx", 0), ("txp", t_d - 1), w * q),
        (("tx", 0), ("delay", t_avg - 1), 1.0 / k),
        (("txp", 0), ("txp", t_d - 1), 1.0),
        (("delay", 0), "idle", 1.0),
        ("idle", "idle", 1.0 - p_exit),
        ("idle", ("tx", 0), p_exit),
    ]
    for j in range(1, t_d):
        tr.append((("tx", j), ("tx", j - 1), 1.0))
        tr.append((("txp", j), ("tx", j - 1), p_s))
        tr.append((("txp", j), ("txp", j - 1), q))
    for j in range(1, t_avg):
        tr.append((("delay", j), ("delay", j - 1), 1.0))
    return TransitionMatrix.from_transitions(states, tr)


def _union(a: float, b: float) -> float:
    return a + b - a * b


def queue_inputs(
    cam: GeneratorSteadyState,
    denm: GeneratorSteadyState | None,
    p_s: float,
) -> QueueInputs:
    """Per-slot queue start, growth and drain probabilities of the merged flows."""
    q = 1.0 - p_s
    a0 = cam.phi_tx[0] * q + cam.phi_txp[0]
    a = cam.phi_txp[0]
    b = p_s * cam.phi_txp[1:].sum()
    p_arr = cam.phi_tx[0]
    if denm is not None:
        trigger = denm.idle_exit * denm.phi_idle
        a0_d = denm.phi_tx[0] * q * denm.repeat_weight + denm.phi_txp[0] + trigger
        a_d = denm.phi_txp[0] + trigger
        b_d = p_s * denm.phi_txp[1:].sum()
        a0, a, b = _union(a0, a0_d), _union(a, a_d), _union(b, b_d)
        p_arr = _union(cam.phi_tx[0], denm.idle_exit)
    clip = lambda v: float(min(1.0, max(0.0, v)))
    return QueueInputs(clip(a0), clip(a), clip(b), clip(p_arr))
