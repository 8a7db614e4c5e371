"""Device-level buffer queue as a finite birth-death chain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dtmc import TransitionMatrix
from .errors import AbsorbingQueue, InvalidParams, ZeroArrivalRate
from .traffic import QueueInputs

EQUAL_RATE_TOL = 1e-9


@dataclass(frozen=True)
class QueueParams:
    inputs: QueueInputs
    m: int = 20

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise InvalidParams(f"queue capacity must be an integer >= 1, got {self.m}")


@dataclass(frozen=True)
class QueueSteadyState:
    phi: np.ndarray

    @property
    def p_qe(self) -> float:
        return float(self.phi[0])

    @property
    def p_qne(self) -> float:
        return 1.0 - float(self.phi[0])

    @property
    def mean_length(self) -> float:
        return float(np.arange(self.phi.size) @ self.phi)


def queue_steady_state(p: QueueParams) -> QueueSteadyState:
    a0, a, b = p.inputs.alpha0, p.inputs.alpha, p.inputs.beta
    m = int(p.m)
    phi = np.zeros(m + 1)
    if a0 == 0.0:
        phi[0] = 1.0
        return QueueSteadyState(phi)
    if b == 0.0:
        raise AbsorbingQueue("drain probability is zero while arrivals are possible")
    r = a / b
    if abs(a - b) < EQUAL_RATE_TOL:
        phi0 = 1.0 / (1.0 + a0 * m / b)
    else:
        phi0 = 1.0 / (1.0 + a0 * (1.0 - r**m) / (b - a))
    phi[0] = phi0
    phi[1:] = phi0 * (a0 / b) * r ** np.arange(m)
    return QueueSteadyState(phi / phi.sum())


def queue_matrix(p: QueueParams) -> TransitionMatrix:
    """Explicit birth-death chain; needs ``alpha + beta <= 1`` to be stochastic."""
    a0, a, b = p.inputs.alpha0, p.inputs.alpha, p.inputs.beta
    m = int(p.m)
    if a + b > 1.0 + 1e-12:
        raise InvalidParams("alpha + beta exceeds one; no single-step birth-death chain")
    tr = [(0, 1, a0), (0, 0, 1.0 - a0), (m, m - 1, b), (m, m, 1.0 - b)]
    for i in range(1, m):
        tr += [(i, i + 1, a), (i, i - 1, b), (i, i, 1.0 - a - b)]
    return TransitionMatrix.from_transitions(range(m + 1), tr)


def truncation_bound(alpha: float, beta: float, m: int) -> float:
    """(alpha/beta)^m: how much mass a larger buffer could still move."""
    if beta == 0.0:
        return float("inf")
    return (alpha / beta) ** m


def mean_latency(q: QueueSteadyState, alpha: float, eta: float) -> float:
    """Mean queueing latency in slots: sum(i * phi_i) / (eta * alpha)."""
    if eta <= 0:
        raise InvalidParams(f"eta must be positive, got {eta}")
    backlog = float(np.arange(1, q.phi.size) @ q.phi[1:])
    if backlog == 0.0:
        return 0.0
    if alpha <= 0.0:
        raise ZeroArrivalRate("queue holds mass but the growth probability is zero")
    return backlog / (eta * alpha)


def eta_from_geometry(n_subch: int = 4, rb_per_subch: int = 12, rb_per_message: int = 4) -> float:
    return n_subch * rb_per_subch / rb_per_message
