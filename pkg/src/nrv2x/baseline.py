"""Reference model without re-evaluation: collision probability and latency."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DivergentLiteral, InvalidParams


@dataclass(frozen=True)
class BaselineParams:
    n: int
    p_rk: float
    rc_mean: float
    csr_t: int
    rri: int
    t1: int = 2

    def __post_init__(self):
        problems = []
        if self.n < 1:
            problems.append("n must be >= 1")
        if self.csr_t < 1:
            problems.append("csr_t must be >= 1")
        if self.rc_mean <= 0:
            problems.append("rc_mean must be positive")
        if not 0.0 <= self.p_rk <= 1.0:
            problems.append(f"p_rk={self.p_rk} outside [0, 1]")
        if problems:
            raise InvalidParams("; ".join(problems))


def baseline_collision(p: BaselineParams) -> float:
    """(1/(1+p)) [1 - (1 - (1-p)/(RC*CSR_t))^(N-1)] with ``p`` the keep probability."""
    pool = p.csr_t * p.rc_mean
    if pool <= 1.0 - p.p_rk:
        raise InvalidParams("csr_t * rc_mean must exceed 1 - p_rk")
    if p.n == 1 or p.p_rk == 1.0:
        return 0.0
    hit = (1.0 - p.p_rk) / pool
    return (1.0 - (1.0 - hit) ** (p.n - 1)) / (1.0 + p.p_rk)


def baseline_latency(p: BaselineParams, p_col: float, mode: str = "geometric") -> float:
    """Mean latency in slots: half-window wait plus retransmission periods.

    ``"geometric"`` counts retransmissions as geometric in ``p_col``;
    ``"literal"`` sums the published series, ``RRI (1-p_col)/p_col``.
    """
    if not 0.0 <= p_col < 1.0:
        raise InvalidParams(f"p_col must lie in [0, 1), got {p_col}")
    base = (3 * p.rri - p.t1) / 2.0
    if mode == "geometric":
        return base + p.rri * p_col / (1.0 - p_col)
    if mode == "literal":
        if p_col == 0.0:
            raise DivergentLiteral("printed retransmission series diverges at p_col = 0")
        return base + p.rri * (1.0 - p_col) / p_col
    raise ValueError(f"unknown latency mode {mode!r}")
