"""Finite discrete-time Markov chains and their stationary distributions.

The primary solver is Grassmann-Taksar-Heyman (GTH) elimination, which needs no
pivoting and performs no subtractions, so it stays accurate for the nearly
decomposable chains produced by the generator and scheduler models. Large
chains fall back to a sparse direct solve; lazy power iteration is available as
an independent second route for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence, TextIO

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .errors import DimensionMismatch, NonStochasticMatrix, Reducible

ROW_SUM_TOL = 1e-12
CLAMP_BELOW = 1e-15
GTH_MAX_STATES = 2500


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic matrix with ordered state labels.

    ``rows`` is stored as a CSR sparse matrix; use :meth:`dense` for an array.
    """

    states: tuple
    rows: sp.csr_matrix

    def __post_init__(self):
        n = len(self.states)
        if self.rows.shape != (n, n):
            raise DimensionMismatch(f"{n} labels but matrix shape {self.rows.shape}")
        data = self.rows.data
        if data.size and (data.min() < 0 or data.max() > 1 + ROW_SUM_TOL):
            raise NonStochasticMatrix("entries must lie in [0, 1]")
        sums = np.asarray(self.rows.sum(axis=1)).ravel()
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            i = bad[0]
            raise NonStochasticMatrix(
                f"row {self.states[i]!r} sums to {sums[i]!r} ({bad.size} bad rows)"
            )

    @property
    def size(self) -> int:
        return len(self.states)

    def index(self) -> dict:
        return {s: i for i, s in enumerate(self.states)}

    def dense(self) -> np.ndarray:
        return self.rows.toarray()

    @classmethod
    def from_dense(cls, rows, states: Sequence[Hashable] | None = None) -> "TransitionMatrix":
        a = np.asarray(rows, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"matrix must be square, got shape {a.shape}")
        if states is None:
            states = range(a.shape[0])
        return cls(tuple(states), sp.csr_matrix(a))

    @classmethod
    def from_transitions(
        cls,
        states: Sequence[Hashable],
        transitions: Iterable[tuple[Hashable, Hashable, float]],
    ) -> "TransitionMatrix":
        """Build from ``(src, dst, prob)`` triples; duplicate pairs accumulate.

        Entries below 1e-15 are dropped and the affected rows renormalized.
        """
        states = tuple(states)
        idx = {s: i for i, s in enumerate(states)}
        if len(idx) != len(states):
            raise DimensionMismatch("state labels must be unique")
        r, c, v = [], [], []
        for src, dst, p in transitions:
            if p == 0.0:
                continue
            r.append(idx[src])
            c.append(idx[dst])
            v.append(float(p))
        n = len(states)
        m = sp.coo_matrix((v, (r, c)), shape=(n, n)).tocsr()
        m.sum_duplicates()
        if m.data.size and m.data.min() < -ROW_SUM_TOL:
            raise NonStochasticMatrix("negative transition probability")
        small = m.data < CLAMP_BELOW
        if small.any():
            m.data[small] = 0.0
            m.eliminate_zeros()
            sums = np.asarray(m.sum(axis=1)).ravel()
            sums[sums == 0] = 1.0
            m = sp.diags(1.0 / sums) @ m
            m = m.tocsr()
        return cls(states, m)

    def permuted(self, order: Sequence[int]) -> "TransitionMatrix":
        order = np.asarray(order)
        m = self.rows[order][:, order]
        return TransitionMatrix(tuple(self.states[i] for i in order), m.tocsr())

    def to_triples(self, fh: TextIO) -> None:
        """Write ``row_label<TAB>col_label<TAB>prob`` lines, one per non-zero."""
        coo = self.rows.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for k in order:
            fh.write(f"{self.states[coo.row[k]]!r}\t{self.states[coo.col[k]]!r}\t{float(coo.data[k])!r}\n")


@dataclass(frozen=True)
class SteadyStateVector:
    states: tuple
    probs: np.ndarray

    def __post_init__(self):
        if len(self.states) != len(self.probs):
            raise DimensionMismatch("labels and probabilities differ in length")

    def __getitem__(self, label):
        return float(self.probs[self.states.index(label)])

    def as_dict(self) -> dict:
        return dict(zip(self.states, self.probs.tolist()))


@dataclass(frozen=True)
class DiscrepancyRecord:
    """A closed-form value that disagrees with the exact-matrix oracle."""

    state: Hashable
    closed_form: float
    oracle: float
    source: str = ""

    @property
    def abs_error(self) -> float:
        return abs(self.closed_form - self.oracle)


def closed_classes(m: TransitionMatrix) -> list[np.ndarray]:
    """Return the closed (recurrent) communicating classes of the support graph."""
    graph = m.rows.copy()
    graph.data = np.ones_like(graph.data)
    ncomp, labels = connected_components(graph, directed=True, connection="strong")
    coo = graph.tocoo()
    leaves = np.zeros(ncomp, dtype=bool)
    leaves[labels[coo.row][labels[coo.row] != labels[coo.col]]] = True
    return [np.flatnonzero(labels == c) for c in range(ncomp) if not leaves[c]]


def _gth(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    for k in range(n - 1, 0, -1):
        s = a[k, :k].sum()
        a[:k, k] /= s
        a[:k, :k] += np.outer(a[:k, k], a[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for j in range(1, n):
        pi[j] = pi[:j] @ a[:j, j]
    return pi / pi.sum()


def _sparse_direct(p: sp.csr_matrix) -> np.ndarray:
    n = p.shape[0]
    a = (p.T - sp.identity(n, format="csr")).tolil()
    a[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[n - 1] = 1.0
    pi = spsolve(a.tocsc(), b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _power(p: sp.csr_matrix, tol: float, max_iter: int) -> np.ndarray:
    n = p.shape[0]
    lazy = (0.5 * (p + sp.identity(n, format="csr"))).T.tocsr()
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        y = lazy @ x
        y /= y.sum()
        if np.max(np.abs(y - x)) < tol:
            return y
        x = y
    return x


def steady_state(
    m: TransitionMatrix,
    method: str = "auto",
    tol: float = 1e-14,
    max_iter: int = 2_000_000,
) -> SteadyStateVector:
    """Stationary distribution of a chain with a single closed class.

    Transient states receive probability zero. ``method`` is ``"auto"``
    (GTH up to 2500 recurrent states, sparse LU beyond), ``"gth"``,
    ``"sparse"`` or ``"power"``.
    """
    classes = closed_classes(m)
    if len(classes) != 1:
        raise Reducible(f"{len(classes)} closed classes; stationary distribution not unique")
    rec = classes[0]
    sub = m.rows[rec][:, rec].tocsr()
    if method == "auto":
        method = "gth" if len(rec) <= GTH_MAX_STATES else "sparse"
    if method == "gth":
        pi_rec = _gth(sub.toarray())
    elif method == "sparse":
        pi_rec = _sparse_direct(sub)
    elif method == "power":
        pi_rec = _power(sub, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    pi = np.zeros(m.size)
    pi[rec] = pi_rec
    return SteadyStateVector(m.states, pi)


def balance_residual(m: TransitionMatrix, pi: SteadyStateVector) -> float:
    """Max-norm of ``pi P - pi``."""
    if tuple(pi.states) != tuple(m.states) or len(pi.probs) != m.size:
        raise DimensionMismatch("vector and matrix use different state spaces")
    x = np.asarray(pi.probs, dtype=float)
    return float(np.max(np.abs(m.rows.T @ x - x)))


def compare(
    closed: Mapping[Hashable, float],
    oracle: SteadyStateVector,
    tol: float,
    source: str = "",
) -> list[DiscrepancyRecord]:
    """Per-state comparison; states missing from ``closed`` count as zero."""
    out = []
    for label, ref in zip(oracle.states, oracle.probs):
        val = float(closed.get(label, 0.0))
        if abs(val - ref) > tol:
            out.append(DiscrepancyRecord(label, val, float(ref), source))
    return out


def read_triples(fh: TextIO) -> list[tuple[str, str, float]]:
    out = []
    for line in fh:
        line = line.rstrip("\n")
        if not line:
            continue
        a, b, p = line.split("\t")
        out.append((a, b, float(p)))
    return out
