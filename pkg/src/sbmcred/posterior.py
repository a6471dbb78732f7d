"""Exact posterior over all canonical labelings under the uniform prior.

The state space has 2**(n-1) elements: every label sequence with first
label 0, one per labeling/complement class. State index = the integer
whose bit (v-1) is the label of vertex v, for v = 1..n-1.

The enumeration kernel partitions the index range into contiguous blocks
(fixed high bits). Block starting states are visited by a Gray-code walk
over the high bits, updating the sufficient statistics by one vertex flip
per step; the low bits are then walked in Gray-code order simultaneously
for all blocks, with numpy lanes holding one block each. Every step flips
a single vertex label and adjusts the within-community edge count from a
popcount of that vertex's neighborhood, so total work is O(2**(n-1)) cheap
updates rather than O(2**(n-1) * n**2) fresh evaluations. The result is
independent of the block partition and bit-exact across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import xlogy

from .core import (
    Assignment,
    Graph,
    SbmParams,
    canonicalize,
    within_pairs_count,
)

N_MAX_DEFAULT = 26

_LOG_SUM_CHUNK = 1 << 20


class CapacityError(ValueError):
    """Graph too large for exact enumeration; use the MCMC sampler instead."""


class DegeneratePosteriorError(ValueError):
    """Every labeling has likelihood zero for the observed graph."""


def assignment_index(assignment: Assignment) -> int:
    """Table index of a canonical assignment.

    The class representative with first label 0 is the assignment itself or
    its complement; its labels of vertices 1..n-1 form the index.
    """
    bits = assignment.bits
    if bits & 1:
        bits ^= (1 << assignment.n) - 1
    return bits >> 1


def assignment_from_index(n: int, index: int) -> Assignment:
    """Canonical assignment whose class representative has the given index."""
    if not 0 <= index < 1 << (n - 1):
        raise ValueError(f"index {index} out of range for n={n}")
    return canonicalize([0] + [index >> (v - 1) & 1 for v in range(1, n)])


@dataclass
class PosteriorTable:
    """Normalized log posterior masses over all 2**(n-1) states."""

    n: int
    log_mass: np.ndarray
    log_norm: float
    _masses: np.ndarray | None = None

    @property
    def size(self) -> int:
        return 1 << (self.n - 1)

    @property
    def masses(self) -> np.ndarray:
        if self._masses is None:
            self._masses = np.exp(self.log_mass)
        return self._masses

    def index_of(self, assignment: Assignment) -> int:
        if assignment.n != self.n:
            raise ValueError("assignment size does not match table")
        return assignment_index(assignment)

    def assignment_at(self, index: int) -> Assignment:
        return assignment_from_index(self.n, index)


def _seed_suffstats(graph: Graph) -> tuple[int, int]:
    """(s_in, m) of the all-zeros labeling: every present edge is within."""
    return graph.edge_count, 0


def _log_norm(log_lik: np.ndarray) -> float:
    """Two-pass max-shift log-sum-exp, chunked to bound temporaries."""
    mx = float(log_lik.max())
    if mx == float("-inf"):
        raise DegeneratePosteriorError(
            "observed graph is impossible under every labeling"
        )
    acc = 0.0
    for start in range(0, log_lik.size, _LOG_SUM_CHUNK):
        acc += float(np.exp(log_lik[start:start + _LOG_SUM_CHUNK] - mx).sum())
    return mx + math.log(acc)


def enumerate_posterior(graph: Graph, params: SbmParams, *,
                        n_max: int = N_MAX_DEFAULT,
                        block_bits: int = 8) -> PosteriorTable:
    """Exact posterior table for the observed graph.

    The uniform prior cancels in the normalization and is not materialized.
    Raises :class:`CapacityError` above ``n_max`` (default 26, about 33.5M
    states) and :class:`DegeneratePosteriorError` when no labeling can have
    produced the graph (possible only with p or q in {0, 1}).
    """
    n = graph.n
    if n < 1:
        raise ValueError("n must be positive")
    if n > n_max or n > 33:  # 33: uint32 state indices, and 2**32 states is absurd
        raise CapacityError(
            f"n={n} exceeds the exact-enumeration cap n_max={min(n_max, 33)}; "
            "use sbmcred.mcmc.run_chain for larger graphs"
        )
    total_bits = n - 1
    high_bits = min(max(block_bits, 0), total_bits)
    low_bits = total_bits - high_bits
    n_blocks = 1 << high_bits
    n_low = 1 << low_bits

    adj = graph.adjacency
    deg = [a.bit_count() for a in adj]
    n_edges = graph.edge_count

    # Gray-code walk over the high bits seeds every block's first state.
    seed_s = np.empty(n_blocks, dtype=np.int32)
    seed_m = np.empty(n_blocks, dtype=np.int32)
    s_in, m = _seed_suffstats(graph)
    seed_s[0], seed_m[0] = s_in, m
    ones = 0
    for t in range(1, n_blocks):
        v = low_bits + (t & -t).bit_length()  # vertex behind the flipped high bit
        e1 = (adj[v] & ones).bit_count()
        if ones >> v & 1:
            s_in += deg[v] - 2 * e1
            m -= 1
        else:
            s_in += 2 * e1 - deg[v]
            m += 1
        ones ^= 1 << v
        g = t ^ (t >> 1)
        seed_s[g], seed_m[g] = s_in, m

    out_s = np.empty((n_blocks, n_low), dtype=np.int32)
    out_m = np.empty((n_blocks, n_low), dtype=np.int8)
    out_s[:, 0] = seed_s
    out_m[:, 0] = seed_m

    if low_bits:
        # One numpy lane per block; all lanes flip the same low bit per step.
        masks = (np.arange(n_blocks, dtype=np.uint32) << low_bits).astype(np.uint32)
        cur_s = seed_s.copy()
        cur_m = seed_m.copy()
        adj_idx = [np.uint32(a >> 1) for a in adj]  # index-space neighbor masks
        for t in range(1, n_low):
            f = (t & -t).bit_length() - 1
            v = f + 1
            e1 = np.bitwise_count(masks & adj_idx[v]).astype(np.int32)
            sign = 1 - 2 * ((masks >> np.uint32(f)) & np.uint32(1)).astype(np.int32)
            cur_s += sign * (2 * e1 - deg[v])
            cur_m += sign
            masks ^= np.uint32(1 << f)
            g = t ^ (t >> 1)
            out_s[:, g] = cur_s
            out_m[:, g] = cur_m

    s_flat = out_s.reshape(-1)
    m_flat = out_m.reshape(-1)
    w_of_m = np.array([within_pairs_count(n, k) for k in range(n + 1)], dtype=np.float64)
    n_pairs = n * (n - 1) // 2
    p, q = params.p, params.q

    if 0.0 < p < 1.0 and 0.0 < q < 1.0:
        # log-likelihood is affine in (s_in, W); evaluate directly per state
        lp, l1p = math.log(p), math.log1p(-p)
        lq, l1q = math.log(q), math.log1p(-q)
        log_lik = s_flat * (lp - l1p - lq + l1q)
        log_lik += w_of_m[m_flat] * (l1p - l1q)
        log_lik += n_edges * lq + (n_pairs - n_edges) * l1q
    else:
        # boundary probabilities: use xlogy so 0 * log(0) = 0 and -inf marks
        # impossible observations
        s_in_f = s_flat.astype(np.float64)
        w = w_of_m[m_flat]
        s_out_f = n_edges - s_in_f
        log_lik = (
            xlogy(s_in_f, p)
            + xlogy(w - s_in_f, 1.0 - p)
            + xlogy(s_out_f, q)
            + xlogy((n_pairs - w) - s_out_f, 1.0 - q)
        )

    log_norm = _log_norm(log_lik)
    log_lik -= log_norm
    return PosteriorTable(n=n, log_mass=log_lik, log_norm=log_norm)


# ---------------------------------------------------------------------------
# mass queries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Singleton:
    assignment: Assignment


@dataclass(frozen=True)
class Ball:
    """All states within the complement-invariant metric radius of the center."""

    center: Assignment
    radius: int


@dataclass(frozen=True)
class SizeClass:
    """All states whose smaller community has exactly m vertices."""

    m: int


@dataclass(frozen=True)
class Complement:
    inner: "Query"


Query = Union[Singleton, Ball, SizeClass, Complement]


def ball_mask(n: int, center_index: int, radius: int) -> np.ndarray:
    """Boolean mask over all states within metric distance <= radius of the center.

    Distance between class representatives is min(h, n - h) with h the
    Hamming distance of the index bits (the shared first label contributes
    nothing).
    """
    if not 0 <= radius <= n // 2:
        raise ValueError(f"radius must lie in [0, n//2], got {radius}")
    states = np.arange(1 << (n - 1), dtype=np.uint32)
    h = np.bitwise_count(states ^ np.uint32(center_index))
    return (h <= radius) | (h >= n - radius)


def size_class_mask(n: int, m: int) -> np.ndarray:
    if not 0 <= m <= n // 2:
        raise ValueError(f"m must lie in [0, n//2], got {m}")
    pc = np.bitwise_count(np.arange(1 << (n - 1), dtype=np.uint32)).astype(np.int64)
    return np.minimum(pc, n - pc) == m


def _query_mask(table: PosteriorTable, query: Query) -> np.ndarray:
    if isinstance(query, Singleton):
        mask = np.zeros(table.size, dtype=bool)
        mask[table.index_of(query.assignment)] = True
        return mask
    if isinstance(query, Ball):
        return ball_mask(table.n, table.index_of(query.center), query.radius)
    if isinstance(query, SizeClass):
        return size_class_mask(table.n, query.m)
    if isinstance(query, Complement):
        return ~_query_mask(table, query.inner)
    raise TypeError(f"unknown query type {type(query).__name__}")


def query_mass(table: PosteriorTable, query: Query) -> float:
    """Posterior mass of the set of states matching the query."""
    return float(table.masses[_query_mask(table, query)].sum())


def top_assignments(table: PosteriorTable, *, count: int | None = None,
                    level: float | None = None) -> list[tuple[Assignment, float]]:
    """States by decreasing mass, ties broken by ascending index.

    With ``count``, the top that many states. With ``level``, the shortest
    prefix whose cumulative mass reaches the level (never empty; at level 1
    this is the nonzero-mass support). The first element is the MAP
    estimator.
    """
    if (count is None) == (level is None):
        raise ValueError("specify exactly one of count= or level=")
    masses = table.masses
    order = np.argsort(-masses, kind="stable")
    if count is not None:
        if not 1 <= count <= table.size:
            raise ValueError(f"count must lie in [1, {table.size}]")
        chosen = order[:count]
    else:
        if not 0.0 <= level <= 1.0:
            raise ValueError(f"level must lie in [0, 1], got {level}")
        csum = np.cumsum(masses[order])
        stop = int(np.searchsorted(csum, min(level, csum[-1]), side="left"))
        chosen = order[:stop + 1]
    return [(table.assignment_at(int(i)), float(masses[i])) for i in chosen]
