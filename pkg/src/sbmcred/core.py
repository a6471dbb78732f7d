"""Core types and operations for the two-community stochastic block model.

A binary labeling of n vertices and its complement induce the same random
graph law, so labelings are stored in canonical form: the 1-labeled
community is the smaller one (at most floor(n/2) vertices), and when both
communities have exactly n/2 vertices the first vertex is labeled 0.

Vertices are 0-based in code. The text formats are 1-based:

* graph file: first line ``n <N>``, then one line ``i j`` per edge with
  ``1 <= i < j <= N``, LF endings, edges sorted by pair index;
* assignment file: a single line of ``0``/``1`` characters.

Graphs are stored as a bitset over upper-triangular vertex pairs with the
fixed layout ``pair_index(u, v) = v*(v-1)/2 + u`` for ``u < v`` (equivalent
to ``(j-1)(j-2)/2 + (i-1)`` in 1-based coordinates), so serialized graphs
are portable across implementations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence, Union

import numpy as np

CHERNOFF_HELLINGER = "chernoff-hellinger"
KESTEN_STIGUM = "kesten-stigum"

PathOrFile = Union[str, Path, IO[str]]


# ---------------------------------------------------------------------------
# pair indexing
# ---------------------------------------------------------------------------

def pair_index(u: int, v: int) -> int:
    """Linear index of the unordered pair {u, v} with 0 <= u < v."""
    if not 0 <= u < v:
        raise ValueError(f"need 0 <= u < v, got ({u}, {v})")
    return v * (v - 1) // 2 + u


def pair_from_index(t: int) -> tuple[int, int]:
    """Inverse of :func:`pair_index`."""
    if t < 0:
        raise ValueError("pair index must be nonnegative")
    v = (1 + math.isqrt(1 + 8 * t)) // 2
    u = t - v * (v - 1) // 2
    return u, v


def _pair_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    """(u, v) endpoints of all pairs in pair-index order."""
    v = np.repeat(np.arange(n), np.arange(n))
    u = np.arange(len(v)) - v * (v - 1) // 2
    return u, v


# ---------------------------------------------------------------------------
# assignments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Assignment:
    """Canonical two-community labeling of ``n`` vertices.

    Label 0 marks the larger community and 1 the smaller one; ``m`` is the
    number of 1-labels. Construct from arbitrary label sequences with
    :func:`canonicalize`, which resolves the labeling/complement ambiguity.
    """

    labels: tuple[int, ...]
    n: int = field(init=False, compare=False)
    m: int = field(init=False, compare=False)
    bits: int = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        labels = tuple(int(b) for b in self.labels)
        if not labels:
            raise ValueError("label sequence must be nonempty")
        if any(b not in (0, 1) for b in labels):
            raise ValueError("labels must be 0 or 1")
        n = len(labels)
        m = sum(labels)
        if m > n // 2 or (2 * m == n and labels[0] == 1):
            raise ValueError(
                "labels are not in canonical form; build with canonicalize()"
            )
        bits = 0
        for v, b in enumerate(labels):
            bits |= b << v
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "bits", bits)

    def complement_labels(self) -> tuple[int, ...]:
        """The (usually non-canonical) complementary labeling."""
        return tuple(1 - b for b in self.labels)

    def to_string(self) -> str:
        return "".join(str(b) for b in self.labels)


def canonicalize(labels: Sequence[int] | str) -> Assignment:
    """Canonical representative of ``{labels, 1 - labels}``.

    Picks the member with the fewer 1-labels; on a tie (n even, both
    communities of size n/2) picks the member whose first label is 0.
    """
    seq = tuple(int(b) for b in labels)
    if not seq:
        raise ValueError("label sequence must be nonempty")
    if any(b not in (0, 1) for b in seq):
        raise ValueError("labels must be 0 or 1")
    n = len(seq)
    m = sum(seq)
    flip = m > n - m or (2 * m == n and seq[0] == 1)
    if flip:
        seq = tuple(1 - b for b in seq)
    return Assignment(seq)


def balanced_assignment(n: int, m: int | None = None) -> Assignment:
    """Assignment with the last ``m`` vertices labeled 1 (default floor(n/2))."""
    if n < 1:
        raise ValueError("n must be positive")
    if m is None:
        m = n // 2
    if not 0 <= m <= n // 2:
        raise ValueError(f"need 0 <= m <= n//2, got m={m}")
    return Assignment((0,) * (n - m) + (1,) * m)


def random_assignment(n: int, rng: np.random.Generator, m: int | None = None) -> Assignment:
    """Uniformly random assignment, with ``m`` drawn uniformly when omitted."""
    if m is None:
        m = int(rng.integers(0, n // 2 + 1))
    if not 0 <= m <= n // 2:
        raise ValueError(f"need 0 <= m <= n//2, got m={m}")
    labels = [0] * n
    for v in rng.permutation(n)[:m]:
        labels[v] = 1
    return canonicalize(labels)


# ---------------------------------------------------------------------------
# graphs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on ``n`` vertices.

    ``edge_bits`` holds one bit per vertex pair in pair-index order;
    ``adjacency[v]`` is the neighbor bitmask of vertex v.
    """

    n: int
    edge_bits: int
    adjacency: tuple[int, ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be positive")
        n_pairs = self.n * (self.n - 1) // 2
        if not 0 <= self.edge_bits < (1 << n_pairs):
            raise ValueError("edge bits out of range for this vertex count")
        adj = [0] * self.n
        bits = self.edge_bits
        while bits:
            low = bits & -bits
            u, v = pair_from_index(low.bit_length() - 1)
            adj[u] |= 1 << v
            adj[v] |= 1 << u
            bits ^= low
        object.__setattr__(self, "adjacency", tuple(adj))

    @property
    def edge_count(self) -> int:
        return self.edge_bits.bit_count()

    def has_edge(self, u: int, v: int) -> bool:
        if u > v:
            u, v = v, u
        return bool(self.edge_bits >> pair_index(u, v) & 1)

    def edges(self) -> list[tuple[int, int]]:
        """Edge list in pair-index order, 0-based."""
        out = []
        bits = self.edge_bits
        while bits:
            low = bits & -bits
            out.append(pair_from_index(low.bit_length() - 1))
            bits ^= low
        return out

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        bits = 0
        for u, v in edges:
            if u > v:
                u, v = v, u
            if not 0 <= u < v < n:
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            t = pair_index(u, v)
            if bits >> t & 1:
                raise ValueError(f"duplicate edge ({u}, {v})")
            bits |= 1 << t
        return cls(n, bits)


# ---------------------------------------------------------------------------
# model parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SbmParams:
    """Within-community (p) and between-community (q) edge probabilities."""

    p: float
    q: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.q <= 1.0):
            raise ValueError(f"p and q must lie in [0, 1], got ({self.p}, {self.q})")


@dataclass(frozen=True)
class PhaseParams:
    """Sparsity-phase coefficients.

    In the Chernoff-Hellinger phase edge probabilities scale as
    ``coeff * log(n) / n`` and in the Kesten-Stigum phase as ``coeff / n``.
    """

    phase: str
    coeff1: float
    coeff2: float

    def __post_init__(self) -> None:
        if self.phase not in (CHERNOFF_HELLINGER, KESTEN_STIGUM):
            raise ValueError(f"unknown phase {self.phase!r}")
        if self.coeff1 < 0 or self.coeff2 < 0:
            raise ValueError("phase coefficients must be nonnegative")

    def at(self, n: int) -> SbmParams:
        """Edge probabilities at graph size ``n``, clamped to [0, 1]."""
        if n < 2:
            raise ValueError("n must be at least 2")
        scale = math.log(n) / n if self.phase == CHERNOFF_HELLINGER else 1.0 / n
        clamp = lambda x: min(1.0, max(0.0, x))
        return SbmParams(clamp(self.coeff1 * scale), clamp(self.coeff2 * scale))


# ---------------------------------------------------------------------------
# sampling and sufficient statistics
# ---------------------------------------------------------------------------

def sample_graph(params: SbmParams, truth: Assignment,
                 seed: int | Sequence[int] | np.random.Generator) -> Graph:
    """Draw a graph with pair (u, v) present w.p. p if labels match, q otherwise.

    Pair t consumes the t-th uniform variate of the PCG64 stream, so output
    is reproducible bit for bit given the seed.
    """
    rng = np.random.default_rng(seed)
    n = truth.n
    u, v = _pair_arrays(n)
    labels = np.asarray(truth.labels)
    probs = np.where(labels[u] == labels[v], params.p, params.q)
    present = rng.random(len(probs)) < probs
    bits = int.from_bytes(np.packbits(present, bitorder="little").tobytes(), "little")
    return Graph(n, bits)


def within_pairs_count(n: int, m: int) -> int:
    """Number of vertex pairs whose labels match when the 1-community has m vertices."""
    return m * (m - 1) // 2 + (n - m) * (n - m - 1) // 2


@dataclass(frozen=True)
class SuffStats:
    """Edge counts by pair type; enough to evaluate the graph likelihood."""

    s_in: int        # present edges between equal-labeled vertices
    s_out: int       # present edges between differently labeled vertices
    within_pairs: int
    between_pairs: int

    def __post_init__(self) -> None:
        if not (0 <= self.s_in <= self.within_pairs and 0 <= self.s_out <= self.between_pairs):
            raise ValueError("edge counts exceed pair counts")


def suff_stats(graph: Graph, assignment: Assignment) -> SuffStats:
    if graph.n != assignment.n:
        raise ValueError(f"graph has n={graph.n} but assignment has n={assignment.n}")
    n, m = assignment.n, assignment.m
    ones = assignment.bits
    zeros = ~ones & ((1 << n) - 1)
    twice_s_in = 0
    for v, neigh in enumerate(graph.adjacency):
        side = ones if ones >> v & 1 else zeros
        twice_s_in += (neigh & side).bit_count()
    s_in = twice_s_in // 2
    return SuffStats(
        s_in=s_in,
        s_out=graph.edge_count - s_in,
        within_pairs=within_pairs_count(n, m),
        between_pairs=m * (n - m),
    )


def _xlogy(x: float, y: float) -> float:
    """x * log(y) with the 0 * log(0) = 0 convention."""
    if x == 0:
        return 0.0
    if y == 0:
        return float("-inf")
    return x * math.log(y)


def log_likelihood(stats: SuffStats, params: SbmParams) -> float:
    """Log-probability of the observed edge pattern; -inf marks impossible data."""
    return (
        _xlogy(stats.s_in, params.p)
        + _xlogy(stats.within_pairs - stats.s_in, 1.0 - params.p)
        + _xlogy(stats.s_out, params.q)
        + _xlogy(stats.between_pairs - stats.s_out, 1.0 - params.q)
    )


# ---------------------------------------------------------------------------
# distances between labelings
# ---------------------------------------------------------------------------

def _label_bits(labels: "Assignment | Sequence[int] | str") -> tuple[int, int]:
    if isinstance(labels, Assignment):
        return labels.n, labels.bits
    seq = tuple(int(b) for b in labels)
    if not seq or any(b not in (0, 1) for b in seq):
        raise ValueError("labels must be a nonempty 0/1 sequence")
    bits = 0
    for v, b in enumerate(seq):
        bits |= b << v
    return len(seq), bits


def hamming_and_k(theta: "Assignment | Sequence[int] | str",
                  eta: "Assignment | Sequence[int] | str") -> tuple[int, int]:
    """Raw Hamming distance h of the given label sequences and min(h, n - h).

    h depends on the representatives as given; the second value is the
    complement-invariant metric in [0, n/2] used for balls and enlargements
    everywhere downstream.
    """
    n1, b1 = _label_bits(theta)
    n2, b2 = _label_bits(eta)
    if n1 != n2:
        raise ValueError("assignments must have equal length")
    h = (b1 ^ b2).bit_count()
    return h, min(h, n1 - h)


def edge_change_counts(theta: Assignment, eta: Assignment) -> tuple[int, int]:
    """Counts of vertex pairs whose edge probability flips between labelings.

    Returns (within-to-between, between-to-within): pairs that are
    within-community under ``theta`` but between-community under ``eta``,
    and vice versa. Their sum equals h * (n - h) with h the raw Hamming
    distance of the stored labels.
    """
    if theta.n != eta.n:
        raise ValueError("assignments must have equal length")
    n = theta.n
    full = (1 << n) - 1
    t, e = theta.bits, eta.bits
    v11 = (t & e).bit_count()
    v10 = (t & ~e & full).bit_count()
    v01 = (~t & e & full).bit_count()
    v00 = n - v11 - v10 - v01
    return v00 * v01 + v11 * v10, v00 * v10 + v01 * v11


def min_edge_changes(m1: int, m2: int, n: int) -> int:
    """Minimum of summed edge-probability changes over all labeling pairs
    drawn from the size classes m1 and m2: |m1 - m2| * (n - |m1 - m2|)."""
    if not (0 <= m1 <= n // 2 and 0 <= m2 <= n // 2):
        raise ValueError("size-class indices must lie in [0, n//2]")
    d = abs(m1 - m2)
    return d * (n - d)


def hellinger_affinity(p: float, q: float) -> float:
    """sqrt(p*q) + sqrt((1-p)*(1-q)); 1 iff p == q, 0 only at opposite corners."""
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError(f"probabilities must lie in [0, 1], got ({p}, {q})")
    return math.sqrt(p * q) + math.sqrt((1.0 - p) * (1.0 - q))


# ---------------------------------------------------------------------------
# text formats
# ---------------------------------------------------------------------------

def _writing(dest: PathOrFile):
    if isinstance(dest, (str, Path)):
        return open(dest, "w", newline="\n"), True
    return dest, False


def _reading(src: PathOrFile):
    if isinstance(src, (str, Path)):
        return open(src, "r"), True
    return src, False


def write_graph(graph: Graph, dest: PathOrFile) -> None:
    f, close = _writing(dest)
    try:
        f.write(f"n {graph.n}\n")
        for u, v in graph.edges():
            f.write(f"{u + 1} {v + 1}\n")
    finally:
        if close:
            f.close()


def read_graph(src: PathOrFile) -> Graph:
    f, close = _reading(src)
    try:
        header = f.readline().split()
        if len(header) != 2 or header[0] != "n":
            raise ValueError("graph file must start with a line 'n <N>'")
        n = int(header[1])
        edges = []
        for line in f:
            line = line.strip()
            if not line:
                continue
            i, j = map(int, line.split())
            if not 1 <= i < j <= n:
                raise ValueError(f"edge ({i}, {j}) violates 1 <= i < j <= n")
            edges.append((i - 1, j - 1))
        return Graph.from_edges(n, edges)
    finally:
        if close:
            f.close()


def write_assignment(assignment: Assignment, dest: PathOrFile) -> None:
    f, close = _writing(dest)
    try:
        f.write(assignment.to_string() + "\n")
    finally:
        if close:
            f.close()


def read_assignment(src: PathOrFile) -> Assignment:
    """Parse a 0/1 line; the result is canonicalized (same graph law)."""
    f, close = _reading(src)
    try:
        line = f.readline().strip()
        if not line or set(line) - {"0", "1"}:
            raise ValueError("assignment file must hold a single 0/1 line")
        return canonicalize(line)
    finally:
        if close:
            f.close()
