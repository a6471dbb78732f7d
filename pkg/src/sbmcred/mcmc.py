"""Single-site Metropolis sampler over canonical labelings.

For graphs beyond the exact-enumeration cap the posterior is approximated
by a Markov chain: propose flipping one uniformly chosen vertex label and
accept with probability min(1, exp(delta log-likelihood)), computed
incrementally from one neighborhood popcount per step. Visited states are
recorded by their canonical index, which folds a labeling and its
complement together; a dedicated complement move is therefore unnecessary.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from typing import IO, Iterator

import numpy as np

from .core import (
    Assignment,
    Graph,
    SbmParams,
    log_likelihood,
    suff_stats,
    within_pairs_count,
)
from .posterior import PosteriorTable


class ReducibleChainError(ValueError):
    """Boundary edge probabilities make the single-flip chain reducible."""


@dataclass(frozen=True)
class ChainConfig:
    """Chain length, burn-in, thinning and seed.

    ``burn_in`` defaults to steps // 10. States are recorded after each
    proposal once the burn-in is past, keeping every ``thin``-th state.
    """

    steps: int
    burn_in: int | None = None
    thin: int = 1
    seed: int | tuple[int, ...] = 0

    def __post_init__(self) -> None:
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.steps // 10)
        if not 0 <= self.burn_in < self.steps:
            raise ValueError("need steps > burn_in >= 0")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")


@dataclass
class EmpiricalPosterior:
    """Visit counts over canonical state indices."""

    n: int
    counts: dict[int, int]
    total: int

    def __post_init__(self) -> None:
        if self.total <= 0 or sum(self.counts.values()) != self.total:
            raise ValueError("counts must be positive and sum to total")

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """(indices, frequencies) with indices ascending."""
        idx = np.array(sorted(self.counts), dtype=np.int64)
        freq = np.array([self.counts[int(i)] for i in idx], dtype=np.float64)
        freq /= self.total
        return idx, freq


def iter_chain(graph: Graph, params: SbmParams,
               config: ChainConfig) -> Iterator[tuple[int, int, float]]:
    """Yield (step, canonical index, log-likelihood) for each recorded state.

    Steps are 1-based proposal counts; the state after proposal s is
    recorded when s > burn_in and (s - burn_in - 1) % thin == 0. The chain
    starts from the all-zeros labeling and is deterministic given the seed.
    """
    p, q = params.p, params.q
    if not (0.0 < p < 1.0 and 0.0 < q < 1.0):
        raise ReducibleChainError(
            "single-flip proposals need p and q strictly inside (0, 1)"
        )
    n = graph.n
    rng = np.random.default_rng(config.seed)
    verts = rng.integers(0, n, size=config.steps).tolist()
    unif = rng.random(config.steps).tolist()

    adj = graph.adjacency
    deg = [a.bit_count() for a in adj]
    c_s = math.log(p) - math.log1p(-p) - math.log(q) + math.log1p(-q)
    c_w = math.log1p(-p) - math.log1p(-q)
    w_term = [within_pairs_count(n, m) * c_w for m in range(n + 1)]

    start = Assignment((0,) * n)
    ll = log_likelihood(suff_stats(graph, start), params)
    ones = 0
    m = 0
    full = (1 << n) - 1
    burn_in, thin = config.burn_in, config.thin
    exp = math.exp

    for step in range(1, config.steps + 1):
        v = verts[step - 1]
        e1 = (adj[v] & ones).bit_count()
        if ones >> v & 1:
            ds = deg[v] - 2 * e1
            new_m = m - 1
        else:
            ds = 2 * e1 - deg[v]
            new_m = m + 1
        dll = ds * c_s + w_term[new_m] - w_term[m]
        if dll >= 0.0 or unif[step - 1] < exp(dll):
            ones ^= 1 << v
            m = new_m
            ll += dll
        if step > burn_in and (step - burn_in - 1) % thin == 0:
            rep = ones if not ones & 1 else ones ^ full
            yield step, rep >> 1, ll


def run_chain(graph: Graph, params: SbmParams, config: ChainConfig) -> EmpiricalPosterior:
    """Aggregate the recorded chain states into visit counts."""
    counts: Counter[int] = Counter()
    for _, idx, _ in iter_chain(graph, params, config):
        counts[idx] += 1
    return EmpiricalPosterior(n=graph.n, counts=dict(counts), total=sum(counts.values()))


def dump_chain_csv(dest: IO[str], graph: Graph, params: SbmParams,
                   config: ChainConfig) -> None:
    """Write (step, canonical index, log-likelihood) rows for diagnostics."""
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(["step", "index", "log_likelihood"])
    for step, idx, ll in iter_chain(graph, params, config):
        writer.writerow([step, idx, f"{ll:.12g}"])


def tv_distance(empirical: EmpiricalPosterior, exact: PosteriorTable) -> float:
    """Total-variation distance between visit frequencies and the exact table."""
    if empirical.n != exact.n:
        raise ValueError("empirical and exact posterior sizes differ")
    idx, freq = empirical.support()
    mass = exact.masses[idx]
    unvisited = max(0.0, 1.0 - float(mass.sum()))
    return 0.5 * (float(np.abs(freq - mass).sum()) + unvisited)
