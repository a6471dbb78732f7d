"""Monte Carlo harnesses that check the concentration and coverage bounds.

Every experiment takes an explicit seed; replicate r draws from an
independent PCG64 stream keyed by (seed, r), so results are reproducible
and independent of execution order (replicates may run on a thread pool).
Comparisons against the one-sided bounds allow three binomial standard
errors of Monte Carlo slack: experiments report, tests assert.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import IO, Callable, Sequence

import numpy as np

from .core import (
    Assignment,
    SbmParams,
    balanced_assignment,
    hellinger_affinity,
    log_likelihood,
    min_edge_changes,
    random_assignment,
    sample_graph,
    suff_stats,
)
from .credconf import (
    ALMOST,
    EXACT,
    ConfidenceReport,
    credible_set,
    enlarge,
    enlargement_radius,
    plan_strategy,
    recovery_bound_almost,
    recovery_bound_exact,
    required_level,
)
from .mcmc import ChainConfig, run_chain, tv_distance
from .posterior import (
    N_MAX_DEFAULT,
    assignment_index,
    ball_mask,
    enumerate_posterior,
)


@dataclass
class CoverageResult:
    """Empirical coverage of (enlarged) credible sets against the claimed floor."""

    replicates: int
    hits: int
    empirical_coverage: float
    binomial_3sigma: float
    claimed_floor: float
    config: dict

    def to_dict(self) -> dict:
        return {
            "replicates": self.replicates,
            "hits": self.hits,
            "empirical_coverage": self.empirical_coverage,
            "binomial_3sigma": self.binomial_3sigma,
            "claimed_floor": self.claimed_floor,
            "config": self.config,
        }


@dataclass
class BoundCheckResult:
    """Monte Carlo estimate of an expected posterior mass against its bound."""

    lhs_estimate: float
    lhs_stderr: float
    rhs_bound: float
    direction: str  # "lower": estimate should be >= bound; "upper": <= bound
    satisfied_within_3sigma: bool
    config: dict

    def to_dict(self) -> dict:
        return {
            "lhs_estimate": self.lhs_estimate,
            "lhs_stderr": self.lhs_stderr,
            "rhs_bound": self.rhs_bound,
            "direction": self.direction,
            "satisfied_within_3sigma": self.satisfied_within_3sigma,
            "config": self.config,
        }


@dataclass
class EarlyStoppingRow:
    chain_length: int
    replicates: int
    hits: int
    empirical_coverage: float
    mean_tv: float | None

    def to_dict(self) -> dict:
        return {
            "chain_length": self.chain_length,
            "replicates": self.replicates,
            "hits": self.hits,
            "empirical_coverage": self.empirical_coverage,
            "mean_tv": self.mean_tv,
        }


def _map_replicates(fn: Callable[[int], object], replicates: int, threads: int) -> list:
    if threads <= 1:
        return [fn(r) for r in range(replicates)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(replicates)))


def _resolve_strategy(n: int, p: float, q: float, alpha: float, strategy: str,
                      a: float | None, a_grid: Sequence[float] | None
                      ) -> tuple[float, int, str, float | None, ConfidenceReport | None]:
    """(credible level, enlargement radius, mode, a, plan report if any)."""
    if strategy == EXACT:
        return required_level(n, p, q, alpha, EXACT), 0, EXACT, None, None
    if strategy == ALMOST:
        if a is None:
            raise ValueError("almost strategy needs the error fraction a")
        level = required_level(n, p, q, alpha, ALMOST, a)
        return level, enlargement_radius(a, n), ALMOST, a, None
    if strategy == "plan":
        report = plan_strategy(n, p, q, alpha, a_grid or (0.05, 0.1, 0.25))
        return (report.required_level, report.enlargement_radius,
                report.mode, report.a, report)
    raise ValueError(f"unknown strategy {strategy!r}")


def coverage_experiment(n: int, p: float, q: float, alpha: float, *,
                        strategy: str = EXACT, a: float | None = None,
                        a_grid: Sequence[float] | None = None,
                        truth: Assignment | None = None,
                        random_m: bool = False,
                        replicates: int = 500, seed: int = 0,
                        n_max: int = N_MAX_DEFAULT,
                        threads: int = 1) -> CoverageResult:
    """Frequency with which the (enlarged) credible set captures the truth.

    Per replicate: sample a graph from the truth, build the exact posterior,
    take the credible set at the required level for the target confidence
    1 - alpha, enlarge by the strategy's radius, and record membership of
    the canonical truth. The default truth is the balanced assignment with
    m = floor(n/2); ``random_m`` draws m uniformly from {0, ..., floor(n/2)}
    per replicate instead, exercising the unknown-sizes setting.
    """
    if replicates < 100:
        raise ValueError("coverage experiments need at least 100 replicates")
    params = SbmParams(p, q)
    level, radius, mode, a_used, _ = _resolve_strategy(n, p, q, alpha, strategy, a, a_grid)
    base_truth = truth if truth is not None else balanced_assignment(n)

    def one(r: int) -> bool:
        rng = np.random.default_rng((seed, r))
        truth_r = random_assignment(n, rng) if random_m else base_truth
        graph = sample_graph(params, truth_r, rng)
        table = enumerate_posterior(graph, params, n_max=n_max)
        members = enlarge(credible_set(table, level), radius)
        return members.contains_index(assignment_index(truth_r))

    hits = sum(_map_replicates(one, replicates, threads))
    coverage = hits / replicates
    return CoverageResult(
        replicates=replicates,
        hits=hits,
        empirical_coverage=coverage,
        binomial_3sigma=3.0 * math.sqrt(coverage * (1.0 - coverage) / replicates),
        claimed_floor=1.0 - alpha,
        config={
            "experiment": "coverage", "n": n, "p": p, "q": q, "alpha": alpha,
            "strategy": strategy, "mode": mode, "a": a_used,
            "required_level": level, "enlargement_radius": radius,
            "truth": base_truth.to_string() if not random_m else "random-m",
            "replicates": replicates, "seed": seed,
        },
    )


def concentration_experiment(n: int, p: float, q: float, *,
                             target: str = "singleton",
                             a: float | None = None,
                             sphere_k: int | None = None,
                             size_delta: int | None = None,
                             truth: Assignment | None = None,
                             replicates: int = 300, seed: int = 0,
                             n_max: int = N_MAX_DEFAULT,
                             threads: int = 1) -> BoundCheckResult:
    """Estimate the expected posterior mass of a target set around the truth.

    Targets and the bounds they are checked against:

    * ``singleton``: lower bound 1 - (n/2) rho^(n/2) exp(n rho^(n/2));
    * ``ball`` (radius ceil(a n)): the almost-mode recovery lower bound;
    * ``sphere`` (states at metric distance exactly ``sphere_k``): upper
      bound |S| rho^(k (n - k));
    * ``size_diff`` (states whose 1-count differs from the truth's by at
      least ``size_delta``): upper bound |S| rho^(delta (n - delta)).
    """
    params = SbmParams(p, q)
    truth = truth if truth is not None else balanced_assignment(n)
    truth_idx = assignment_index(truth)
    rho = hellinger_affinity(p, q)

    if target == "singleton":
        mask = ball_mask(n, truth_idx, 0)
        rhs = recovery_bound_exact(n, p, q)
        direction = "lower"
    elif target == "ball":
        if a is None:
            raise ValueError("ball target needs the error fraction a")
        mask = ball_mask(n, truth_idx, enlargement_radius(a, n))
        rhs = recovery_bound_almost(n, p, q, a)
        direction = "lower"
    elif target == "sphere":
        if sphere_k is None or not 1 <= sphere_k <= n // 2:
            raise ValueError("sphere target needs 1 <= sphere_k <= n//2")
        mask = ball_mask(n, truth_idx, sphere_k) & ~ball_mask(n, truth_idx, sphere_k - 1)
        rhs = int(mask.sum()) * rho ** (sphere_k * (n - sphere_k))
        direction = "upper"
    elif target == "size_diff":
        if size_delta is None or size_delta < 1:
            raise ValueError("size_diff target needs size_delta >= 1")
        pc = np.bitwise_count(np.arange(1 << (n - 1), dtype=np.uint32)).astype(np.int64)
        m_state = np.minimum(pc, n - pc)
        mask = np.abs(m_state - truth.m) >= size_delta
        if not mask.any():
            raise ValueError("size_diff target set is empty at this delta")
        rhs = int(mask.sum()) * rho ** min_edge_changes(0, size_delta, n)
        direction = "upper"
    else:
        raise ValueError(f"unknown target {target!r}")

    def one(r: int) -> float:
        rng = np.random.default_rng((seed, r))
        graph = sample_graph(params, truth, rng)
        table = enumerate_posterior(graph, params, n_max=n_max)
        return float(table.masses[mask].sum())

    values = np.array(_map_replicates(one, replicates, threads))
    estimate = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    satisfied = (estimate >= rhs - 3.0 * stderr if direction == "lower"
                 else estimate <= rhs + 3.0 * stderr)
    return BoundCheckResult(
        lhs_estimate=estimate,
        lhs_stderr=stderr,
        rhs_bound=rhs,
        direction=direction,
        satisfied_within_3sigma=satisfied,
        config={
            "experiment": "concentration", "n": n, "p": p, "q": q,
            "target": target, "a": a, "sphere_k": sphere_k,
            "size_delta": size_delta, "truth": truth.to_string(),
            "set_size": int(mask.sum()), "replicates": replicates, "seed": seed,
        },
    )


def lr_test_experiment(theta: Assignment, eta: Assignment, p: float, q: float, *,
                       replicates: int = 2000, seed: int = 0,
                       threads: int = 1) -> BoundCheckResult:
    """Power of the likelihood-ratio test between two labelings.

    The test accepts the alternative when its log-likelihood is strictly
    larger (1/2 on ties). The equally weighted error
    (1/2) P_theta[accept] + (1/2) P_eta[reject] is bounded above by
    (1/2) rho^(d1 + d2) with d1 + d2 the number of vertex pairs whose edge
    probability differs between the labelings.
    """
    from .core import edge_change_counts

    if theta.n != eta.n:
        raise ValueError("assignments must have equal length")
    d1, d2 = edge_change_counts(theta, eta)
    if d1 + d2 == 0:
        raise ValueError("labelings induce identical laws (equal or complementary)")
    if not (0.0 < p < 1.0 and 0.0 < q < 1.0):
        raise ValueError("test power needs p and q strictly inside (0, 1)")
    params = SbmParams(p, q)

    def phi(graph) -> float:
        ll_theta = log_likelihood(suff_stats(graph, theta), params)
        ll_eta = log_likelihood(suff_stats(graph, eta), params)
        if ll_eta > ll_theta:
            return 1.0
        if ll_eta == ll_theta:
            return 0.5
        return 0.0

    def one(r: int) -> float:
        g_theta = sample_graph(params, theta, (seed, r, 0))
        g_eta = sample_graph(params, eta, (seed, r, 1))
        return 0.5 * phi(g_theta) + 0.5 * (1.0 - phi(g_eta))

    values = np.array(_map_replicates(one, replicates, threads))
    estimate = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    rhs = 0.5 * hellinger_affinity(p, q) ** (d1 + d2)
    return BoundCheckResult(
        lhs_estimate=estimate,
        lhs_stderr=stderr,
        rhs_bound=rhs,
        direction="upper",
        satisfied_within_3sigma=estimate <= rhs + 3.0 * stderr,
        config={
            "experiment": "lr_test", "n": theta.n, "p": p, "q": q,
            "theta": theta.to_string(), "eta": eta.to_string(),
            "d1": d1, "d2": d2, "replicates": replicates, "seed": seed,
        },
    )


def early_stopping_study(n: int, p: float, q: float, alpha: float,
                         chain_lengths: Sequence[int], *,
                         strategy: str = EXACT, a: float | None = None,
                         truth: Assignment | None = None,
                         replicates: int = 100, seed: int = 0,
                         thin: int = 1,
                         n_max: int = N_MAX_DEFAULT,
                         threads: int = 1) -> list[EarlyStoppingRow]:
    """Coverage of chain-based credible sets as a function of chain length.

    Per replicate one graph is sampled and reused across all chain lengths
    (paired design). For each length a fresh chain is run, the credible set
    is built from visit frequencies at the required level, enlarged per the
    strategy, and membership of the truth recorded. When the exact engine
    can handle n, the mean total-variation distance between chain and exact
    posterior is reported alongside. No stopping rule is selected; the
    output is the trend table.
    """
    if not chain_lengths:
        raise ValueError("chain_lengths must be nonempty")
    params = SbmParams(p, q)
    level, radius, _, _, _ = _resolve_strategy(n, p, q, alpha, strategy, a, None)
    truth = truth if truth is not None else balanced_assignment(n)
    truth_idx = assignment_index(truth)
    exact_ok = n <= n_max

    def one(r: int) -> list[tuple[bool, float | None]]:
        rng = np.random.default_rng((seed, r))
        graph = sample_graph(params, truth, rng)
        table = enumerate_posterior(graph, params, n_max=n_max) if exact_ok else None
        out = []
        for j, length in enumerate(chain_lengths):
            config = ChainConfig(steps=int(length), thin=thin, seed=(seed, r, 1, j))
            emp = run_chain(graph, params, config)
            hit = enlarge(credible_set(emp, level), radius).contains_index(truth_idx)
            tv = tv_distance(emp, table) if table is not None else None
            out.append((hit, tv))
        return out

    per_rep = _map_replicates(one, replicates, threads)
    rows = []
    for j, length in enumerate(chain_lengths):
        hits = sum(rep[j][0] for rep in per_rep)
        tvs = [rep[j][1] for rep in per_rep if rep[j][1] is not None]
        rows.append(EarlyStoppingRow(
            chain_length=int(length),
            replicates=replicates,
            hits=hits,
            empirical_coverage=hits / replicates,
            mean_tv=float(np.mean(tvs)) if tvs else None,
        ))
    return rows


# ---------------------------------------------------------------------------
# machine-readable reports
# ---------------------------------------------------------------------------

def round_floats(obj, sig: int = 12):
    """Recursively round floats to ``sig`` significant digits for stable diffs."""
    if isinstance(obj, float):
        return float(f"{obj:.{sig}g}")
    if isinstance(obj, dict):
        return {k: round_floats(v, sig) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, sig) for v in obj]
    return obj


def write_json_report(dest: IO[str], experiment: str, config: dict,
                      results: list, seed: int | None) -> None:
    report = {
        "experiment": experiment,
        "config": round_floats(config),
        "results": round_floats(results),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
    }
    json.dump(report, dest, indent=2)
    dest.write("\n")


def write_csv_rows(dest: IO[str], rows: list[dict], fieldnames: Sequence[str] | None = None) -> None:
    if not rows:
        return
    fieldnames = list(fieldnames or rows[0].keys())
    writer = csv.DictWriter(dest, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({
            k: (f"{v:.12g}" if isinstance(v, float) else v) for k, v in row.items()
        })
