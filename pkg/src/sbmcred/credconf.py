"""Credible sets, Hamming enlargements, and finite-sample confidence bounds.

The conversion from Bayesian credibility to frequentist confidence rests on
lower bounds for the expected posterior mass near the true labeling, all
driven by the Hellinger affinity rho = rho(p, q):

* exact mode: the expected mass of the truth itself is at least
  ``1 - (n/2) rho^(n/2) exp(n rho^(n/2))``, so a credible set of level
  ``1 - gamma`` covers the truth with probability at least
  ``1 - n rho^(n/2) exp(n rho^(n/2)) / (2 (1 - gamma))``;
* almost mode (error fraction ``0 < a < 1/2``): with
  ``f = (e/a) rho^(n/2) < 1``, the metric ball of radius ``ceil(a n)``
  around the truth has expected mass at least
  ``1 - f^(a n) / (2 (1 - f))``, so the ``ceil(a n)``-enlargement of a
  credible set covers with probability at least
  ``1 - f^(a n) / (2 (1 - gamma) (1 - f))``.

Inverting either bound for a target confidence ``1 - alpha`` gives the
required credible level; sweeping n gives a critical graph size where that
level drops below one (and soon after, toward zero). All outputs clamp to
[0, 1] unless asked for raw values, since the bounds are vacuous at small n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core import Assignment, hellinger_affinity
from .mcmc import EmpiricalPosterior
from .posterior import PosteriorTable, assignment_from_index

EXACT = "exact"
ALMOST = "almost"
LITERAL = "literal"
HALF_LEVEL = "half_level"

_EXP_MAX = 700.0  # exp() overflow threshold, with margin


class BoundDivergenceError(ValueError):
    """Geometric tail factor at least 1: the almost-mode bound is inapplicable."""


def _exp(x: float) -> float:
    return math.inf if x > _EXP_MAX else math.exp(x)


def _check_interior(p: float, q: float) -> float:
    if not (0.0 < p < 1.0 and 0.0 < q < 1.0):
        raise ValueError(
            "affinity-based bounds need edge probabilities strictly inside (0, 1)"
        )
    return hellinger_affinity(p, q)


def _exact_tail(n: int, rho: float) -> float:
    """(n/2) rho^(n/2) exp(n rho^(n/2)), evaluated in the log domain."""
    if rho == 0.0:
        return 0.0
    # n rho^(n/2) = 2 exp(log_half), so the tail is exp(log_half + 2 exp(log_half))
    log_half = math.log(n / 2) + (n / 2) * math.log(rho)
    return _exp(log_half + 2.0 * _exp(log_half))


def _geom_factor(n: int, rho: float, a: float) -> float:
    """f = (e/a) rho^(n/2)."""
    if not 0.0 < a < 0.5:
        raise ValueError(f"error fraction must lie in (0, 1/2), got {a}")
    if rho == 0.0:
        return 0.0
    return _exp(1.0 - math.log(a) + (n / 2) * math.log(rho))


def _almost_tail(n: int, rho: float, a: float) -> float:
    """(1/2) f^(a n) / (1 - f) for f < 1, inf otherwise."""
    f = _geom_factor(n, rho, a)
    if f >= 1.0:
        return math.inf
    if f == 0.0:
        return 0.0
    return 0.5 * _exp(a * n * math.log(f)) / (1.0 - f)


def enlargement_radius(a: float, n: int) -> int:
    """ceil(a * n), guarded against ties produced by binary float products."""
    if not 0.0 < a < 0.5:
        raise ValueError(f"error fraction must lie in (0, 1/2), got {a}")
    return math.ceil(a * n - 1e-9)


def recovery_bound_exact(n: int, p: float, q: float, *, clamp: bool = True) -> float:
    """Lower bound on the expected posterior mass of the true labeling."""
    rho = _check_interior(p, q)
    raw = 1.0 - _exact_tail(n, rho)
    return max(0.0, raw) if clamp else raw


def recovery_bound_almost(n: int, p: float, q: float, a: float, *,
                          clamp: bool = True) -> float:
    """Lower bound on the expected posterior mass of the radius-ceil(a n) ball.

    The exponent uses the real value a*n; only the enlargement radius is
    rounded up. Raises :class:`BoundDivergenceError` when the geometric
    factor (e/a) rho^(n/2) is not below one.
    """
    rho = _check_interior(p, q)
    f = _geom_factor(n, rho, a)
    if f >= 1.0:
        raise BoundDivergenceError(
            f"(e/a) rho^(n/2) = {f:.6g} >= 1 at n={n}: bound inapplicable"
        )
    raw = 1.0 - _almost_tail(n, rho, a)
    return max(0.0, raw) if clamp else raw


def required_level(n: int, p: float, q: float, alpha: float, mode: str = EXACT,
                   a: float | None = None, *, clamp: bool = True) -> float:
    """Credible level that makes a (possibly enlarged) credible set a
    confidence set of level 1 - alpha.

    Exact mode: min(1, (n / 2 alpha) rho^(n/2) exp(n rho^(n/2))). Almost
    mode: min(1, f^(a n) / (2 alpha (1 - f))), returning 1 whenever the
    geometric factor f is at least 1.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    rho = _check_interior(p, q)
    if mode == EXACT:
        raw = _exact_tail(n, rho) / alpha
    elif mode == ALMOST:
        if a is None:
            raise ValueError("almost mode needs the error fraction a")
        raw = _almost_tail(n, rho, a) / alpha
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return min(1.0, raw) if clamp else raw


def confidence_floor(n: int, p: float, q: float, gamma: float, mode: str = EXACT,
                     a: float | None = None, *, clamp: bool = True) -> float:
    """Guaranteed coverage of a level-(1 - gamma) credible set (or its
    ceil(a n)-enlargement in almost mode)."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    rho = _check_interior(p, q)
    if mode == EXACT:
        raw = 1.0 - _exact_tail(n, rho) / (1.0 - gamma)
    elif mode == ALMOST:
        if a is None:
            raise ValueError("almost mode needs the error fraction a")
        raw = 1.0 - _almost_tail(n, rho, a) / (1.0 - gamma)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return max(0.0, raw) if clamp else raw


def critical_n(p: float, q: float, alpha: float, mode: str = EXACT,
               a: float | None = None, criterion: str = LITERAL,
               n_cap: int = 10 ** 6) -> int | None:
    """Smallest graph size where low-credibility sets reach the confidence target.

    ``literal`` uses the defining inequalities
    ``n rho^(n/2) exp(n rho^(n/2)) < alpha`` (exact) and
    ``f^(a n) / (alpha (1 - f)) < alpha`` (almost, f < 1 required);
    ``half_level`` takes the first n with required level below 1/2. In exact
    mode the two coincide algebraically. Returns None when no n up to the
    cap qualifies (in particular for p == q).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if criterion not in (LITERAL, HALF_LEVEL):
        raise ValueError(f"unknown criterion {criterion!r}")
    rho = _check_interior(p, q)
    if rho >= 1.0:
        return None
    if mode == ALMOST and a is None:
        raise ValueError("almost mode needs the error fraction a")
    for n in range(1, n_cap + 1):
        if criterion == HALF_LEVEL:
            if required_level(n, p, q, alpha, mode, a) < 0.5:
                return n
        elif mode == EXACT:
            if 2.0 * _exact_tail(n, rho) < alpha:
                return n
        else:
            f = _geom_factor(n, rho, a)
            if f < 1.0 and 2.0 * _almost_tail(n, rho, a) / alpha < alpha:
                return n
    return None


# ---------------------------------------------------------------------------
# credible sets and enlargements
# ---------------------------------------------------------------------------

MassSource = Union[PosteriorTable, EmpiricalPosterior]


@dataclass
class CredibleSet:
    """Highest-mass states whose total just reaches the target level.

    ``member_indices`` are canonical state indices sorted by decreasing
    mass, ties by ascending index; ``achieved_mass`` is their total.
    """

    n: int
    member_indices: np.ndarray
    target_level: float
    achieved_mass: float

    def __len__(self) -> int:
        return len(self.member_indices)

    def member_assignments(self) -> list[Assignment]:
        return [assignment_from_index(self.n, int(i)) for i in self.member_indices]


@dataclass
class EnlargedSet:
    """Union of metric balls of the given radius around credible-set members."""

    n: int
    member_indices: np.ndarray  # ascending
    radius: int

    def __len__(self) -> int:
        return len(self.member_indices)

    def contains_index(self, index: int) -> bool:
        pos = int(np.searchsorted(self.member_indices, index))
        return pos < len(self.member_indices) and int(self.member_indices[pos]) == index

    def contains(self, assignment: Assignment) -> bool:
        from .posterior import assignment_index

        return self.contains_index(assignment_index(assignment))


def _support_of(source: MassSource) -> tuple[int, np.ndarray, np.ndarray]:
    if isinstance(source, PosteriorTable):
        return source.n, np.arange(source.size, dtype=np.int64), source.masses
    if isinstance(source, EmpiricalPosterior):
        idx, freq = source.support()
        return source.n, idx, freq
    raise TypeError(f"cannot build credible sets from {type(source).__name__}")


def credible_set(masses: MassSource, level: float) -> CredibleSet:
    """Shortest decreasing-mass prefix with cumulative mass >= level.

    Level 0 returns the full nonzero-mass support, still ordered by
    decreasing mass. Ties are broken by ascending state index, so the
    construction is deterministic.
    """
    if not 0.0 <= level <= 1.0:
        raise ValueError(f"level must lie in [0, 1], got {level}")
    n, idx, weights = _support_of(masses)
    order = np.argsort(-weights, kind="stable")
    if level == 0.0:
        chosen = order[weights[order] > 0.0]
        achieved = float(weights[chosen].sum())
    else:
        csum = np.cumsum(weights[order])
        stop = int(np.searchsorted(csum, min(level, float(csum[-1])), side="left"))
        chosen = order[:stop + 1]
        achieved = float(csum[stop])
    return CredibleSet(
        n=n,
        member_indices=idx[chosen],
        target_level=level,
        achieved_mass=achieved,
    )


def enlarge(credible: CredibleSet, radius: int) -> EnlargedSet:
    """All states within metric distance <= radius of some credible-set member."""
    n = credible.n
    if not 0 <= radius <= n // 2:
        raise ValueError(f"radius must lie in [0, n//2], got {radius}")
    members = np.unique(credible.member_indices)
    if radius == 0:
        return EnlargedSet(n=n, member_indices=members, radius=0)
    size = 1 << (n - 1)
    if len(members) == size:
        return EnlargedSet(n=n, member_indices=np.arange(size, dtype=np.int64), radius=radius)
    states = np.arange(size, dtype=np.uint32)
    mask = np.zeros(size, dtype=bool)
    for c in members:
        h = np.bitwise_count(states ^ np.uint32(c))
        mask |= (h <= radius) | (h >= n - radius)
        if mask.all():
            break
    return EnlargedSet(n=n, member_indices=np.flatnonzero(mask).astype(np.int64), radius=radius)


# ---------------------------------------------------------------------------
# strategy planning
# ---------------------------------------------------------------------------

@dataclass
class ConfidenceReport:
    """Chosen construction for a target confidence level at one graph size."""

    mode: str                    # "exact" or "almost"
    a: float | None              # error fraction in almost mode
    required_level: float
    confidence_floor: float
    enlargement_radius: int      # 0 in exact mode, ceil(a n) otherwise
    critical_n: int | None
    identifiable: bool           # False when p == q (no community signal)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "a": self.a,
            "required_level": self.required_level,
            "confidence_floor": self.confidence_floor,
            "enlargement_radius": self.enlargement_radius,
            "critical_n": self.critical_n,
            "identifiable": self.identifiable,
        }


def plan_strategy(n: int, p: float, q: float, alpha: float,
                  a_grid: Sequence[float]) -> ConfidenceReport:
    """Pick the construction with the smallest required credible level.

    Candidates are exact mode plus almost mode at every fraction in the
    grid. Ties prefer exact mode (radius 0), then the smallest fraction.
    Divergent almost-mode entries surface as level 1 and therefore never
    beat exact mode.
    """
    if not a_grid:
        raise ValueError("a_grid must be nonempty")
    candidates: list[tuple[float, int, float, str, float | None]] = [
        (required_level(n, p, q, alpha, EXACT), 0, 0.0, EXACT, None)
    ]
    for a in sorted(a_grid):
        candidates.append(
            (required_level(n, p, q, alpha, ALMOST, a), 1, a, ALMOST, a)
        )
    level, _, _, mode, a = min(candidates, key=lambda c: (c[0], c[1], c[2]))
    return ConfidenceReport(
        mode=mode,
        a=a,
        required_level=level,
        confidence_floor=floor_at_required_level(n, p, q, alpha, level, mode, a),
        enlargement_radius=0 if mode == EXACT else enlargement_radius(a, n),
        critical_n=critical_n(p, q, alpha, mode, a),
        identifiable=p != q,
    )


def floor_at_required_level(n: int, p: float, q: float, alpha: float,
                            level: float, mode: str, a: float | None) -> float:
    """Coverage floor of credible sets built at the required level.

    Below the cap the bound inverts exactly to 1 - alpha; at the cap the
    floor is evaluated at gamma = 0. Computing through gamma = 1 - level
    would lose everything once the level underflows toward zero.
    """
    if level >= 1.0:
        return confidence_floor(n, p, q, 0.0, mode, a)
    return 1.0 - alpha


# ---------------------------------------------------------------------------
# asymptotic condition evaluators
# ---------------------------------------------------------------------------

CONDITION_KINDS = (
    "exact_known_sizes",          # ((sqrt(c1)-sqrt(c2))^2 - 2) log n + log log n
    "detect_ratio",               # (c1-c2)^2 / (2 (c1+c2))
    "detect_ratio_divergence",    # same value, judged against divergence
    "almost_exact_exponent",      # a n (log a + (sqrt(c1)-sqrt(c2))^2 / 4 - 1)
    "exact_unknown_sizes",        # ((sqrt(c1)-sqrt(c2))^2 - c1 c2 log(n)/(2n) - 4) log n
    "exact_unknown_sizes_simple", # ((sqrt(c1)-sqrt(c2))^2 - 4) log n
    "fixed_fraction_gap",         # (sqrt(c1)-sqrt(c2))^2 - 4 C (1 - log a)
    "vanishing_fraction_gap",     # (sqrt(c1)-sqrt(c2))^2 + 4 C log a
)


def condition_value(kind: str, coeff1: float, coeff2: float, n: int, *,
                    a: float | None = None, big_c: float | None = None) -> float:
    """Scalar value of a named sparsity/recovery condition at graph size n.

    Callers judge recovery regimes by sweeping n and watching for
    divergence (or comparing against the relevant threshold).
    """
    if coeff1 < 0 or coeff2 < 0:
        raise ValueError("phase coefficients must be nonnegative")
    if n < 2:
        raise ValueError("n must be at least 2")
    gap = (math.sqrt(coeff1) - math.sqrt(coeff2)) ** 2
    if kind == "exact_known_sizes":
        return (gap - 2.0) * math.log(n) + math.log(math.log(n))
    if kind in ("detect_ratio", "detect_ratio_divergence"):
        if coeff1 + coeff2 == 0:
            return 0.0
        return (coeff1 - coeff2) ** 2 / (2.0 * (coeff1 + coeff2))
    if kind == "almost_exact_exponent":
        if a is None:
            raise ValueError(f"{kind} needs the error fraction a")
        if not 0.0 < a < 0.5:
            raise ValueError(f"error fraction must lie in (0, 1/2), got {a}")
        return a * n * (math.log(a) + gap / 4.0 - 1.0)
    if kind == "exact_unknown_sizes":
        return (gap - coeff1 * coeff2 * math.log(n) / (2.0 * n) - 4.0) * math.log(n)
    if kind == "exact_unknown_sizes_simple":
        return (gap - 4.0) * math.log(n)
    if kind in ("fixed_fraction_gap", "vanishing_fraction_gap"):
        if a is None or big_c is None:
            raise ValueError(f"{kind} needs both the fraction a and the constant C")
        if not 0.0 < a < 0.5:
            raise ValueError(f"error fraction must lie in (0, 1/2), got {a}")
        if big_c <= 1.0:
            raise ValueError(f"constant C must exceed 1, got {big_c}")
        if kind == "fixed_fraction_gap":
            return gap - 4.0 * big_c * (1.0 - math.log(a))
        return gap + 4.0 * big_c * math.log(a)
    raise ValueError(f"unknown condition kind {kind!r}")


# ---------------------------------------------------------------------------
# inequality evaluators backing the tail bounds
# ---------------------------------------------------------------------------

def binomial_sum_bounds(n: int, x: float) -> tuple[float, float, float]:
    """The three expressions of the binomial tail chain, in statement form:

    ``sum_{k=1}^{floor(n/2)} C(n,k) x^(k(n-k))
      <= 2 ((1 + x^(n/2))^n - 1)
      <= 2 n x^(n/2) exp(n x^(n/2))``.

    Terms are evaluated in the log domain so n up to a few hundred is safe.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0, 0.0, 0.0
    log_x = math.log(x)
    lhs = 0.0
    for k in range(1, n // 2 + 1):
        log_term = (
            math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
            + k * (n - k) * log_x
        )
        lhs += _exp(log_term)
    y = _exp((n / 2) * log_x)
    mid = 2.0 * math.expm1(n * math.log1p(y))
    outer = 2.0 * n * y * _exp(n * y)
    return lhs, mid, outer


def compound_exp_bounds(r: int, x: float) -> tuple[float, float]:
    """((1 + x/r)^r, e^x); the first never exceeds the second for x > -r."""
    if r < 1:
        raise ValueError("r must be a positive integer")
    if x <= -r:
        raise ValueError(f"need x > -r, got x={x}, r={r}")
    return _exp(r * math.log1p(x / r)), _exp(x)
