"""Auctioneer-provided capacity: forking one slot into a landing page of extra slots.

Forking original slot ``l`` into ``L`` landing-page slots of fitness ``f``
replaces ``gamma_l`` by ``gamma_l * f * gamma_k`` for ``k = 1..L``.  The
combined auction runs GSP on the merged, re-sorted curve.  Revenue is always
evaluated at the minimum SNE of each curve and efficiency as
``sum_j gamma_j s_j``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .auction import (AuctionError, Bidder, SlotCurve, _gammas, _sorted_scores,
                      efficiency, revenue_min_sne)

log = logging.getLogger(__name__)


class ForkError(ValueError):
    pass


class ForkTieError(ForkError):
    """Two merged slots have exactly the same CTR."""


class NonMonotoneError(ForkError):
    """A monotone search was requested where monotonicity is not guaranteed."""


@dataclass(frozen=True)
class ForkSpec:
    """Fork slot ``l`` into ``L`` extra slots of fitness ``f``.

    ``f`` may instead be given through its two factors, the landing-page ad
    relevance ``f_tilde`` and the landing-page CTR multiplier ``page_boost``.
    """

    l: int
    L: int
    f: float | None = None
    f_tilde: float | None = None
    page_boost: float | None = None

    def __post_init__(self):
        if self.f_tilde is not None and self.page_boost is not None:
            prod = self.f_tilde * self.page_boost
            if self.f is None:
                object.__setattr__(self, "f", prod)
            elif not math.isclose(self.f, prod, rel_tol=1e-12):
                raise ForkError(f"f={self.f} != f_tilde*page_boost={prod}")
        if self.f is None:
            raise ForkError("fitness f required")
        if self.L < 1:
            raise ForkError(f"L={self.L} must be >= 1")
        if self.f <= 0:
            raise ForkError(f"f={self.f} must be positive")

    def validate(self, curve: SlotCurve) -> None:
        if not 1 <= self.l <= curve.K:
            raise ForkError(f"l={self.l} outside 1..{curve.K}")
        if self.L > curve.K:
            raise ForkError(f"L={self.L} exceeds the {curve.K} available landing-page CTRs")
        if self.f * curve.gammas[0] >= 1:
            raise ForkError(f"f*gamma_1={self.f * curve.gammas[0]} must be < 1")


@dataclass(frozen=True)
class MergedCurve:
    """Sorted CTRs of the combined auction.

    ``provenance[j]`` is ``("orig", i)`` for original slot ``i`` or
    ``("fork", k)`` for landing-page slot ``k``.  ``crossing_index`` is
    ``max{i <= K : gamma_l f gamma_1 < gamma_i}``, which is also the merged
    position of the best landing-page slot.
    """

    tilde_gammas: tuple[float, ...]
    provenance: tuple[tuple[str, int], ...]
    crossing_index: int
    spec: ForkSpec

    @property
    def K(self) -> int:
        return len(self.tilde_gammas)

    def ctr(self, j: int) -> float:
        return self.tilde_gammas[j - 1] if 1 <= j <= len(self.tilde_gammas) else 0.0

    def fork_positions(self) -> list[int]:
        return [j for j, (kind, _) in enumerate(self.provenance, start=1) if kind == "fork"]

    def __iter__(self):
        return iter(self.tilde_gammas)

    def __len__(self):
        return len(self.tilde_gammas)


def fork(curve: SlotCurve, spec: ForkSpec, tie_break: bool = False) -> MergedCurve:
    """Merge the landing-page slots into the original curve.

    Exact CTR ties raise :class:`ForkTieError` unless ``tie_break`` is set, in
    which case original slots rank ahead of landing-page slots.
    """
    spec.validate(curve)
    g, l = curve.gammas, spec.l
    items = [(g[j - 1], 0, j) for j in range(1, curve.K + 1) if j != l]
    items += [(g[l - 1] * spec.f * g[k - 1], 1, k) for k in range(1, spec.L + 1)]
    items.sort(key=lambda t: (-t[0], t[1], t[2]))
    if not tie_break:
        for a, b in zip(items, items[1:]):
            if a[0] == b[0]:
                tag = lambda t: f"{'original slot' if t[1] == 0 else 'landing slot'} {t[2]}"  # noqa: E731
                raise ForkTieError(f"CTR tie at {a[0]!r} between {tag(a)} and {tag(b)}")
    top = g[l - 1] * spec.f * g[0]
    i0 = max(i for i in range(1, curve.K + 1) if top < g[i - 1])
    return MergedCurve(
        tilde_gammas=tuple(t[0] for t in items),
        provenance=tuple(("orig" if t[1] == 0 else "fork", t[2]) for t in items),
        crossing_index=i0,
        spec=spec,
    )


def capacity(curve) -> float:
    """Sum of position CTRs."""
    return float(sum(_gammas(curve)))


def revenue_after_fork(merged: MergedCurve, bidders) -> float:
    # missing bidders count as zero scores
    return revenue_min_sne(merged, bidders)


def efficiency_after_fork(merged: MergedCurve, bidders) -> float:
    return efficiency(merged, bidders)


def value_of_capacity(R: float, R0: float) -> float:
    """Relative revenue gain ``(R - R0) / R0``."""
    if R0 <= 0:
        raise ForkError(f"baseline revenue R0={R0} must be positive")
    return (R - R0) / R0


def _pad(s: list[float], n: int) -> list[float]:
    return s + [0.0] * max(0, n - len(s))


def eta(curve: SlotCurve, merged: MergedCurve, l: int | None = None) -> float:
    """``min_{l<=j<=K} (gt_j - gt_{j+1}) / (g_j - g_{j+1})``."""
    l = merged.spec.l if l is None else l
    if not 1 <= l <= curve.K:
        raise ForkError(f"l={l} outside 1..{curve.K}")
    return min((merged.ctr(j) - merged.ctr(j + 1)) / (curve.ctr(j) - curve.ctr(j + 1))
               for j in range(l, curve.K + 1))


def beta(curve: SlotCurve, merged: MergedCurve, l: int | None = None) -> float:
    """``min_{l<=j<=K} gt_j / g_j``."""
    l = merged.spec.l if l is None else l
    if not 1 <= l <= curve.K:
        raise ForkError(f"l={l} outside 1..{curve.K}")
    return min(merged.ctr(j) / curve.ctr(j) for j in range(l, curve.K + 1))


@dataclass(frozen=True)
class ConditionCheck:
    value: float  # eta or beta
    rhs: float
    holds: bool


def check_theorem_rev1(curve: SlotCurve, merged: MergedCurve, bidders) -> ConditionCheck:
    """Sufficient condition for a revenue gain: ``eta > rhs``."""
    K, l, L = curve.K, merged.spec.l, merged.spec.L
    s = [None] + _pad(_sorted_scores(bidders), K + L + 1)
    num = (curve.ctr(l) - merged.ctr(l)) * (l - 1) * s[l]
    num += sum((merged.ctr(j) - merged.ctr(j + 1)) * j * s[j + 1] for j in range(K + 1, K + L))
    den = sum((curve.ctr(j) - curve.ctr(j + 1)) * j * s[j + 1] for j in range(l, K + 1))
    if den == 0:
        raise ForkError("revenue condition undefined: no score below the forked slot")
    e = eta(curve, merged, l)
    rhs = 1.0 - num / den
    return ConditionCheck(e, rhs, e > rhs)


def check_theorem_eff1(curve: SlotCurve, merged: MergedCurve, bidders) -> ConditionCheck:
    """Sufficient condition for an efficiency gain: ``beta > rhs``."""
    K, l, L = curve.K, merged.spec.l, merged.spec.L
    s = [None] + _pad(_sorted_scores(bidders), K + L + 1)
    num = sum(merged.ctr(j) * s[j] for j in range(K + 1, K + L))
    den = sum(curve.ctr(j) * s[j] for j in range(l, K + 1))
    if den == 0:
        raise ForkError("efficiency condition undefined: zero value from slot l onward")
    b = beta(curve, merged, l)
    rhs = 1.0 - num / den
    return ConditionCheck(b, rhs, b > rhs)


# --- sweeps ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    f: float
    capacity: float
    revenue: float
    efficiency: float
    value_of_capacity: float
    eta: float
    beta: float
    theorem_rev_holds: bool
    theorem_eff_holds: bool


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    skipped: list[tuple[float, str]] = field(default_factory=list)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def _holds(check, *args) -> bool:
    try:
        return check(*args).holds
    except ForkError:
        return False


def evaluate_fork(curve: SlotCurve, bidders, spec: ForkSpec, tie_break: bool = False) -> SweepRow:
    merged = fork(curve, spec, tie_break=tie_break)
    R0 = revenue_min_sne(curve, bidders)
    R = revenue_after_fork(merged, bidders)
    return SweepRow(
        f=spec.f,
        capacity=capacity(merged),
        revenue=R,
        efficiency=efficiency_after_fork(merged, bidders),
        value_of_capacity=value_of_capacity(R, R0),
        eta=eta(curve, merged),
        beta=beta(curve, merged),
        theorem_rev_holds=_holds(check_theorem_rev1, curve, merged, bidders),
        theorem_eff_holds=_holds(check_theorem_eff1, curve, merged, bidders),
    )


def sweep_fitness(curve: SlotCurve, bidders, l: int, L: int, f_grid: Iterable[float],
                  tie_break: bool = False) -> SweepResult:
    """One row per fitness value, ordered by ``f``; rows hitting a CTR tie are skipped."""
    grid = sorted(float(f) for f in f_grid)
    bad = [f for f in grid if f * curve.gammas[0] >= 1 or f <= 0]
    if bad:
        raise ForkError(f"fitness values outside (0, 1/gamma_1): {bad}")
    out = SweepResult()
    for f in grid:
        try:
            out.rows.append(evaluate_fork(curve, bidders, ForkSpec(l, L, f), tie_break))
        except ForkTieError as exc:
            log.info("f=%r skipped: %s", f, exc)
            out.skipped.append((f, str(exc)))
    return out


# --- revenue-loss premises -----------------------------------------------------

@dataclass(frozen=True)
class LemmaCheck:
    l1_holds: bool
    l2_holds: bool
    gap_failures: tuple[int, ...]
    score_failures: tuple[int, ...]


def check_lemma_preconditions(curve: SlotCurve, bidders, l: int) -> LemmaCheck:
    """Evaluate the two worst-case revenue premises.

    gap: ``gamma_1 - gamma_2 >= gamma_j - gamma_{j+1}`` for ``1 <= j <= K``
    (with ``gamma_{K+1} = 0``); scores: ``(j-1) s_j >= j s_{j+1}`` for
    ``j >= 2`` (zero scores past the last bidder).
    """
    top_gap = curve.ctr(1) - curve.ctr(2)
    gap_fail = tuple(j for j in range(1, curve.K + 1)
                     if top_gap < curve.ctr(j) - curve.ctr(j + 1))
    s = [None] + _sorted_scores(bidders) + [0.0]
    score_fail = tuple(j for j in range(2, len(s) - 1) if (j - 1) * s[j] < j * s[j + 1])
    return LemmaCheck(
        l1_holds=l == 1 and not gap_fail and not score_fail,
        l2_holds=l >= 2 and not score_fail,
        gap_failures=gap_fail,
        score_failures=score_fail,
    )


# --- critical fitness --------------------------------------------------------

def _target_fn(curve, bidders, l, L, target):
    if target == "efficiency":
        E0 = efficiency(curve, bidders)
        return lambda f: efficiency_after_fork(fork(curve, ForkSpec(l, L, f), tie_break=True),
                                               bidders) - E0
    if target == "revenue":
        R0 = revenue_min_sne(curve, bidders)
        return lambda f: value_of_capacity(
            revenue_after_fork(fork(curve, ForkSpec(l, L, f), tie_break=True), bidders), R0)
    raise ForkError(f"unknown target {target!r}")


def _check_range(curve, f_range):
    lo, hi = f_range
    if not 0 < lo < hi or hi * curve.gammas[0] >= 1:
        raise ForkError(f"invalid fitness range {f_range} (need 0 < lo < hi < 1/gamma_1)")
    return lo, hi


def critical_fitness(curve: SlotCurve, bidders, l: int, L: int, target: str,
                     f_range: tuple[float, float], tol: float = 1e-6) -> float | None:
    """Fitness where the revenue or efficiency change flips sign, by bisection.

    For ``target="efficiency"`` this is the smallest ``f`` with ``E >= E_0``.
    For ``target="revenue"`` the revenue change is only known to be monotone
    under the score-spread premise with ``l >= 2``; otherwise
    :class:`NonMonotoneError` is raised and :func:`scan_sign_changes` should
    be used.  Returns ``None`` when there is no sign change in range.
    """
    if tol <= 0:
        raise ForkError("tol must be positive")
    lo, hi = _check_range(curve, f_range)
    if target == "revenue":
        pre = check_lemma_preconditions(curve, bidders, l)
        if not pre.l2_holds:
            raise NonMonotoneError(
                "value of capacity is not guaranteed monotone in f here "
                f"(l={l}, score premise failures at j={list(pre.score_failures)}); "
                "use scan_sign_changes")
    g = _target_fn(curve, bidders, l, L, target)
    if target == "efficiency":
        if g(lo) >= 0:
            return lo
        if g(hi) < 0:
            return None
        ok = lambda v: v >= 0  # noqa: E731
    else:
        # decreasing: locate the last f with positive value
        if g(lo) <= 0 or g(hi) > 0:
            return None
        ok = lambda v: v <= 0  # noqa: E731
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(g(mid)):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def scan_sign_changes(curve: SlotCurve, bidders, l: int, L: int, target: str,
                      f_grid: Sequence[float]) -> list[tuple[float, float]]:
    """Adjacent grid intervals over which the revenue/efficiency change switches sign."""
    g = _target_fn(curve, bidders, l, L, target)
    grid = sorted(f_grid)
    vals = [np.sign(g(f)) for f in grid]
    return [(grid[k], grid[k + 1]) for k in range(len(grid) - 1) if vals[k] != vals[k + 1]]


# --- worked instances --------------------------------------------------------

@dataclass(frozen=True)
class ForkInstance:
    curve: SlotCurve
    bidders: tuple[Bidder, ...]
    spec: ForkSpec

    @property
    def merged(self) -> MergedCurve:
        return fork(self.curve, self.spec)

    @property
    def scores(self) -> list[float]:
        return [b.score for b in self.bidders]


def geometric_curve(K: int, r: float) -> SlotCurve:
    if not 0 < r < 1:
        raise ForkError(f"ratio r={r} must lie in (0, 1)")
    return SlotCurve(tuple(r ** (j - 1) for j in range(1, K + 1)))


def _upper_scores(K: int, s_K: float) -> list[float]:
    return [s_K + (K - j) for j in range(1, K + 1)]


def _as_bidders(scores):
    return tuple(Bidder(j, s) for j, s in enumerate(scores, start=1))


def make_example1(K: int, r: float, f: float, L: int,
                  s_overrides: dict[int, float] | None = None) -> ForkInstance:
    """Geometric CTRs, last slot forked, scores rising relative to rank below ``K``.

    Premises: ``(K-1) s_K > K s_{K+1}`` and ``j s_{j+1} >= (j-1) s_j`` for
    ``K+1 <= j <= K+L-1``.  Defaults meet the second at equality.
    """
    if K < 2:
        raise ForkError("needs K >= 2 so that (K-1) s_K > K s_{K+1} can hold")
    curve = geometric_curve(K, r)
    s = _upper_scores(K, 10.0)
    s.append(0.5 * (K - 1) / K * s[K - 1])
    for j in range(K + 1, K + L):
        s.append((j - 1) / j * s[j - 1])
    for j, v in (s_overrides or {}).items():
        if not 1 <= j <= len(s):
            raise ForkError(f"override index {j} outside 1..{len(s)}")
        s[j - 1] = float(v)
    S = [None] + s
    if not (K - 1) * S[K] > K * S[K + 1]:
        raise ForkError(f"premise (K-1) s_K > K s_(K+1) fails: {(K - 1) * S[K]} <= {K * S[K + 1]}")
    for j in range(K + 1, K + L):
        if j * S[j + 1] < (j - 1) * S[j]:
            raise ForkError(f"premise j s_(j+1) >= (j-1) s_j fails at j={j}")
    _sorted_scores(s)
    spec = ForkSpec(K, L, f)
    spec.validate(curve)
    return ForkInstance(curve, _as_bidders(s), spec)


def make_example2(K: int, r: float, f: float, L: int, alpha: float,
                  s_K: float = 10.0) -> ForkInstance:
    """Geometric CTRs, last slot forked, ``s_{K+j} = alpha^j s_K``."""
    if not 0 < alpha < 1:
        raise ForkError(f"alpha={alpha} must lie in (0, 1)")
    curve = geometric_curve(K, r)
    s = _upper_scores(K, s_K) + [alpha ** j * s_K for j in range(1, L + 1)]
    spec = ForkSpec(K, L, f)
    spec.validate(curve)
    return ForkInstance(curve, _as_bidders(s), spec)


def example2_threshold(r: float, alpha: float, L: int) -> float:
    """Fitness above which the efficiency condition holds for the second worked instance."""
    return (1 - alpha * r) / (1 - (alpha * r) ** L)
