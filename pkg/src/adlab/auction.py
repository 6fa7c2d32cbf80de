"""Rank-by-revenue position auction with generalized second pricing.

Bidders are ranked by ``r_i = e_i * b_i`` and the bidder at rank ``i`` pays
``r_{i+1} / e_i`` per click.  Beyond allocation and payoffs, the module
checks the symmetric Nash equilibrium (SNE) conditions and builds the
bidder-optimal SNE with its revenue.  A brute-force best-response oracle
cross-checks the analytic equilibrium test.

Ranks and slot positions are 1-based throughout, matching the usual
notation of position auctions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

BidderId = Union[int, str]

DEFAULT_TOL = 1e-9
# relative gap below which two ranking scores count as tied
SCORE_TIE_RTOL = 1e-12


class AuctionError(ValueError):
    """Raised for malformed auction inputs."""


@dataclass(frozen=True)
class SlotCurve:
    """Position click-through rates ``gamma_1 > gamma_2 > ... > gamma_K``."""

    gammas: tuple[float, ...]

    def __post_init__(self):
        g = tuple(float(x) for x in self.gammas)
        object.__setattr__(self, "gammas", g)
        for j, x in enumerate(g, start=1):
            if not 0.0 < x <= 1.0:
                raise AuctionError(f"gamma_{j}={x} outside (0, 1]")
        for j in range(len(g) - 1):
            if not g[j] > g[j + 1]:
                raise AuctionError(
                    f"gammas must be strictly decreasing: gamma_{j + 1}={g[j]} "
                    f"<= gamma_{j + 2}={g[j + 1]}"
                )

    @property
    def K(self) -> int:
        return len(self.gammas)

    def ctr(self, j: int) -> float:
        """CTR of 1-based position ``j``; zero beyond the last slot."""
        return self.gammas[j - 1] if 1 <= j <= len(self.gammas) else 0.0

    def __len__(self):
        return len(self.gammas)

    def __iter__(self):
        return iter(self.gammas)


@dataclass(frozen=True)
class Bidder:
    id: BidderId
    value: float
    relevance: float = 1.0

    def __post_init__(self):
        if self.value < 0:
            raise AuctionError(f"bidder {self.id!r}: negative value {self.value}")
        if not 0.0 < self.relevance <= 1.0:
            raise AuctionError(f"bidder {self.id!r}: relevance {self.relevance} outside (0, 1]")

    @property
    def score(self) -> float:
        return self.relevance * self.value


@dataclass(frozen=True)
class Bid:
    bidder: BidderId
    amount: float
    tie_rank: int


@dataclass(frozen=True)
class BidProfile:
    """Reported bids.  Equal ranking scores are ordered by ascending ``tie_rank``."""

    bids: tuple[Bid, ...]

    def __post_init__(self):
        object.__setattr__(self, "bids", tuple(self.bids))
        seen = set()
        for b in self.bids:
            if b.amount < 0:
                raise AuctionError(f"negative bid {b.amount} for bidder {b.bidder!r}")
            if b.bidder in seen:
                raise AuctionError(f"duplicate bid for bidder {b.bidder!r}")
            seen.add(b.bidder)

    @classmethod
    def from_bids(cls, bids: Mapping[BidderId, float] | Iterable[tuple[BidderId, float]]) -> BidProfile:
        """Build a profile; tie ranks follow insertion order."""
        items = bids.items() if isinstance(bids, Mapping) else bids
        return cls(tuple(Bid(i, float(b), k) for k, (i, b) in enumerate(items)))

    @classmethod
    def from_scores(cls, bidders: Sequence[Bidder], scores: Sequence[float]) -> BidProfile:
        """Bids ``r_i / e_i`` for ranking scores given in the same order as ``bidders``."""
        if len(bidders) != len(scores):
            raise AuctionError("one score per bidder required")
        return cls(tuple(Bid(b.id, r / b.relevance, k)
                         for k, (b, r) in enumerate(zip(bidders, scores))))

    def bid_of(self, bidder: BidderId) -> float:
        for b in self.bids:
            if b.bidder == bidder:
                return b.amount
        raise KeyError(bidder)

    def replace(self, bidder: BidderId, amount: float) -> BidProfile:
        """Same profile with one bid changed (tie rank kept)."""
        return BidProfile(tuple(Bid(b.bidder, amount, b.tie_rank) if b.bidder == bidder else b
                                for b in self.bids))


@dataclass(frozen=True)
class RankedEntry:
    rank: int
    bidder: Bidder
    bid: float
    score: float
    tie_rank: int


def rank(bidders: Sequence[Bidder], profile: BidProfile) -> list[RankedEntry]:
    """Order bidders by decreasing ``e_i * b_i``, ties by ascending tie rank."""
    by_id = {b.id: b for b in bidders}
    if len(by_id) != len(bidders):
        raise AuctionError("duplicate bidder ids")
    covered = set()
    rows = []
    for bid in profile.bids:
        if bid.bidder not in by_id:
            raise AuctionError(f"unknown bidder id {bid.bidder!r} in profile")
        bd = by_id[bid.bidder]
        covered.add(bid.bidder)
        rows.append((bd, bid.amount, bd.relevance * bid.amount, bid.tie_rank))
    missing = set(by_id) - covered
    if missing:
        raise AuctionError(f"profile has no bid for bidders {sorted(map(str, missing))}")
    rows.sort(key=lambda t: -t[2])
    # e * (r / e) need not round back to r, so scores meant to be equal can
    # differ in the last bits; such runs are ordered by tie rank
    ordered, run = [], rows[:1]
    for row in rows[1:]:
        if run[-1][2] - row[2] <= SCORE_TIE_RTOL * max(1.0, abs(row[2])):
            run.append(row)
        else:
            ordered += sorted(run, key=lambda t: t[3])
            run = [row]
    ordered += sorted(run, key=lambda t: t[3])
    return [RankedEntry(k, bd, b, r, t) for k, (bd, b, r, t) in enumerate(ordered, start=1)]


@dataclass(frozen=True)
class Allocation:
    """Outcome of one GSP auction.

    ``order`` lists every bidder by rank; ``slots`` maps filled positions to
    bidders.  Prices are per click, payments per impression.
    """

    order: tuple[BidderId, ...]
    scores: tuple[float, ...]
    slots: dict
    price: dict
    payment: dict
    ctr: dict

    def position(self, bidder: BidderId) -> int | None:
        for j, i in self.slots.items():
            if i == bidder:
                return j
        return None

    @property
    def revenue(self) -> float:
        return sum(self.payment.values())


def _next_scores(ranked: Sequence[RankedEntry], reserve: float) -> list[float]:
    return [ranked[k + 1].score if k + 1 < len(ranked) else reserve for k in range(len(ranked))]


def allocate(curve: SlotCurve, bidders: Sequence[Bidder], profile: BidProfile,
             reserve: float = 0.0) -> Allocation:
    if not bidders:
        raise AuctionError("at least one bidder required")
    ranked = rank(bidders, profile)
    nxt = _next_scores(ranked, reserve)
    slots, price, payment, ctr = {}, {}, {}, {}
    for entry, r_next in zip(ranked, nxt):
        bd = entry.bidder
        if entry.rank <= curve.K:
            slots[entry.rank] = bd.id
            p = r_next / bd.relevance
            price[bd.id] = p
            ctr[bd.id] = curve.ctr(entry.rank) * bd.relevance
            payment[bd.id] = curve.ctr(entry.rank) * r_next
        else:
            price[bd.id] = 0.0
            ctr[bd.id] = 0.0
            payment[bd.id] = 0.0
    return Allocation(
        order=tuple(e.bidder.id for e in ranked),
        scores=tuple(e.score for e in ranked),
        slots=slots, price=price, payment=payment, ctr=ctr,
    )


def payoff(bidder: Bidder, slot_ctr: float, price_per_click: float) -> float:
    """Expected payoff per impression, ``e_i * gamma * (v_i - p)``."""
    if not 0.0 <= slot_ctr <= 1.0:
        raise AuctionError(f"slot ctr {slot_ctr} outside [0, 1]")
    return bidder.relevance * slot_ctr * (bidder.value - price_per_click)


# --- equilibrium checks -----------------------------------------------------

@dataclass(frozen=True)
class Violation:
    rank: int
    target: int
    bidder: BidderId
    payoff_gap: float  # current payoff minus payoff at target; negative


@dataclass(frozen=True)
class SNEReport:
    is_sne: bool
    violations: tuple[Violation, ...] = ()


def _check(curve, bidders, profile, reserve, tol, only, up_price_own_slot):
    ranked = rank(bidders, profile)
    n = len(ranked)
    # score at 1-based rank k, reserve past the end
    r = [None] + [e.score for e in ranked] + [reserve]

    def score_at(k):
        return r[k] if k <= n else reserve

    violations = []
    for e in ranked:
        if only is not None and e.bidder.id not in only:
            continue
        i, s = e.rank, e.bidder.score
        current = curve.ctr(i) * (s - score_at(i + 1))
        for t in range(1, n + 1):
            if t == i:
                continue
            # SNE charges the price currently paid at t; Nash charges r_t to move up
            price = score_at(t + 1) if (t > i or up_price_own_slot) else score_at(t)
            alt = curve.ctr(t) * (s - price)
            if current - alt < -tol:
                violations.append(Violation(i, t, e.bidder.id, current - alt))
    return SNEReport(not violations, tuple(violations))


def verify_sne(curve: SlotCurve, bidders: Sequence[Bidder], profile: BidProfile,
               reserve: float = 0.0, tol: float = DEFAULT_TOL,
               only: Iterable[BidderId] | None = None) -> SNEReport:
    """Check ``gamma_i (s_i - r_{i+1}) >= gamma_t (s_i - r_{t+1})`` for every rank/target pair.

    ``only`` restricts the check to deviations by the listed bidders (e.g. the
    bidders that are not represented by a mediator).
    """
    only = None if only is None else set(only)
    return _check(curve, bidders, profile, reserve, tol, only, up_price_own_slot=True)


def verify_nash(curve: SlotCurve, bidders: Sequence[Bidder], profile: BidProfile,
                reserve: float = 0.0, tol: float = DEFAULT_TOL,
                only: Iterable[BidderId] | None = None) -> SNEReport:
    """Plain Nash conditions: moving up to ``t`` costs ``r_t``, moving down costs ``r_{t+1}``."""
    only = None if only is None else set(only)
    return _check(curve, bidders, profile, reserve, tol, only, up_price_own_slot=False)


@dataclass(frozen=True)
class LocalCheckRow:
    position: int
    payoff: float
    payoff_up: float | None
    payoff_down: float
    satisfied: bool


def local_envy_free_table(curve: SlotCurve, bidders: Sequence[Bidder], profile: BidProfile,
                          reserve: float = 0.0, tol: float = DEFAULT_TOL) -> list[LocalCheckRow]:
    """One-slot-up / one-slot-down payoffs per position."""
    ranked = rank(bidders, profile)
    n = len(ranked)
    r = [None] + [e.score for e in ranked] + [reserve, reserve]
    rows = []
    for e in ranked:
        j, s = e.rank, e.bidder.score
        u = curve.ctr(j) * (s - r[j + 1])
        up = curve.ctr(j - 1) * (s - r[j]) if j > 1 else None
        down = curve.ctr(j + 1) * (s - r[min(j + 2, n + 1)])
        ok = u - down >= -tol and (up is None or u - up >= -tol)
        rows.append(LocalCheckRow(j, u, up, down, ok))
    return rows


# --- minimum SNE -------------------------------------------------------------

def _gammas(curve) -> list[float]:
    if isinstance(curve, SlotCurve):
        return list(curve.gammas)
    if hasattr(curve, "tilde_gammas"):
        return list(curve.tilde_gammas)
    return [float(x) for x in curve]


def _scores(bidders) -> list[float]:
    return [b.score if isinstance(b, Bidder) else float(b) for b in bidders]


def _sorted_scores(bidders) -> list[float]:
    s = _scores(bidders)
    for j in range(len(s) - 1):
        if s[j] < s[j + 1]:
            raise AuctionError(f"bidders must be sorted by decreasing score (position {j + 2})")
    return s


def min_sne_scores(curve, bidders) -> list[float]:
    """Ranking scores ``r_1..r_N`` of the bidder-optimal SNE.

    ``r_2..r_{K+1}`` solve ``gamma_i r_{i+1} = sum_{j>=i} (gamma_j - gamma_{j+1}) s_{j+1}``;
    bidders below rank ``K+1`` bid their score and ``r_1 = r_2 + 1``.
    """
    g = _gammas(curve)
    s = _sorted_scores(bidders)
    n, k = len(s), len(g)
    if n < 2 and k >= 1:
        raise AuctionError("minimum SNE needs at least two bidders")
    gam = lambda j: g[j - 1] if j <= k else 0.0  # noqa: E731
    sc = lambda j: s[j - 1] if j <= n else 0.0  # noqa: E731
    r = [0.0] * (n + 1)  # 1-based
    tail = 0.0
    for i in range(k, 0, -1):
        tail += (gam(i) - gam(i + 1)) * sc(i + 1)
        if i + 1 <= n:
            r[i + 1] = tail / gam(i)
    for j in range(k + 2, n + 1):
        r[j] = s[j - 1]
    r[1] = r[2] + 1.0
    return r[1:]


def min_sne_bids(curve: SlotCurve, bidders: Sequence[Bidder]) -> BidProfile:
    """Bidder-optimal SNE profile for bidders listed in allocation order."""
    return BidProfile.from_scores(bidders, min_sne_scores(curve, bidders))


def revenue_min_sne(curve, bidders) -> float:
    """Revenue per impression at the minimum SNE: ``sum_j (gamma_j - gamma_{j+1}) j s_{j+1}``."""
    g = _gammas(curve)
    s = _sorted_scores(bidders)
    k, n = len(g), len(s)
    total = 0.0
    for j in range(1, k + 1):
        s_next = s[j] if j < n else 0.0
        g_next = g[j] if j < k else 0.0
        total += (g[j - 1] - g_next) * j * s_next
    return total


def efficiency(curve, bidders) -> float:
    """Social value per impression, ``sum_j gamma_j s_j`` over filled slots."""
    g = _gammas(curve)
    s = _scores(bidders)
    return sum(a * b for a, b in zip(g, s))


# --- brute-force oracle ------------------------------------------------------

@dataclass(frozen=True)
class DeviationResult:
    bidder: BidderId
    current_payoff: float
    best_bid: float
    best_payoff: float

    @property
    def gain(self) -> float:
        return self.best_payoff - self.current_payoff


@dataclass(frozen=True)
class OracleReport:
    results: dict = field(default_factory=dict)
    coarse_grid: bool = False

    @property
    def max_gain(self) -> float:
        return max((r.gain for r in self.results.values()), default=0.0)

    def is_nash(self, tol: float = DEFAULT_TOL) -> bool:
        return self.max_gain <= tol


def best_response_oracle(curve: SlotCurve, bidders: Sequence[Bidder], profile: BidProfile,
                         grid_step: float, reserve: float = 0.0) -> OracleReport:
    """Unilateral deviations on a bid grid ``0, step, ...`` reaching past every rival score.

    Each grid bid is mapped to the rank it would win; every distinct rank
    reached is then evaluated by a full re-run of :func:`allocate` on the
    deviated profile, so the payoffs come from the auction itself.
    """
    if grid_step <= 0:
        raise AuctionError("grid_step must be positive")
    by_id = {b.id: b for b in bidders}
    base = allocate(curve, bidders, profile, reserve)
    coarse = False
    results = {}
    for bid in profile.bids:
        me = by_id[bid.bidder]
        others = [b for b in profile.bids if b.bidder != bid.bidder]
        o_r = np.array([by_id[b.bidder].relevance * b.amount for b in others])
        o_t = np.array([b.tie_rank for b in others])
        # far enough to outrank every other bidder
        top = max(bid.amount, o_r.max(initial=0.0) / me.relevance)
        grid = np.arange(0.0, top + grid_step * 1.5, grid_step)
        gaps = np.diff(np.sort(np.unique(o_r)))
        if gaps.size and gaps.min() < me.relevance * grid_step:
            coarse = True
        dev_r = me.relevance * grid
        ahead = (o_r[None, :] > dev_r[:, None]) | (
            (o_r[None, :] == dev_r[:, None]) & (o_t[None, :] < bid.tie_rank))
        positions = ahead.sum(axis=1) + 1
        cur = payoff(me, curve.ctr(base.position(me.id) or 0), base.price[me.id])
        best_bid, best = bid.amount, cur
        _, first = np.unique(positions, return_index=True)
        for idx in first:
            b_dev = float(grid[idx])
            alloc = allocate(curve, bidders, profile.replace(me.id, b_dev), reserve)
            pos = alloc.position(me.id)
            u = payoff(me, curve.ctr(pos) if pos else 0.0, alloc.price[me.id])
            if u > best:
                best_bid, best = b_dev, u
        results[me.id] = DeviationResult(me.id, cur, best_bid, best)
    return OracleReport(results, coarse)
