"""For-profit mediators bidding on behalf of a block of advertisers.

A mediator represents the M-bidders and rewrites their bids before they reach
the auctioneer; the remaining I-bidders bid directly.  Every strategy here
replaces a run of consecutive M-bidder scores by one common score ``r``
chosen high enough that no I-bidder wants to move.  Tied M-bidders keep
their original order through tie ranks, which stands in for the
infinitesimal offsets ``r + (L - i) * eps`` of the model.

Savings are accounted per impression in score units: the mediator keeps a
fraction ``share`` and rebates the rest equally to the M-bidders.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .auction import (DEFAULT_TOL, Bid, Bidder, BidderId, BidProfile, SlotCurve,
                      SNEReport, rank, verify_nash, verify_sne)

log = logging.getLogger(__name__)

# plans saving less than this per impression are not worth running
MIN_SAVING = 1e-9

STRATEGIES = ("top", "interior", "nonsym", "slide")


class MediatorError(ValueError):
    pass


@dataclass(frozen=True)
class MediatorScenario:
    """Base auction at equilibrium plus the set of mediator clients.

    ``equilibrium`` is ``"sne"`` (the default) or ``"nash"``; the base profile
    is checked against it on construction.
    """

    curve: SlotCurve
    bidders: tuple[Bidder, ...]
    profile: BidProfile
    m_set: frozenset
    share: float = 0.5
    reserve: float = 0.0
    equilibrium: str = "sne"
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "bidders", tuple(self.bidders))
        object.__setattr__(self, "m_set", frozenset(self.m_set))
        ids = {b.id for b in self.bidders}
        if not self.m_set:
            raise MediatorError("mediator has no clients")
        if not self.m_set <= ids:
            raise MediatorError(f"unknown M-bidders {sorted(map(str, self.m_set - ids))}")
        if not 0 < self.share < 1:
            raise MediatorError(f"share={self.share} must lie in (0, 1)")
        check = {"sne": verify_sne, "nash": verify_nash}.get(self.equilibrium)
        if check is None:
            raise MediatorError(f"unknown equilibrium {self.equilibrium!r}")
        report = check(self.curve, self.bidders, self.profile, self.reserve, self.tol)
        if not report.is_sne:
            v = report.violations[0]
            raise MediatorError(
                f"base profile is not at {self.equilibrium.upper()}: bidder {v.bidder!r} at rank "
                f"{v.rank} gains {-v.payoff_gap:.6g} by moving to position {v.target}")
        ranked = rank(self.bidders, self.profile)
        object.__setattr__(self, "_ranked", ranked)

    @classmethod
    def top(cls, curve, bidders, profile, L: int, **kw) -> MediatorScenario:
        """Scenario whose M-bidders are the current top ``L`` ranks."""
        order = [e.bidder.id for e in rank(bidders, profile)]
        return cls(curve, tuple(bidders), profile, frozenset(order[:L]), **kw)

    @classmethod
    def block(cls, curve, bidders, profile, anchor: int, L: int, **kw) -> MediatorScenario:
        """Scenario whose M-bidders occupy ranks ``anchor+1 .. anchor+L``."""
        order = [e.bidder.id for e in rank(bidders, profile)]
        return cls(curve, tuple(bidders), profile, frozenset(order[anchor:anchor + L]), **kw)

    @property
    def i_set(self) -> frozenset:
        return frozenset(b.id for b in self.bidders) - self.m_set

    @property
    def N(self) -> int:
        return len(self.bidders)

    def order(self) -> list[BidderId]:
        return [e.bidder.id for e in self._ranked]

    def r(self, k: int) -> float:
        """Base ranking score at 1-based rank ``k``; the reserve past the end."""
        return self._ranked[k - 1].score if k <= self.N else self.reserve

    def s(self, k: int) -> float:
        """Score ``e v`` of the bidder at base rank ``k``."""
        return self._ranked[k - 1].bidder.score

    def m_ranks(self) -> list[int]:
        return [e.rank for e in self._ranked if e.bidder.id in self.m_set]

    def block_bounds(self) -> tuple[int, int]:
        ranks = self.m_ranks()
        lo, hi = min(ranks), max(ranks)
        if hi - lo + 1 != len(ranks):
            raise MediatorError(f"M-bidders do not hold consecutive ranks: {ranks}")
        return lo, hi


@dataclass(frozen=True)
class MediatorPlan:
    strategy: str
    r_star: float
    r: float
    flattened_range: tuple[int, int]
    modified_profile: BidProfile
    payoff_per_share: float
    share: float
    paid_per_click: dict
    base_price_per_click: dict
    rebate_per_click: dict
    positions: dict = field(default_factory=dict)
    keeps_positions: bool = True

    @property
    def mediator_payoff(self) -> float:
        return self.share * self.payoff_per_share

    @property
    def rebate_pool(self) -> float:
        return (1 - self.share) * self.payoff_per_share


@dataclass(frozen=True)
class NoImprovement:
    strategy: str
    r_star: float
    reason: str


def deviation_threshold(ctr_j: float, pivot_ctr: float, s_j: float, r_next: float) -> float:
    """Smallest common score that keeps a bidder out of the pivot position.

    Solves ``ctr_j (s_j - r_next) >= pivot_ctr (s_j - r)`` for ``r``.
    """
    w = ctr_j / pivot_ctr
    return (1 - w) * s_j + w * r_next


def _thresholds(sc: MediatorScenario, pivot: int, ranks: Iterable[int]) -> dict[int, float]:
    g = sc.curve.ctr
    return {j: deviation_threshold(g(j), g(pivot), sc.s(j), sc.r(j + 1)) for j in ranks}


def top_thresholds(sc: MediatorScenario) -> dict[int, float]:
    """``x_j`` for every I-bidder below a top block, pivoting on position 1."""
    lo, hi = _require_top(sc)
    return _thresholds(sc, 1, range(hi + 1, sc.N + 1))


def _require_top(sc):
    lo, hi = sc.block_bounds()
    if lo != 1:
        raise MediatorError(f"M-bidders must hold the top ranks, block starts at rank {lo}")
    return lo, hi


def r_star_top(sc: MediatorScenario) -> float:
    x = top_thresholds(sc)
    return max(x.values()) if x else sc.reserve


def interior_thresholds(sc: MediatorScenario) -> dict[int, float]:
    lo, hi = sc.block_bounds()
    anchor = lo - 1
    if anchor < 1:
        raise MediatorError("interior block needs an anchor rank >= 1; use the top strategy")
    if lo > sc.curve.K:
        raise MediatorError(f"block starts at rank {lo}, below the last slot {sc.curve.K}")
    outside = list(range(1, anchor + 1)) + list(range(hi + 1, sc.N + 1))
    return _thresholds(sc, anchor + 1, outside)


def r_star_interior(sc: MediatorScenario) -> float:
    x = interior_thresholds(sc)
    return max(x.values()) if x else sc.reserve


def nonsym_thresholds(sc: MediatorScenario) -> dict[int, float]:
    lo, hi = _require_top(sc)
    if sc.curve.K < 2:
        raise MediatorError("non-symmetric strategy needs at least two slots")
    return _thresholds(sc, 2, range(hi + 1, sc.N + 1))


def r_star_nonsym(sc: MediatorScenario) -> float:
    x = nonsym_thresholds(sc)
    return max(x.values()) if x else sc.reserve


# --- plan construction -------------------------------------------------------

def _modified_profile(sc: MediatorScenario, new_order: Sequence[BidderId],
                      new_scores: Mapping[BidderId, float]) -> BidProfile:
    """Profile with the given scores for M-bidders; tie ranks follow ``new_order``."""
    tie = {i: k for k, i in enumerate(new_order)}
    by_id = {b.id: b for b in sc.bidders}
    bids = []
    for b in sc.profile.bids:
        amount = new_scores[b.bidder] / by_id[b.bidder].relevance if b.bidder in new_scores else b.amount
        bids.append(Bid(b.bidder, amount, tie[b.bidder]))
    return BidProfile(tuple(bids))


def _finish(sc, strategy, r_star, r, flat, new_order, new_scores, saving, keeps=True):
    """Assemble a plan from new rank order and the M-bidders' new scores.

    ``new_order`` lists every bidder in its rank after the rewrite; per-click
    prices follow from the score list in that order.
    """
    by_id = {b.id: b for b in sc.bidders}
    base_pos = {i: k for k, i in enumerate(sc.order(), start=1)}
    score = {i: new_scores.get(i, sc.r(base_pos[i])) for i in new_order}
    n = len(new_order)
    nxt = {i: (score[new_order[k + 1]] if k + 1 < n else sc.reserve) for k, i in enumerate(new_order)}
    slotted = lambda k: k <= sc.curve.K  # noqa: E731
    m = sorted(sc.m_set, key=base_pos.get)
    paid, base_p, rebate, positions = {}, {}, {}, {}
    for i in m:
        e = by_id[i].relevance
        k_old, k_new = base_pos[i], new_order.index(i) + 1
        base_p[i] = sc.r(k_old + 1) / e if slotted(k_old) else 0.0
        paid[i] = nxt[i] / e if slotted(k_new) else 0.0
        rebate[i] = (1 - sc.share) * (base_p[i] - paid[i]) / len(m)
        positions[i] = (k_old, k_new)
    return MediatorPlan(
        strategy=strategy, r_star=r_star, r=r, flattened_range=flat,
        modified_profile=_modified_profile(sc, new_order, new_scores),
        payoff_per_share=saving, share=sc.share, paid_per_click=paid,
        base_price_per_click=base_p, rebate_per_click=rebate,
        positions=positions, keeps_positions=keeps,
    )


def _flatten_from(sc, first: int, last_allowed: int, r: float) -> int:
    """Last rank in ``first..last_allowed`` whose base score is at least ``r``."""
    last = first - 1
    for k in range(first, last_allowed + 1):
        if sc.r(k) >= r:
            last = k
    return last


def _check_plan(sc, plan, check):
    report = check(sc.curve, sc.bidders, plan.modified_profile, sc.reserve, sc.tol, only=sc.i_set)
    if not report.is_sne:
        v = report.violations[0]
        raise MediatorError(
            f"{plan.strategy} plan breaks I-bidder incentives: bidder {v.bidder!r} at rank "
            f"{v.rank} gains {-v.payoff_gap:.6g} moving to {v.target}")
    return plan


def plan_top(sc: MediatorScenario, r: float | None = None) -> MediatorPlan | NoImprovement:
    """Flatten the top ranks ``1..l`` to a common score ``r >= r*``.

    ``r`` defaults to ``r*``; passing a smaller value builds the plan anyway
    (useful to exhibit the incentive violation) but skips the equilibrium
    check.
    """
    lo, hi = _require_top(sc)
    rs = r_star_top(sc)
    explicit = r is not None
    r = max(rs if r is None else r, sc.r(hi + 1))
    l = _flatten_from(sc, 1, hi, r)
    if l < 1:
        raise MediatorError(f"common score {r} exceeds the top score {sc.r(1)}")
    g = sc.curve.ctr
    saving = sum((sc.r(j + 1) - r) * g(j) for j in range(1, l))
    if l <= 1 or saving < MIN_SAVING:
        return NoImprovement("top", rs, f"no saving: l={l}, U_M/share={saving:.6g}")
    order = sc.order()
    plan = _finish(sc, "top", rs, r, (1, l), order, {order[k - 1]: r for k in range(1, l + 1)}, saving)
    return plan if explicit else _check_plan(sc, plan, verify_sne)


def plan_interior(sc: MediatorScenario, r: float | None = None) -> MediatorPlan | NoImprovement:
    """Flatten ranks ``anchor+2 .. anchor+s-1`` of an interior block to ``r >= r*``."""
    lo, hi = sc.block_bounds()
    rs = r_star_interior(sc)
    explicit = r is not None
    r = max(rs if r is None else r, sc.r(hi + 1))
    last = _flatten_from(sc, lo + 1, hi, r)
    g = sc.curve.ctr
    saving = sum((sc.r(k + 1) - r) * g(k) for k in range(lo, last))
    if last < lo + 1 or saving < MIN_SAVING:
        return NoImprovement("interior", rs, f"no saving window at r={r:.6g}")
    order = sc.order()
    new = {order[k - 1]: r for k in range(lo + 1, last + 1)}
    plan = _finish(sc, "interior", rs, r, (lo + 1, last), order, new, saving)
    return plan if explicit else _check_plan(sc, plan, verify_sne)


def plan_nonsym(sc: MediatorScenario, r: float | None = None) -> MediatorPlan | NoImprovement:
    """Top block at a plain Nash equilibrium: keep rank 1, flatten ranks ``2..l``."""
    lo, hi = _require_top(sc)
    rs = r_star_nonsym(sc)
    explicit = r is not None
    r = max(rs if r is None else r, sc.r(hi + 1))
    l = _flatten_from(sc, 2, hi, r)
    g = sc.curve.ctr
    saving = sum((sc.r(j + 1) - r) * g(j) for j in range(1, l))
    if l < 2 or saving < MIN_SAVING:
        return NoImprovement("nonsym", rs, f"no saving: l={l}")
    order = sc.order()
    plan = _finish(sc, "nonsym", rs, r, (2, l), order, {order[k - 1]: r for k in range(2, l + 1)},
                   saving)
    return plan if explicit else _check_plan(sc, plan, verify_nash)


def _slide_saving(sc, L, r):
    g = sc.curve.ctr
    old = sum(g(j) * sc.r(j + 1) for j in range(1, L + 1))
    new = sum(g(p) * r for p in range(2, L + 1)) + g(L + 1) * sc.r(L + 2)
    return old - new


def plan_slide(sc: MediatorScenario, r: float | None = None) -> MediatorPlan | NoImprovement:
    """Let the first I-bidder take rank 1 and move the whole top block down one slot.

    The block bids a common score ``r'``.  Without an explicit ``r`` the
    smallest admissible candidate from the base scores and deviation
    thresholds is used (the cheapest choice for the block).  This strategy
    changes M-bidder positions, which the plan records.
    """
    lo, hi = _require_top(sc)
    L = hi
    if L + 1 > sc.N:
        raise MediatorError("slide needs an I-bidder right below the block to take rank 1")
    order = sc.order()
    new_order = [order[L]] + order[:L] + order[L + 1:]
    x = _thresholds(sc, 1, range(L + 2, sc.N + 1))
    rs = max(x.values()) if x else sc.reserve

    def build(rp):
        saving = _slide_saving(sc, L, rp)
        return _finish(sc, "slide", rs, rp, (2, L + 1), new_order,
                       {i: rp for i in order[:L]}, saving, keeps=False)

    def admissible(rp):
        if not sc.r(L + 2) <= rp <= sc.r(L + 1):
            return None
        plan = build(rp)
        rep = verify_sne(sc.curve, sc.bidders, plan.modified_profile, sc.reserve, sc.tol,
                         only=sc.i_set)
        return plan if rep.is_sne else rep

    if r is not None:
        res = admissible(r)
        if res is None:
            raise MediatorError(f"r'={r} outside [{sc.r(L + 2)}, {sc.r(L + 1)}]: the block "
                                "would not sit between the sliding I-bidder and the rest")
    else:
        cands = sorted({sc.r(k) for k in range(1, sc.N + 2)} | set(x.values()))
        res = None
        for rp in cands:
            res = admissible(rp)
            if isinstance(res, MediatorPlan):
                break
        if res is None:
            res = admissible(sc.r(L + 1))
    if not isinstance(res, MediatorPlan):
        v = res.violations[0] if res is not None else None
        detail = (f"bidder {v.bidder!r} at rank {v.rank} prefers position {v.target}"
                  if v else "no candidate score fits")
        raise MediatorError(f"no common score keeps the slid profile at SNE: {detail}")
    if res.payoff_per_share < MIN_SAVING:
        return NoImprovement("slide", rs, f"sliding costs the block {-res.payoff_per_share:.6g}")
    return res


def plan(sc: MediatorScenario, strategy: str, r: float | None = None):
    try:
        fn = {"top": plan_top, "interior": plan_interior,
              "nonsym": plan_nonsym, "slide": plan_slide}[strategy]
    except KeyError:
        raise MediatorError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}") from None
    return fn(sc, r)


# --- verification and settlement ---------------------------------------------

@dataclass(frozen=True)
class TargetedCheck:
    bidder: BidderId
    rank: int
    target: int
    payoff: float
    deviation_payoff: float

    @property
    def ok(self) -> bool:
        return self.payoff - self.deviation_payoff >= -DEFAULT_TOL


@dataclass(frozen=True)
class IncentiveReport:
    equilibrium: SNEReport
    targeted: tuple[TargetedCheck, ...]
    prices_unchanged: bool
    positions_unchanged: bool

    @property
    def passes(self) -> bool:
        return self.equilibrium.is_sne and all(t.ok for t in self.targeted)


def verify_i_incentives(sc: MediatorScenario, plan: MediatorPlan) -> IncentiveReport:
    """Full equilibrium check for I-bidders plus the per-bidder pivot inequalities."""
    from .auction import allocate

    check = verify_nash if plan.strategy == "nonsym" else verify_sne
    eq = check(sc.curve, sc.bidders, plan.modified_profile, sc.reserve, sc.tol, only=sc.i_set)
    lo, hi = sc.block_bounds()
    g = sc.curve.ctr
    if plan.strategy == "interior":
        pivot, ranks = lo, [j for j in range(1, sc.N + 1) if j < lo or j > hi]
    elif plan.strategy == "nonsym":
        pivot, ranks = 2, range(hi + 1, sc.N + 1)
    elif plan.strategy == "slide":
        pivot, ranks = 1, range(hi + 2, sc.N + 1)
    else:
        pivot, ranks = 1, range(hi + 1, sc.N + 1)
    order = sc.order()
    targeted = tuple(
        TargetedCheck(order[j - 1], j, pivot, g(j) * (sc.s(j) - sc.r(j + 1)),
                      g(pivot) * (sc.s(j) - plan.r))
        for j in ranks)
    base = allocate(sc.curve, sc.bidders, sc.profile, sc.reserve)
    new = allocate(sc.curve, sc.bidders, plan.modified_profile, sc.reserve)
    prices = all(base.price[i] == new.price[i] for i in sc.i_set)
    positions = base.order == new.order
    return IncentiveReport(eq, targeted, prices, positions)


@dataclass(frozen=True)
class LedgerEntry:
    clicked: BidderId
    account: str  # "mediator" or an M-bidder id
    amount: float


@dataclass
class Ledger:
    entries: list[LedgerEntry] = field(default_factory=list)
    ignored: list[BidderId] = field(default_factory=list)

    def total(self, account=None) -> float:
        return sum(e.amount for e in self.entries if account is None or e.account == account)

    @property
    def mediator_total(self) -> float:
        return self.total("mediator")

    @property
    def rebate_total(self) -> float:
        return sum(e.amount for e in self.entries if e.account != "mediator")


def settle(plan: MediatorPlan, clicks: Mapping[BidderId, int]) -> Ledger:
    """Book every click on an M-bidder: ``share`` of the saving to the mediator,
    the rest split equally across all M-bidders.

    Clicks on other bidders settle with the auctioneer directly and are only
    listed in ``ignored``.
    """
    members = list(plan.paid_per_click)
    ledger = Ledger()
    for i, n in clicks.items():
        if n < 0:
            raise MediatorError(f"negative click count for {i!r}")
        if i not in plan.paid_per_click:
            log.warning("clicks on %r ignored: not a mediator client", i)
            ledger.ignored.append(i)
            continue
        saving = plan.base_price_per_click[i] - plan.paid_per_click[i]
        for _ in range(n):
            ledger.entries.append(LedgerEntry(i, "mediator", plan.share * saving))
            for m in members:
                ledger.entries.append(LedgerEntry(i, m, (1 - plan.share) * saving / len(members)))
    return ledger
