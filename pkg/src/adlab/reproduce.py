"""Golden checks of the bundled worked instances against their reference values."""
from __future__ import annotations

from dataclasses import dataclass

from . import auction as ac
from . import capacity as cf
from . import mediator as md
from .scenario import load_fixture

TARGETS = ("table1", "table2", "table3", "table4", "example1", "example2")

# expected rows for the 9-bidder instance
TABLE1 = {
    "prices": [20, 16, 15, 14, 13, 11, 10, 9, 0],
    "modified_scores": [14.2, 14.2, 14.2, 14.2, 14],
    "modified_prices": [14.2, 14.2, 14.2, 14, 13],
}
TABLE2 = {
    "payoff": [6, 3.6, 2.5, 1.6, 1.2, 0.8, 0.3, 0.3, 0],
    "up": [None, 2, 2.4, 1.5, 1.2, 0.6, 0.2, 0.3, 0],
    "down": [6, 3.5, 2.4, 1.5, 1.2, 0.75, 0.3, 0, 0],
}
TABLE3 = {"x": {6: 14.2, 7: 11.7, 8: 11.7, 9: 9}, "r_star": 14.2, "l": 4, "payoff_per_share": 7.28}
TABLE4 = {"slide_score": 12, "payoff_per_share": 22.8}


@dataclass(frozen=True)
class Check:
    name: str
    expected: object
    actual: object
    ok: bool


def _num(name, expected, actual, tol):
    if expected is None or actual is None:
        return Check(name, expected, actual, expected is actual)
    return Check(name, expected, actual, abs(expected - actual) <= tol)


def _seq(name, expected, actual, tol):
    ok = len(expected) == len(actual) and all(
        (e is None and a is None) or (e is not None and a is not None and abs(e - a) <= tol)
        for e, a in zip(expected, actual))
    return Check(name, list(expected), list(actual), ok)


def _table1_scenario(L=5, equilibrium="sne"):
    sc = load_fixture("table1")
    return md.MediatorScenario.top(sc.curve, sc.bidders, sc.profile, L, equilibrium=equilibrium,
                                   reserve=sc.reserve)


def check_table1(tol):
    sc = load_fixture("table1")
    alloc = ac.allocate(sc.curve, sc.bidders, sc.profile, sc.reserve)
    by_id = {b.id: b for b in sc.bidders}
    ep = [alloc.price[i] * by_id[i].relevance for i in alloc.order]
    plan = md.plan_top(_table1_scenario())
    mod = ac.allocate(sc.curve, sc.bidders, plan.modified_profile, sc.reserve)
    ranked = ac.rank(sc.bidders, plan.modified_profile)
    top = [i for i in mod.order][:5]
    return [
        _seq("e_i p_i", TABLE1["prices"], ep, tol),
        _seq("r'_i", TABLE1["modified_scores"], [e.score for e in ranked[:5]], tol),
        _seq("e_i p~_i", TABLE1["modified_prices"],
             [mod.price[i] * by_id[i].relevance for i in top], tol),
    ]


def check_table2(tol):
    sc = load_fixture("table1")
    rows = ac.local_envy_free_table(sc.curve, sc.bidders, sc.profile, sc.reserve, tol)
    full = ac.verify_sne(sc.curve, sc.bidders, sc.profile, sc.reserve, tol)
    return [
        _seq("payoff", TABLE2["payoff"], [r.payoff for r in rows], tol),
        _seq("payoff up", TABLE2["up"], [r.payoff_up for r in rows], tol),
        _seq("payoff down", TABLE2["down"], [r.payoff_down for r in rows], tol),
        Check("all YES", True, all(r.satisfied for r in rows), all(r.satisfied for r in rows)),
        Check("all-pairs SNE", True, full.is_sne, full.is_sne),
    ]


def check_table3(tol):
    scen = _table1_scenario()
    x = md.top_thresholds(scen)
    plan = md.plan_top(scen)
    return [
        _seq("x_j", list(TABLE3["x"].values()), [x[j] for j in TABLE3["x"]], tol),
        _num("r*", TABLE3["r_star"], md.r_star_top(scen), tol),
        Check("l", TABLE3["l"], plan.flattened_range[1], plan.flattened_range[1] == TABLE3["l"]),
        _num("U_M/alpha", TABLE3["payoff_per_share"], plan.payoff_per_share, tol),
    ]


def check_table4(tol):
    scen = _table1_scenario()
    plan = md.plan_slide(scen, r=TABLE4["slide_score"])
    rep = md.verify_i_incentives(scen, plan)
    return [
        _num("U_M/alpha", TABLE4["payoff_per_share"], plan.payoff_per_share, tol),
        Check("I-bidders at SNE", True, rep.passes, rep.passes),
    ]


def check_example1(tol):
    sc = load_fixture("example1")
    merged = cf.fork(sc.curve, sc.fork)
    s = sc.sorted_bidders()
    cond = cf.check_theorem_rev1(sc.curve, merged, s)
    voc = cf.value_of_capacity(cf.revenue_after_fork(merged, s), ac.revenue_min_sne(sc.curve, s))
    r = sc.curve.gammas[1] / sc.curve.gammas[0]
    return [
        _num("eta = f(1-r)", sc.fork.f * (1 - r), cond.value, tol),
        Check("condition holds", True, cond.holds, cond.holds),
        Check("value of capacity > 0", True, voc, voc > 0),
    ]


def check_example2(tol):
    sc = load_fixture("example2")
    K, L = sc.curve.K, sc.fork.L
    s = sc.sorted_bidders()
    r = sc.curve.gammas[1] / sc.curve.gammas[0]
    alpha = s[K].score / s[K - 1].score
    f_star = cf.example2_threshold(r, alpha, L)
    found = cf.critical_fitness(sc.curve, s, K, L, "efficiency", (0.05, 0.999), tol=1e-7)
    E0 = ac.efficiency(sc.curve, s)

    def gain(f):
        return cf.efficiency_after_fork(cf.fork(sc.curve, cf.ForkSpec(K, L, f)), s) - E0

    return [
        _num("bisected threshold", f_star, found, 1e-6),
        Check("E < E0 just below", True, gain(f_star - 1e-4), gain(f_star - 1e-4) < 0),
        Check("E > E0 just above", True, gain(f_star + 1e-4), gain(f_star + 1e-4) > 0),
    ]


def run(target: str, tol: float = ac.DEFAULT_TOL) -> list[Check]:
    fn = globals().get(f"check_{target}")
    if target not in TARGETS or fn is None:
        raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")
    return fn(tol)
