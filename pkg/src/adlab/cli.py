"""Command-line front end: ``adlab <command> SCENARIO [options]``.

Exit codes: 0 success, 1 negative analysis result, 2 bad input.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import auction as ac
from . import capacity as cf
from . import mediator as md
from . import reproduce
from .scenario import FIXTURES, ResultTable, ScenarioError, fixture_path, load_scenario, render

log = logging.getLogger("adlab")


def tolerance() -> float:
    raw = os.environ.get("ADLAB_TOL")
    if raw is None:
        return ac.DEFAULT_TOL
    try:
        tol = float(raw)
    except ValueError:
        raise ScenarioError(f"ADLAB_TOL={raw!r} is not a number") from None
    if tol < 0:
        raise ScenarioError("ADLAB_TOL must be non-negative")
    return tol


def _load(arg: str):
    """A scenario file, or the name of a bundled one."""
    if arg in FIXTURES and not os.path.exists(arg):
        return load_scenario(fixture_path(arg))
    return load_scenario(arg)


def _emit(args, tables):
    sys.stdout.write(render(tables, args.format, args.exact))


def cmd_verify_sne(args) -> int:
    sc = _load(args.scenario)
    profile = sc.require_bids()
    tol = tolerance()
    rows = ac.local_envy_free_table(sc.curve, sc.bidders, profile, sc.reserve, tol)
    report = ac.verify_sne(sc.curve, sc.bidders, profile, sc.reserve, tol)
    t = ResultTable(["position", "payoff", "payoff_up", "payoff_down", "sne"], title="local")
    for r in rows:
        t.add(r.position, r.payoff, r.payoff_up, r.payoff_down, "YES" if r.satisfied else "NO")
    tables = [t]
    if report.violations:
        v = ResultTable(["rank", "bidder", "target", "payoff_gap"], title="violations")
        for x in report.violations:
            v.add(x.rank, x.bidder, x.target, x.payoff_gap)
        tables.append(v)
    _emit(args, tables)
    return 0 if report.is_sne else 1


def cmd_min_sne(args) -> int:
    sc = _load(args.scenario)
    bidders = sc.sorted_bidders()
    scores = ac.min_sne_scores(sc.curve, bidders)
    t = ResultTable(["rank", "bidder", "score", "min_sne_score", "min_sne_bid"], title="min_sne")
    for k, (b, r) in enumerate(zip(bidders, scores), start=1):
        t.add(k, b.id, b.score, r, r / b.relevance)
    _emit(args, [t])
    return 0


def cmd_revenue(args) -> int:
    sc = _load(args.scenario)
    bidders = sc.sorted_bidders()
    direct = ac.revenue_min_sne(sc.curve, bidders)
    r = ac.min_sne_scores(sc.curve, bidders)
    via_bids = sum(sc.curve.ctr(i) * r[i] for i in range(1, min(sc.curve.K, len(r) - 1) + 1))
    agree = abs(direct - via_bids) <= tolerance() * max(1.0, abs(direct))
    t = ResultTable(["revenue_direct_sum", "revenue_payment_sum", "agree"], title="revenue")
    t.add(direct, via_bids, agree)
    _emit(args, [t])
    return 0 if agree else 1


def cmd_efficiency(args) -> int:
    sc = _load(args.scenario)
    t = ResultTable(["efficiency"], title="efficiency")
    t.add(ac.efficiency(sc.curve, sc.sorted_bidders()))
    _emit(args, [t])
    return 0


SWEEP_COLUMNS = ["f", "capacity", "revenue", "efficiency", "value_of_capacity",
                 "eta", "beta", "thm_rev1", "thm_eff1"]


def cmd_capacity_sweep(args) -> int:
    sc = _load(args.scenario)
    l = args.l if args.l is not None else (sc.fork.l if sc.fork else None)
    L = args.L if args.L is not None else (sc.fork.L if sc.fork else None)
    if l is None or L is None:
        raise ScenarioError("fork: give --l/--L or a fork block in the scenario")
    f_max = args.f_max if args.f_max is not None else 0.99 / sc.curve.gammas[0]
    if args.steps < 1:
        raise ScenarioError("--steps must be >= 1")
    grid = [args.f_min] if args.steps == 1 else np.linspace(args.f_min, f_max, args.steps)
    try:
        res = cf.sweep_fitness(sc.curve, sc.sorted_bidders(), l, L, grid)
    except cf.ForkError as exc:
        raise ScenarioError(f"fork: {exc}") from None
    for f, why in res.skipped:
        print(f"skipped f={f!r}: {why}", file=sys.stderr)
    t = ResultTable(SWEEP_COLUMNS, title="sweep")
    for r in res.rows:
        t.add(r.f, r.capacity, r.revenue, r.efficiency, r.value_of_capacity, r.eta, r.beta,
              r.theorem_rev_holds, r.theorem_eff_holds)
    _emit(args, [t])
    return 0


def cmd_mediator(args) -> int:
    sc = _load(args.scenario)
    profile = sc.require_bids()
    block = sc.mediator or {}
    strategy = args.strategy or block.get("strategy", "top")
    share = args.share if args.share is not None else block.get("share", 0.5)
    order = [e.bidder.id for e in ac.rank(sc.bidders, profile)]
    if args.L is not None:
        start = args.anchor if strategy == "interior" else 0
        if strategy == "interior" and args.anchor is None:
            raise ScenarioError("--anchor is required for the interior strategy")
        m_ids = order[start:start + args.L]
    elif block.get("m_ids"):
        m_ids = block["m_ids"]
    else:
        raise ScenarioError("mediator: give --L or a mediator block with m_ids")
    r = args.r
    if r is None and strategy == "slide":
        r = block.get("slide_score")
    equilibrium = "nash" if strategy == "nonsym" else "sne"
    try:
        scen = md.MediatorScenario(sc.curve, sc.bidders, profile, frozenset(m_ids), share=share,
                                   reserve=sc.reserve, equilibrium=equilibrium, tol=tolerance())
    except md.MediatorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    result = md.plan(scen, strategy, r)
    summary = ResultTable(["strategy", "status", "r_star", "r", "flattened_first",
                           "flattened_last", "payoff_per_share", "mediator_payoff",
                           "incentives_pass", "keeps_positions"], title="plan")
    if isinstance(result, md.NoImprovement):
        summary.add(strategy, "no_improvement", result.r_star, None, None, None, 0.0, 0.0,
                    None, None)
        _emit(args, [summary])
        print(result.reason, file=sys.stderr)
        return 1
    rep = md.verify_i_incentives(scen, result)
    summary.add(strategy, "ok", result.r_star, result.r, *result.flattened_range,
                result.payoff_per_share, result.mediator_payoff, rep.passes,
                result.keeps_positions)
    members = ResultTable(["bidder", "base_rank", "new_rank", "new_score", "base_price",
                           "paid_price", "rebate_per_click"], title="m_bidders")
    new_scores = {e.bidder.id: e.score for e in ac.rank(sc.bidders, result.modified_profile)}
    for i, (k_old, k_new) in result.positions.items():
        members.add(i, k_old, k_new, new_scores[i], result.base_price_per_click[i],
                    result.paid_per_click[i], result.rebate_per_click[i])
    checks = ResultTable(["bidder", "rank", "target", "payoff", "deviation_payoff", "ok"],
                         title="i_incentives")
    for c in rep.targeted:
        checks.add(c.bidder, c.rank, c.target, c.payoff, c.deviation_payoff, c.ok)
    _emit(args, [summary, members, checks])
    return 0 if rep.passes else 1


def cmd_reproduce(args) -> int:
    checks = reproduce.run(args.target, tolerance())
    t = ResultTable(["check", "expected", "actual", "ok"], title=args.target)
    for c in checks:
        t.add(c.name, str(c.expected), str(c.actual), c.ok)
    _emit(args, [t])
    bad = [c for c in checks if not c.ok]
    for c in bad:
        print(f"MISMATCH {args.target}: {c.name}: expected {c.expected}, got {c.actual}",
              file=sys.stderr)
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--exact", action="store_true", help="full float precision")

    p = argparse.ArgumentParser(prog="adlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        return sp

    for name, fn, h in [("verify-sne", cmd_verify_sne, "check a bid profile for SNE"),
                        ("min-sne", cmd_min_sne, "bidder-optimal SNE bids"),
                        ("revenue", cmd_revenue, "revenue at the minimum SNE"),
                        ("efficiency", cmd_efficiency, "efficiency of the score-sorted allocation")]:
        add(name, fn, h).add_argument("scenario", help="scenario JSON file or bundled name")

    sp = add("capacity-sweep", cmd_capacity_sweep, "sweep fitness of a forked slot")
    sp.add_argument("scenario", help="scenario JSON file or bundled name")
    sp.add_argument("--l", type=int)
    sp.add_argument("--L", type=int)
    sp.add_argument("--f-min", type=float, default=0.05)
    sp.add_argument("--f-max", type=float)
    sp.add_argument("--steps", type=int, default=20)

    sp = add("mediator", cmd_mediator, "synthesize a mediator plan")
    sp.add_argument("scenario", help="scenario JSON file or bundled name")
    sp.add_argument("--strategy", choices=md.STRATEGIES)
    sp.add_argument("--L", type=int)
    sp.add_argument("--anchor", type=int)
    sp.add_argument("--share", type=float)
    sp.add_argument("--r", type=float, help="common score to use instead of the default")

    sp = add("reproduce", cmd_reproduce, "golden check of a bundled reference instance")
    sp.add_argument("--target", choices=reproduce.TARGETS, required=True)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ac.AuctionError, cf.ForkError, md.MediatorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
