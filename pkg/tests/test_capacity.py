import numpy as np
import pytest

from adlab import auction as ac
from adlab import capacity as cf
from adlab.scenario import load_fixture


def curve(*g):
    return ac.SlotCurve(tuple(g))


def scored(*s):
    return [ac.Bidder(k, v) for k, v in enumerate(s, start=1)]


# --- merging -------------------------------------------------------------------

def test_fork_merges_and_sorts():
    m = cf.fork(curve(1, 0.5, 0.25), cf.ForkSpec(3, 2, 0.8))
    assert m.tilde_gammas == pytest.approx((1, 0.5, 0.2, 0.1))
    assert m.provenance == (("orig", 1), ("orig", 2), ("fork", 1), ("fork", 2))
    assert m.fork_positions() == [3, 4]
    # last original slot still above the best landing slot, counting slot l itself
    assert m.crossing_index == 3
    assert cf.capacity(m) == pytest.approx(1.8)
    assert cf.capacity(curve(1, 0.5, 0.25)) == pytest.approx(1.75)


def test_single_landing_slot_replaces_forked_ctr():
    m = cf.fork(curve(1, 0.6, 0.3), cf.ForkSpec(2, 1, 0.4))
    assert sorted(m.tilde_gammas, reverse=True) == pytest.approx([1, 0.3, 0.24])


def test_landing_slots_can_outrank_originals():
    m = cf.fork(curve(1, 0.9, 0.2), cf.ForkSpec(1, 2, 0.5))
    assert m.tilde_gammas == pytest.approx((0.9, 0.5, 0.45, 0.2))
    assert m.provenance[1] == ("fork", 1)


def test_exact_tie_names_both_slots():
    with pytest.raises(cf.ForkTieError, match="original slot 2.*landing slot 1"):
        cf.fork(curve(1, 0.5), cf.ForkSpec(1, 2, 0.5))
    m = cf.fork(curve(1, 0.5), cf.ForkSpec(1, 2, 0.5), tie_break=True)
    assert m.provenance[0] == ("orig", 2)


@pytest.mark.parametrize("spec", [cf.ForkSpec(0, 1, 0.5), cf.ForkSpec(4, 1, 0.5),
                                  cf.ForkSpec(1, 4, 0.5), cf.ForkSpec(1, 1, 1.0)])
def test_spec_validation_against_curve(spec):
    with pytest.raises(cf.ForkError):
        cf.fork(curve(1, 0.5, 0.25), spec)


def test_spec_factors():
    assert cf.ForkSpec(1, 1, f_tilde=0.5, page_boost=0.8).f == pytest.approx(0.4)
    with pytest.raises(cf.ForkError):
        cf.ForkSpec(1, 1, f=0.3, f_tilde=0.5, page_boost=0.8)
    with pytest.raises(cf.ForkError):
        cf.ForkSpec(1, 1)
    with pytest.raises(cf.ForkError):
        cf.ForkSpec(1, 0, 0.5)


def test_value_of_capacity():
    assert cf.value_of_capacity(5, 5) == 0
    assert cf.value_of_capacity(1.1, 1.0) == pytest.approx(0.1)
    with pytest.raises(cf.ForkError):
        cf.value_of_capacity(1, 0)


# --- eta / beta and the two sufficient conditions ----------------------------------

def test_eta_beta_closed_forms():
    inst = cf.make_example1(3, 0.5, 0.8, 2)
    assert cf.eta(inst.curve, inst.merged) == pytest.approx(0.8 * (1 - 0.5))
    assert cf.beta(inst.curve, inst.merged) == pytest.approx(0.8)
    for K, r, f in [(4, 0.7, 0.6), (5, 0.4, 0.9)]:
        inst = cf.make_example2(K, r, f, 2, 0.5)
        assert cf.eta(inst.curve, inst.merged) == pytest.approx(f * (1 - r))
        assert cf.beta(inst.curve, inst.merged) == pytest.approx(f)


def test_barely_moved_tail_gives_ratios_near_one():
    # fork the last slot into one slot whose ctr sits just below it: only slot K moves
    c = curve(1, 0.5, 0.25)
    m = cf.fork(c, cf.ForkSpec(3, 1, 0.999))
    assert cf.eta(c, m, 1) == pytest.approx(0.999, rel=1e-9)
    assert cf.beta(c, m, 1) == pytest.approx(0.999, rel=1e-9)


def test_example1_condition_and_gain():
    for K, L in [(3, 2), (4, 1), (2, 2)]:
        inst = cf.make_example1(K, 0.5, 0.8, L)
        b = list(inst.bidders)
        check = cf.check_theorem_rev1(inst.curve, inst.merged, b)
        # a single landing slot drops to zero below it, so eta = f there
        assert check.holds and check.value == pytest.approx(0.4 if L >= 2 else 0.8)
        R0 = ac.revenue_min_sne(inst.curve, b)
        assert cf.value_of_capacity(cf.revenue_after_fork(inst.merged, b), R0) > 0


def test_identity_merge_revenue_matches():
    inst = cf.make_example1(3, 0.5, 0.8, 2)
    b = list(inst.bidders)
    assert cf.revenue_after_fork(inst.curve, b) == ac.revenue_min_sne(inst.curve, b)


def test_example2_condition_flips_at_threshold():
    f_star = cf.example2_threshold(0.5, 0.5, 3)
    assert f_star == pytest.approx(0.75 / 0.984375)
    for f, expect in [(f_star + 0.01, True), (f_star - 0.01, False)]:
        inst = cf.make_example2(3, 0.5, f, 3, 0.5)
        b = list(inst.bidders)
        assert cf.check_theorem_eff1(inst.curve, inst.merged, b).holds is expect
        gain = cf.efficiency_after_fork(inst.merged, b) - ac.efficiency(inst.curve, b)
        assert (gain > 0) is expect


def test_eff_condition_needs_new_values():
    c = curve(1, 0.5, 0.25)
    b = scored(10, 8, 6)
    m = cf.fork(c, cf.ForkSpec(3, 2, 0.8))
    check = cf.check_theorem_eff1(c, m, b)
    assert check.rhs == 1 and not check.holds
    assert cf.efficiency_after_fork(m, b) < ac.efficiency(c, b)


def test_rev_condition_holds_with_large_lower_bound_terms():
    c = curve(1, 0.5, 0.25)
    # forking slot 3 loses a lot of CTR above a much weaker s_4
    b = scored(100, 90, 80, 40, 39)
    m = cf.fork(c, cf.ForkSpec(3, 2, 0.1))
    check = cf.check_theorem_rev1(c, m, b)
    assert check.rhs <= 0 < check.value and check.holds
    assert cf.revenue_after_fork(m, b) > ac.revenue_min_sne(c, b)


def test_rev_condition_undefined_without_lower_scores():
    c = curve(1, 0.5)
    with pytest.raises(cf.ForkError):
        cf.check_theorem_rev1(c, cf.fork(c, cf.ForkSpec(2, 1, 0.5)), scored(5, 0))


# --- premises ----------------------------------------------------------------------

def test_lemma_premises():
    t1 = load_fixture("table1")
    pre = cf.check_lemma_preconditions(t1.curve, t1.bidders, 2)
    assert 2 in pre.score_failures and not pre.l2_holds
    flat = cf.check_lemma_preconditions(curve(1, 0.5), scored(5, 5, 5, 5), 2)
    assert flat.score_failures == (2, 3) and not flat.l2_holds
    l1 = load_fixture("lemma_l1")
    assert cf.check_lemma_preconditions(l1.curve, l1.bidders, 1).l1_holds
    l2 = load_fixture("lemma_l2")
    assert cf.check_lemma_preconditions(l2.curve, l2.bidders, 3).l2_holds


def test_gap_premise_counts_last_slot():
    # geometric 0.9: the last slot's ctr exceeds the first gap
    pre = cf.check_lemma_preconditions(cf.geometric_curve(3, 0.9), scored(9, 4, 2, 1), 1)
    assert pre.gap_failures and not pre.l1_holds
    pre = cf.check_lemma_preconditions(cf.geometric_curve(3, 0.5), scored(9, 4, 2, 1), 1)
    assert pre.gap_failures == () and pre.l1_holds


# --- sweeps and critical fitness ---------------------------------------------------

def test_sweep_rows_match_single_evaluations():
    inst = cf.make_example1(3, 0.5, 0.8, 2)
    b = list(inst.bidders)
    res = cf.sweep_fitness(inst.curve, b, 3, 2, [0.6, 0.2])
    assert [r.f for r in res] == [0.2, 0.6]
    one = cf.evaluate_fork(inst.curve, b, cf.ForkSpec(3, 2, 0.6))
    assert res.rows[1] == one
    assert len(cf.sweep_fitness(inst.curve, b, 3, 2, [0.3])) == 1


def test_sweep_rejects_out_of_range_and_skips_ties():
    c = curve(1, 0.5)
    with pytest.raises(cf.ForkError):
        cf.sweep_fitness(c, scored(5, 4, 3, 2), 1, 2, [0.5, 1.0])
    res = cf.sweep_fitness(c, scored(5, 4, 3, 2), 1, 2, [0.4, 0.5, 0.6])
    assert [r.f for r in res] == [0.4, 0.6] and res.skipped[0][0] == 0.5


def test_lemma_l2_fixture_sweep_decreasing():
    sc = load_fixture("lemma_l2")
    b = sc.sorted_bidders()
    grid = np.linspace(0.05, 0.95, 30)
    res = cf.sweep_fitness(sc.curve, b, sc.fork.l, sc.fork.L, grid)
    assert (np.diff(res.column("value_of_capacity")) < 0).all()
    assert (np.diff(res.column("efficiency")) >= 0).all()


def test_critical_fitness_revenue():
    l1 = load_fixture("lemma_l1")
    with pytest.raises(cf.NonMonotoneError):
        cf.critical_fitness(l1.curve, l1.bidders, 1, 3, "revenue", (0.05, 0.95))
    l2 = load_fixture("lemma_l2")
    f = cf.critical_fitness(l2.curve, l2.bidders, 3, 2, "revenue", (0.05, 0.95), tol=1e-9)
    R0 = ac.revenue_min_sne(l2.curve, l2.bidders)

    def voc(x):
        return cf.value_of_capacity(cf.revenue_after_fork(cf.fork(l2.curve, cf.ForkSpec(3, 2, x)),
                                                          l2.bidders), R0)
    assert voc(f - 1e-6) > 0 > voc(f + 1e-6)
    assert cf.critical_fitness(l2.curve, l2.bidders, 3, 2, "revenue", (0.05, 0.2)) is None


def test_critical_fitness_efficiency_and_errors():
    inst = cf.make_example2(3, 0.5, 0.5, 3, 0.5)
    b = list(inst.bidders)
    f = cf.critical_fitness(inst.curve, b, 3, 3, "efficiency", (0.05, 0.99), tol=1e-9)
    assert f == pytest.approx(cf.example2_threshold(0.5, 0.5, 3), abs=1e-6)
    for bad in [(0.5, 0.4), (0, 0.5), (0.5, 1.0)]:
        with pytest.raises(cf.ForkError):
            cf.critical_fitness(inst.curve, b, 3, 3, "efficiency", bad)
    with pytest.raises(cf.ForkError):
        cf.critical_fitness(inst.curve, b, 3, 3, "profit", (0.1, 0.5))


def test_scan_sign_changes_brackets_threshold():
    inst = cf.make_example2(3, 0.5, 0.5, 3, 0.5)
    f_star = cf.example2_threshold(0.5, 0.5, 3)
    spans = cf.scan_sign_changes(inst.curve, list(inst.bidders), 3, 3, "efficiency",
                                 np.linspace(0.05, 0.99, 40))
    assert len(spans) == 1 and spans[0][0] < f_star < spans[0][1]


# --- generators --------------------------------------------------------------------

def test_example1_premise_error():
    with pytest.raises(cf.ForkError, match="K s_"):
        cf.make_example1(3, 0.5, 0.8, 2, s_overrides={4: 10})
    with pytest.raises(cf.ForkError):
        cf.make_example1(1, 0.5, 0.8, 1)


def test_example2_scores():
    inst = cf.make_example2(3, 0.5, 0.8, 3, 0.5)
    assert inst.scores == pytest.approx([12, 11, 10, 5, 2.5, 1.25])
    with pytest.raises(cf.ForkError):
        cf.make_example2(3, 0.5, 0.8, 3, 1.0)
