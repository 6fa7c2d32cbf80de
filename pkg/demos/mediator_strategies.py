"""A mediator bidding for the top five advertisers: four ways to cut their bill.

Run: python demos/mediator_strategies.py
"""
from adlab import mediator as md
from adlab.scenario import load_fixture

sc = load_fixture("table1")
scen = md.MediatorScenario.top(sc.curve, sc.bidders, sc.profile, 5, share=0.5)

x = md.top_thresholds(scen)
print("Each outside bidder tolerates a common score no lower than:")
for j, v in x.items():
    print(f"  rank {j}: {v:g}")

plan = md.plan_top(scen)
print(f"\nFlattening ranks 1..{plan.flattened_range[1]} to r = {plan.r:g} saves "
      f"{plan.payoff_per_share:g} per impression; the mediator keeps {plan.mediator_payoff:g}.")
rep = md.verify_i_incentives(scen, plan)
print(f"Outside bidders still at equilibrium: {rep.passes}; their prices unchanged: {rep.prices_unchanged}")

ledger = md.settle(plan, {1: 10, 2: 4})
print(f"Fourteen clicks settle to {ledger.mediator_total:.3f} for the mediator "
      f"and {ledger.rebate_total:.3f} in rebates.")

interior = md.MediatorScenario(sc.curve, sc.bidders, sc.profile, frozenset({2, 3, 4, 5}))
print("\nA block sitting below rank 1 fares worse:", md.plan_interior(interior).reason)

slide = md.plan_slide(scen, r=12)
print(f"\nLetting bidder 6 jump to rank 1 and bidding 12 for the block saves {slide.payoff_per_share:g}.")
cheapest = md.plan_slide(scen)
print(f"The cheapest admissible common score is {cheapest.r:g}, saving {cheapest.payoff_per_share:g}.")

nash = md.MediatorScenario.top(sc.curve, sc.bidders, sc.profile, 5, equilibrium="nash")
plan = md.plan_nonsym(nash)
print(f"\nUnder plain Nash the block keeps rank 1 and flattens ranks 2..{plan.flattened_range[1]} "
      f"to {plan.r:.4g}, saving {plan.payoff_per_share:.4g}.")
