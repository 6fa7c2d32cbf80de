"""Walk through one GSP auction: prices, the envy-free check and the cheapest equilibrium.

Run: python demos/auction_basics.py
"""
from adlab import auction as ac
from adlab.scenario import load_fixture

sc = load_fixture("table1")
alloc = ac.allocate(sc.curve, sc.bidders, sc.profile)

print("Nine advertisers bid for eight slots; each pays the next score down.")
print(f"{'rank':>4} {'bidder':>6} {'score':>6} {'price':>6}")
for k, i in enumerate(alloc.order, start=1):
    print(f"{k:>4} {i:>6} {alloc.scores[k - 1]:>6g} {alloc.price[i]:>6g}")

print("\nNo bidder would rather take another slot at that slot's current price:")
for row in ac.local_envy_free_table(sc.curve, sc.bidders, sc.profile):
    up = "-" if row.payoff_up is None else f"{row.payoff_up:.3g}"
    print(f"  position {row.position}: stay {row.payoff:.3g}, up {up}, "
          f"down {row.payoff_down:.3g} -> {'YES' if row.satisfied else 'NO'}")

bumped = sc.profile.replace(7, 13.5)
rep = ac.verify_sne(sc.curve, sc.bidders, bumped)
print(f"\nRaise bidder 7 to 13.5 and the profile stops being an equilibrium "
      f"({len(rep.violations)} violated constraints); first: {rep.violations[0]}")
oracle = ac.best_response_oracle(sc.curve, sc.bidders, bumped, 0.05)
print(f"A brute-force grid search agrees: bidder 7 gains {oracle.results[7].gain:.3g} by re-bidding.")

ordered = sc.sorted_bidders()
r = ac.min_sne_scores(sc.curve, ordered)
print("\nCheapest equilibrium scores by rank:", [round(x, 4) for x in r])
print(f"Its revenue is {ac.revenue_min_sne(sc.curve, ordered):g}; "
      f"efficiency of the score-sorted allocation is {ac.efficiency(sc.curve, ordered):g}.")
