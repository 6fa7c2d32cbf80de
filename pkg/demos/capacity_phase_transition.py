"""Add landing-page slots and watch revenue and efficiency move with fitness f.

Run: python demos/capacity_phase_transition.py
"""
import numpy as np

from adlab import auction as ac
from adlab import capacity as cf
from adlab.scenario import load_fixture

print("Forking the last slot of a geometric curve can raise revenue:")
inst = cf.make_example1(K=3, r=0.5, f=0.8, L=2)
b = list(inst.bidders)
R0 = ac.revenue_min_sne(inst.curve, b)
R = cf.revenue_after_fork(inst.merged, b)
check = cf.check_theorem_rev1(inst.curve, inst.merged, b)
print(f"  merged CTRs {tuple(round(g, 4) for g in inst.merged)}")
print(f"  eta = {check.value:g} > {check.rhs:.4g}; revenue {R0:g} -> {R:g} "
      f"(value of capacity {cf.value_of_capacity(R, R0):+.4f})")

print("\nForking a lower slot under spread-out scores: revenue falls steadily as f grows, turning into a loss:")
sc = load_fixture("lemma_l2")
res = cf.sweep_fitness(sc.curve, sc.sorted_bidders(), sc.fork.l, sc.fork.L, np.linspace(0.1, 0.9, 5))
for row in res:
    print(f"  f={row.f:.2f}  capacity={row.capacity:.3f}  revenue={row.revenue:.4f}  "
          f"value={row.value_of_capacity:+.4f}  efficiency={row.efficiency:.4f}")

print("\nEfficiency crosses its old level at a critical fitness:")
K, r, alpha, L = 3, 0.5, 0.5, 3
inst = cf.make_example2(K, r, 0.5, L, alpha)
found = cf.critical_fitness(inst.curve, list(inst.bidders), K, L, "efficiency", (0.05, 0.99), tol=1e-10)
print(f"  bisection: f* = {found:.9f}")
print(f"  closed form (1 - a r) / (1 - (a r)^L) = {cf.example2_threshold(r, alpha, L):.9f}")
