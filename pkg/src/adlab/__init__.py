"""Analysis of GSP position auctions, from equilibrium checks to capacity and mediator models."""
from .auction import (Allocation, AuctionError, Bid, Bidder, BidProfile, SlotCurve, allocate,
                      best_response_oracle, efficiency, local_envy_free_table, min_sne_bids,
                      min_sne_scores, payoff, rank, revenue_min_sne, verify_nash, verify_sne)
from .capacity import (ForkError, ForkSpec, ForkTieError, MergedCurve, beta,
                       check_lemma_preconditions, check_theorem_eff1, check_theorem_rev1,
                       critical_fitness, efficiency_after_fork, eta, fork, make_example1,
                       make_example2, revenue_after_fork, sweep_fitness, value_of_capacity)
from .mediator import (MediatorError, MediatorPlan, MediatorScenario, NoImprovement, plan,
                       plan_interior, plan_nonsym, plan_slide, plan_top, r_star_interior,
                       r_star_nonsym, r_star_top, settle, verify_i_incentives)

from .capacity import capacity as total_capacity

__version__ = "0.1.0"
