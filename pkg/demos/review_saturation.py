"""Why several review-driven engines end up with the same trajectory.

Buyer utility adds o * reputation to the quality term. With o = 0.68 and
reputations near one, utility clears 0.625 on almost every trade and the
review 0.5 + 0.8 U clips at 1.0. Engines that average reviews, however they
weight them, then hand out identical scores and the runs coincide trade for
trade. Scaling the utility terms by strategy weights breaks the saturation.
"""

import numpy as np

from repmarket import GlobalParams, World

base = GlobalParams(n_providers=300, n_buyers=300, n_steps=40)

for label, params in (("default utility", base),
                      ("strategy-scaled utility", base.replace(strategy_scaled_terms=True))):
    print(f"\n{label}")
    logs = {}
    for engine in ("timedecay", "peertrust", "betapt"):
        world = World(params, engine, seed=3).run()
        logs[engine] = world.log
        reviews = world.log.review
        print(f"  {engine:10s} trades={len(reviews):6d}  share of reviews at 1.0: {np.mean(reviews == 1.0):.3f}")
    same = logs["peertrust"].to_text() == logs["betapt"].to_text()
    print("  PeerTrust and Beta-PT logs identical:", same)
