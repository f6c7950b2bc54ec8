"""
Watching an agent learn
=======================

One epoch is one incoming ball: the agent places its paddle, sees a hit or
a miss, and updates its networks.  The simple agent places at random while
training and only learns from returns.  The four-network agent gates its
placement on its own certainty, so its mix of modes changes as it learns.
"""

from collections import Counter

import numpy as np

from certpong.agent import FourNetAgent, SimpleAgent
from certpong.harness import Trainer, eval_rng, run_match, seed_streams

EPOCHS, CHUNK = 150_000, 25_000

for cls in (SimpleAgent, FourNetAgent):
    agent_ss, env_ss = seed_streams(0)
    trainer = Trainer(cls.create(agent_ss), np.random.default_rng(env_ss))
    print(f"\n{trainer.agent.kind}")
    while trainer.epochs_done < EPOCHS:
        records = trainer.train(CHUNK)
        modes = Counter(r.mode for r in records)
        train_hits = sum(r.outcome == "hit" for r in records) / CHUNK
        match = run_match(trainer.agent, 200, eval_rng(0, trainer.epochs_done))
        print(f"{trainer.epochs_done:>7} epochs  training hits {train_hits:.2f}  "
              f"modes {dict(modes)}  match 200-{match.opp_points} "
              f"(hit rate {match.agent_hit_rate:.2f})")
