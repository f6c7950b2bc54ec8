"""
Simple against four networks
============================

Both agents train on identically seeded games and pause at checkpoints to
play a match with training off.  The match ends when the agent reaches the
target score; what matters is how many points it conceded on the way.

This is a cut-down run (3 seeds, target 200) that takes about half a
minute.  The test suite runs the larger desk configuration: 5 seeds,
checkpoints 25K/50K/100K/200K, target 500.
"""

import numpy as np

from certpong.harness import CompareConfig, compare_architectures

cfg = CompareConfig(checkpoints=(25_000, 50_000, 100_000), seeds=(0, 1, 2), target_points=200)
report = compare_architectures(cfg)

print(f"{'epochs':>8}  {'simple':>8}  {'four_net':>8}   median points conceded")
for cp in cfg.checkpoints:
    print(f"{cp:>8}  {report.median_conceded('simple', cp):>8.0f}  "
          f"{report.median_conceded('four_net', cp):>8.0f}")

rates = {k: np.round([report.median_hit_rate(k, cp) for cp in cfg.checkpoints], 3)
         for k in ("simple", "four_net")}
print("median hit rates:", rates)
print()
print(report.to_csv())
