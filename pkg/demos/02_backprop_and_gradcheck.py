"""
Small networks, checked by hand
===============================

Every network here has one sigmoid hidden layer, a bias folded in as the
last weight column, and is trained one sample at a time.  Before trusting
them with an agent we compare the backprop gradient with central finite
differences.
"""

import numpy as np

from certpong import netcore
from certpong.cli import gradcheck

###############################################################################
# The four shapes used by the agents.

for spec in netcore.AGENT_SPECS:
    print(spec, "w1", spec.w1_shape, "w2", spec.w2_shape)

###############################################################################
# Analytic against numeric gradients, worst case over 100 random nets each.

for spec, err in gradcheck(pairs=100).items():
    print(f"{spec:>7}: max relative error {err:.2e}")

###############################################################################
# Masks let a sample train only some outputs.  Here the reward network
# learns its hit/miss output while its position output is left alone.

rng = np.random.default_rng(3)
net = netcore.init_network(netcore.REWARD, rng)
before = net.w2.copy()
sample = netcore.TrainingSample(rng.random(8), np.array([0.0, 1.0]), np.array([0.0, 1.0]))
for _ in range(200):
    netcore.backprop_step(net, sample)
print("position row unchanged:", np.array_equal(net.w2[0], before[0]))
print("hit output now", netcore.forward(net, sample.input)[1].round(3))

###############################################################################
# Checkpoints are JSON and round-trip exactly.

blob = netcore.save_network(net)
print(len(blob), "bytes; identical after reload:",
      netcore.load_network(blob).same_weights(net))
