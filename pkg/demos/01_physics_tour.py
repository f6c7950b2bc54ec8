"""
A tour of the court
===================

The field is the unit square with y = 0 at the top.  The agent paddle sits
on x = 0, the scripted opponent on x = 1.  Everything below is plain
deterministic arithmetic, so every number printed here is reproducible.
"""

from dataclasses import replace

import numpy as np

from certpong.harness import Game, ascii_frame
from certpong.physics import (DEFAULT_PHYSICS, BallState, PaddleState, RallyPhase, Result,
                              intercept_oracle, new_game, reflect_paddle, run_rally, serve)

rng = np.random.default_rng(0)

###############################################################################
# A serve puts the ball in the middle, heading left or right at random.

state = serve(rng, new_game())
print("served:", state.ball, state.rally_phase.name)
print(ascii_frame(state))

###############################################################################
# Where the ball meets a paddle decides where it goes next: the vertical
# speed is proportional to the offset from the paddle centre, and the outer
# corner band speeds the ball up once per rally.

paddle = PaddleState(0.0, 0.5)
h = DEFAULT_PHYSICS.half_height
for offset in (0.0, 0.5, 1.0):
    ball = BallState(0.0, 0.5 + offset * h, -0.02, 0.0)
    print(f"offset {offset:+.1f} ->", reflect_paddle(ball, paddle))

###############################################################################
# The intercept oracle follows the ball through its wall bounces to the
# agent's plane.  A paddle placed there never misses.

ball = BallState(0.9, 0.1, -0.02, -0.01)
y = intercept_oracle(ball)
print(f"oracle intercept {y:.4f}")
rally = replace(new_game(), ball=ball, rally_phase=RallyPhase.TOWARD_AGENT)
_, outcome = run_rally(rally, y, lambda s: 0.0)
print("placed at the oracle:", outcome.result.name, "after", outcome.ticks_elapsed, "ticks")

###############################################################################
# A paddle covers an eighth of the wall, so random placement should return
# about one ball in eight.

game = Game(np.random.default_rng(1))
hits = 0
for _ in range(20_000):
    game.next_ball()
    hits += game.play_ball(rng.random()) is Result.HIT
print(f"random placement returns {hits / 20_000:.3f} of the balls")
