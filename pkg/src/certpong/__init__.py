"""Certainty-gated reward-modulated learning agents for a headless Pong."""

from .agent import (CertaintyWindow, FourNetAgent, Mode, OracleAgent, PlacementDecision,
                    SimpleAgent, ThresholdConfig, choose_placement, compute_certainty,
                    intuition_argmax, learn_from_outcome, load_agent, predict_position,
                    save_agent, select_mode)
from .encoding import encode_features, extend_features
from .harness import (CheckpointReport, CompareConfig, MatchResult, OpponentConfig, Trainer,
                      compare_architectures, opponent_command, run_match, run_training)
from .netcore import (Network, NetworkSpec, TrainingSample, backprop_step, forward,
                      init_network, load_network, numeric_gradient, save_network)
from .physics import (BallState, GameState, PaddleState, PhysicsConfig, RallyOutcome,
                      RallyPhase, Result, advance_tick, intercept_oracle, new_game,
                      reflect_paddle, reflect_wall, run_rally, serve)

__version__ = "0.1.0"
