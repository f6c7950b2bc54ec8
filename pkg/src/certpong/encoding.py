"""Normalized network inputs built from the ball state.

Six features describe the incoming ball; the 8-wide extension appends a
candidate paddle position ``p`` and ``1 - p`` for the reward and intuition
networks.  Every component lies in ``[0, 1]``.
"""

from __future__ import annotations

import math

import numpy as np

from .physics import DEFAULT_PHYSICS, BallState, PhysicsConfig

N_FEATURES = 6
N_EXTENDED = 8


class EncodingError(ValueError):
    pass


def _clip01(v: float) -> float:
    return min(max(v, 0.0), 1.0)


def encode_features(ball: BallState, phys: PhysicsConfig = DEFAULT_PHYSICS) -> np.ndarray:
    """Features of a ball heading toward the agent.

    Order: y from top, y from bottom (its complement), upward-positive part of
    vy, negative part of vy, |vx|, and the flight angle mapped from
    ``[-pi/2, pi/2]`` onto ``[0, 1]`` (horizontal flight -> 0.5).
    """
    if ball.vel_x >= 0:
        raise EncodingError("features are only defined for a ball moving toward the agent")
    vy_cap, vx_cap = phys.vy_cap, phys.vx_cap
    y = _clip01(ball.pos_y)
    phi = math.atan2(ball.vel_y, abs(ball.vel_x))
    return np.array([
        y,
        1.0 - y,
        _clip01(max(ball.vel_y, 0.0) / vy_cap),
        _clip01(max(-ball.vel_y, 0.0) / vy_cap),
        _clip01(abs(ball.vel_x) / vx_cap),
        _clip01((phi + math.pi / 2) / math.pi),
    ])


def extend_features(f: np.ndarray, candidate: float) -> np.ndarray:
    p = _clip01(float(candidate))
    out = np.empty(N_EXTENDED)
    out[:N_FEATURES] = f
    out[6] = p
    out[7] = 1.0 - p
    return out


def candidate_grid_inputs(f: np.ndarray, grid: int) -> tuple[np.ndarray, np.ndarray]:
    """Extended inputs for ``grid`` evenly spaced candidates ``k / (grid - 1)``."""
    q = np.arange(grid) / (grid - 1)
    xs = np.empty((grid, N_EXTENDED))
    xs[:, :N_FEATURES] = f
    xs[:, 6] = q
    xs[:, 7] = 1.0 - q
    return q, xs
