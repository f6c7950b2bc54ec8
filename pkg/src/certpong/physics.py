"""Deterministic tick-based Pong on the unit square.

The field is ``[0, 1] x [0, 1]`` with ``y = 0`` at the top.  The learning
agent defends the plane ``x = 0`` and the scripted opponent defends ``x = 1``.
The ball is a point; paddles are vertical segments of height
``2 * half_height`` centred on ``center_y``.

All per-tick arithmetic lives in a handful of numba kernels operating on a
flat ``float64`` state vector so the training loop in :mod:`certpong.harness`
and the dataclass API below share one implementation bit for bit.
"""

from __future__ import annotations

import enum
import json
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numba
import numpy as np

AGENT_PLANE_X = 0.0
OPP_PLANE_X = 1.0
MIDLINE_X = 0.5
# x <= MIDLINE_X + SAMPLE_EPS counts as "at the midline"; absorbs drift from
# repeated addition of the x velocity.
SAMPLE_EPS = 1e-9


class PhysicsError(RuntimeError):
    """Raised when a physics operation is called outside its contract."""


@dataclass(frozen=True)
class PhysicsConfig:
    """Field constants.  Defaults are the frozen design values."""

    half_height: float = 0.0625
    base_vx: float = 0.02
    deflect_vy: float = 0.03
    corner_band: float = 0.9
    boost: float = 1.5
    serve_vy: float = 0.015
    paddle_step: float = 0.012
    params: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.half_height < 0.5:
            raise ValueError("half_height must lie in (0, 0.5)")
        for name in ("base_vx", "deflect_vy", "serve_vy", "paddle_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.boost < 1:
            raise ValueError("boost must be >= 1")
        if not 0 < self.corner_band <= 1:
            raise ValueError("corner_band must lie in (0, 1]")
        if self.base_vx * self.boost >= MIDLINE_X:
            raise ValueError("x speed too large for the field")
        arr = np.array([self.half_height, self.base_vx, self.deflect_vy,
                        self.corner_band, self.boost, self.serve_vy,
                        self.paddle_step])
        arr.flags.writeable = False
        object.__setattr__(self, "params", arr)

    @property
    def vy_cap(self) -> float:
        return self.deflect_vy * self.boost

    @property
    def vx_cap(self) -> float:
        return self.base_vx * self.boost

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "half_height", "base_vx", "deflect_vy", "corner_band", "boost",
            "serve_vy", "paddle_step")}


DEFAULT_PHYSICS = PhysicsConfig()


class RallyPhase(enum.IntEnum):
    TOWARD_AGENT = 0
    TOWARD_OPPONENT = 1
    BETWEEN_RALLIES = 2


class Event(enum.Enum):
    AGENT_HIT = "agent_hit"
    AGENT_MISS = "agent_miss"
    OPP_HIT = "opp_hit"
    OPP_MISS = "opp_miss"
    SCORE_AGENT = "score_agent"
    SCORE_OPPONENT = "score_opponent"
    PLACEMENT_CLAMPED = "placement_clamped"


class Result(enum.Enum):
    HIT = "hit"
    MISS = "miss"


# event bits returned by the tick kernel
EV_AGENT_HIT = 1
EV_AGENT_MISS = 2
EV_OPP_HIT = 4
EV_OPP_MISS = 8


def events_from_bits(bits: int) -> list[Event]:
    out = []
    if bits & EV_AGENT_HIT:
        out.append(Event.AGENT_HIT)
    if bits & EV_AGENT_MISS:
        out += [Event.AGENT_MISS, Event.SCORE_OPPONENT]
    if bits & EV_OPP_HIT:
        out.append(Event.OPP_HIT)
    if bits & EV_OPP_MISS:
        out += [Event.OPP_MISS, Event.SCORE_AGENT]
    return out


@dataclass(frozen=True)
class BallState:
    pos_x: float
    pos_y: float
    vel_x: float
    vel_y: float
    boosted: bool = False

    @property
    def speed(self) -> float:
        return float(np.hypot(self.vel_x, self.vel_y))


@dataclass(frozen=True)
class PaddleState:
    plane_x: float
    center_y: float = 0.5
    half_height: float = DEFAULT_PHYSICS.half_height


@dataclass(frozen=True)
class GameState:
    ball: BallState
    agent_paddle: PaddleState
    opp_paddle: PaddleState
    agent_score: int = 0
    opp_score: int = 0
    tick: int = 0
    rally_phase: RallyPhase = RallyPhase.BETWEEN_RALLIES

    def to_array(self) -> np.ndarray:
        b = self.ball
        return np.array([b.pos_x, b.pos_y, b.vel_x, b.vel_y, float(b.boosted),
                         self.agent_paddle.center_y, self.opp_paddle.center_y,
                         self.agent_score, self.opp_score, self.tick,
                         int(self.rally_phase)], dtype=np.float64)

    @classmethod
    def from_array(cls, s: np.ndarray, half_height: float = DEFAULT_PHYSICS.half_height) -> GameState:
        ball = BallState(float(s[0]), float(s[1]), float(s[2]), float(s[3]), bool(s[4]))
        return cls(ball=ball,
                   agent_paddle=PaddleState(AGENT_PLANE_X, float(s[5]), half_height),
                   opp_paddle=PaddleState(OPP_PLANE_X, float(s[6]), half_height),
                   agent_score=int(s[7]), opp_score=int(s[8]), tick=int(s[9]),
                   rally_phase=RallyPhase(int(s[10])))


def new_game(phys: PhysicsConfig = DEFAULT_PHYSICS) -> GameState:
    """Fresh game: scores zero, paddles centred, waiting for a serve."""
    h = phys.half_height
    return GameState(ball=BallState(MIDLINE_X, 0.5, 0.0, 0.0),
                     agent_paddle=PaddleState(AGENT_PLANE_X, 0.5, h),
                     opp_paddle=PaddleState(OPP_PLANE_X, 0.5, h))


# ---------------------------------------------------------------------------
# kernels

@numba.njit(cache=True)
def _fold(y):
    # single specular reflection; |vy| per tick is far below the field height
    if y < 0.0:
        return -y, True
    if y > 1.0:
        return 2.0 - y, True
    return y, False


@numba.njit(cache=True)
def _deflect(y_cross, center, vx, boosted, p):
    h, deflect_vy, band, boost = p[0], p[2], p[3], p[4]
    offset = (y_cross - center) / h
    if offset > 1.0:
        offset = 1.0
    elif offset < -1.0:
        offset = -1.0
    speed = boost if boosted else 1.0
    vx = -vx
    vy = offset * deflect_vy * speed
    if abs(offset) >= band and not boosted:
        vx *= boost
        vy *= boost
        boosted = True
    return vx, vy, boosted


@numba.njit(cache=True)
def _crossing(x, vx, plane):
    # True when the next move reaches or passes the plane
    x1 = x + vx
    return (vx < 0.0 and x1 <= plane) or (vx > 0.0 and x1 >= plane)


@numba.njit(cache=True)
def _tick(s, p, cmd):
    """Advance the state vector ``s`` by one tick in place; return event bits."""
    h, step_max = p[0], p[6]
    if cmd > step_max:
        cmd = step_max
    elif cmd < -step_max:
        cmd = -step_max
    oc = s[6] + cmd
    if oc < h:
        oc = h
    elif oc > 1.0 - h:
        oc = 1.0 - h
    s[6] = oc
    s[9] += 1.0

    x, y, vx, vy = s[0], s[1], s[2], s[3]
    if vx < 0.0 and _crossing(x, vx, AGENT_PLANE_X):
        plane, center, toward_agent = AGENT_PLANE_X, s[5], True
    elif vx > 0.0 and _crossing(x, vx, OPP_PLANE_X):
        plane, center, toward_agent = OPP_PLANE_X, s[6], False
    else:
        y1, flipped = _fold(y + vy)
        s[0] = x + vx
        s[1] = y1
        if flipped:
            s[3] = -vy
        return 0

    frac = (plane - x) / vx
    yc, _ = _fold(y + frac * vy)
    s[0] = plane
    s[1] = yc
    if abs(yc - center) <= h:
        nvx, nvy, boosted = _deflect(yc, center, vx, s[4] > 0.5, p)
        s[2] = nvx
        s[3] = nvy
        s[4] = 1.0 if boosted else 0.0
        if toward_agent:
            s[10] = 1.0
            return EV_AGENT_HIT
        s[10] = 0.0
        return EV_OPP_HIT
    s[10] = 2.0
    if toward_agent:
        s[8] += 1.0
        return EV_AGENT_MISS
    s[7] += 1.0
    return EV_OPP_MISS


@numba.njit(cache=True)
def _intercept(x, y, vx, vy, plane, max_ticks):
    for _ in range(max_ticks):
        if _crossing(x, vx, plane):
            yc, _f = _fold(y + (plane - x) / vx * vy)
            return yc
        y, flipped = _fold(y + vy)
        x = x + vx
        if flipped:
            vy = -vy
    return -1.0


# ---------------------------------------------------------------------------
# public operations

def serve_array(rng: np.random.Generator, s: np.ndarray, phys: PhysicsConfig) -> None:
    """In-place serve on a state vector (see :func:`serve`)."""
    toward_opp = rng.random() < 0.5
    vy = rng.uniform(-phys.serve_vy, phys.serve_vy)
    s[0] = MIDLINE_X
    s[1] = 0.5
    s[2] = phys.base_vx if toward_opp else -phys.base_vx
    s[3] = vy
    s[4] = 0.0
    s[10] = float(RallyPhase.TOWARD_OPPONENT if toward_opp else RallyPhase.TOWARD_AGENT)


def serve(rng: np.random.Generator, state: GameState,
          phys: PhysicsConfig = DEFAULT_PHYSICS) -> GameState:
    """Put the ball at the centre with a random direction.

    The side is a fair coin; the vertical speed is uniform in
    ``(-serve_vy, serve_vy)``.  Corner boost is cleared.
    """
    if state.rally_phase != RallyPhase.BETWEEN_RALLIES:
        raise PhysicsError("serve called while a rally is in progress")
    s = state.to_array()
    serve_array(rng, s, phys)
    return GameState.from_array(s, phys.half_height)


def reflect_wall(ball: BallState) -> BallState:
    """Specular bounce off the top or bottom wall."""
    y, flipped = _fold(ball.pos_y)
    vy = -ball.vel_y if flipped else ball.vel_y
    return replace(ball, pos_y=y, vel_y=vy)


def reflect_paddle(ball: BallState, paddle: PaddleState,
                   phys: PhysicsConfig = DEFAULT_PHYSICS) -> BallState:
    """Return the ball off a paddle.

    The new vertical speed is proportional to the contact offset from the
    paddle centre.  A contact in the outer corner band speeds the ball up by
    ``phys.boost``, at most once per rally.
    """
    vx, vy, boosted = _deflect(ball.pos_y, paddle.center_y, ball.vel_x, ball.boosted,
                               phys.params)
    return replace(ball, vel_x=vx, vel_y=vy, boosted=bool(boosted))


def advance_tick(state: GameState, opp_command: float,
                 phys: PhysicsConfig = DEFAULT_PHYSICS) -> tuple[GameState, list[Event]]:
    """Move everything by one tick.

    ``opp_command`` is the requested opponent paddle displacement; it is
    clamped to ``phys.paddle_step``.
    """
    if state.rally_phase == RallyPhase.BETWEEN_RALLIES:
        raise PhysicsError("advance_tick needs a rally in progress; serve first")
    s = state.to_array()
    bits = _tick(s, phys.params, float(opp_command))
    return GameState.from_array(s, phys.half_height), events_from_bits(bits)


def intercept_oracle(ball: BallState, target_plane_x: float = AGENT_PLANE_X,
                     max_ticks: int = 100_000) -> float:
    """Ball height where it next reaches ``target_plane_x``.

    Forward-simulates the ball alone (walls, no paddles) with the same
    arithmetic as the tick loop.
    """
    toward = (ball.vel_x < 0 and ball.pos_x > target_plane_x) or \
             (ball.vel_x > 0 and ball.pos_x < target_plane_x)
    if not toward:
        raise PhysicsError("ball is not moving toward the target plane")
    y = _intercept(ball.pos_x, ball.pos_y, ball.vel_x, ball.vel_y,
                   float(target_plane_x), max_ticks)
    if y < 0:
        raise PhysicsError(f"ball did not reach the plane within {max_ticks} ticks")
    return float(y)


@dataclass(frozen=True)
class RallyOutcome:
    result: Result
    intercept_y: float
    ticks_elapsed: int
    events: tuple[Event, ...] = ()


def clamp_center(placement: float, phys: PhysicsConfig = DEFAULT_PHYSICS) -> float:
    h = phys.half_height
    return min(max(float(placement), h), 1.0 - h)


def place_agent(state: GameState, placement: float,
                phys: PhysicsConfig = DEFAULT_PHYSICS) -> tuple[GameState, bool]:
    """Teleport the agent paddle; returns (state, clamped_out_of_range)."""
    out_of_range = not 0.0 <= placement <= 1.0
    c = clamp_center(placement, phys)
    return replace(state, agent_paddle=replace(state.agent_paddle, center_y=c)), out_of_range


def run_rally(state: GameState, agent_placement: float,
              opp_policy: Callable[[GameState], float],
              phys: PhysicsConfig = DEFAULT_PHYSICS,
              max_ticks: int = 100_000) -> tuple[GameState, RallyOutcome]:
    """Hold the agent paddle at ``agent_placement`` until the ball arrives.

    Placements outside ``[0, 1]`` are clamped and flagged with a
    ``PLACEMENT_CLAMPED`` event rather than rejected.
    """
    if state.rally_phase != RallyPhase.TOWARD_AGENT:
        raise PhysicsError("run_rally needs the ball moving toward the agent")
    state, clamped = place_agent(state, agent_placement, phys)
    events = [Event.PLACEMENT_CLAMPED] if clamped else []
    if clamped:
        warnings.warn(f"placement {agent_placement} outside [0, 1]; clamped", stacklevel=2)
    start = state.tick
    for _ in range(max_ticks):
        state, evs = advance_tick(state, opp_policy(state), phys)
        events += evs
        if Event.AGENT_HIT in evs or Event.AGENT_MISS in evs:
            result = Result.HIT if Event.AGENT_HIT in evs else Result.MISS
            return state, RallyOutcome(result, state.ball.pos_y, state.tick - start, tuple(events))
    raise PhysicsError(f"ball did not reach the agent within {max_ticks} ticks")


def trace_record(state: GameState, events: list[Event]) -> str:
    """One replay-trace line (JSON) for the state after a tick."""
    b = state.ball
    return json.dumps({
        "tick": state.tick,
        "ball": {"x": b.pos_x, "y": b.pos_y, "vx": b.vel_x, "vy": b.vel_y,
                 "boosted": b.boosted},
        "agent_y": state.agent_paddle.center_y,
        "opp_y": state.opp_paddle.center_y,
        "score": [state.agent_score, state.opp_score],
        "events": [e.value for e in events],
    })
