"""Training loop, evaluation matches and the architecture comparison.

One training *epoch* is one placement-and-outcome cycle: the game runs until
a ball heading for the agent crosses the midline, the agent places its
paddle, the ball arrives, and the agent learns from hit or miss.  The
scripted opponent plays throughout.

Evaluation matches run on a fresh game with their own generator, so pausing
training for a match never changes the training trajectory.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

import numba
import numpy as np

from . import agent as agents
from .agent import ThresholdConfig, choose_placement, learn_from_outcome
from .encoding import encode_features
from .physics import (DEFAULT_PHYSICS, EV_AGENT_HIT, EV_AGENT_MISS, EV_OPP_HIT, EV_OPP_MISS,
                      MIDLINE_X, SAMPLE_EPS, BallState, GameState, PhysicsConfig,
                      Result, _tick, clamp_center, events_from_bits, new_game, serve_array,
                      trace_record)

MAX_MATCH_TICKS = 10**8

# stop codes of the run kernel
_AT_SAMPLE = 1
_NEED_SERVE = 2
_AGENT_DONE = 3
_ABORT = 4


class MatchAborted(RuntimeError):
    """The tick guard fired; the agent/opponent pairing never finishes."""


@dataclass(frozen=True)
class OpponentConfig:
    """Near-perfect scripted opponent: lagged tracking plus a sine wobble."""

    max_speed: float = 0.012
    wobble_amp: float = 0.05
    wobble_freq: float = 0.37

    def __post_init__(self):
        for name in ("max_speed", "wobble_amp", "wobble_freq"):
            if not getattr(self, name) > 0:
                raise ValueError(f"opponent {name} must be positive")

    @property
    def params(self) -> np.ndarray:
        return np.array([self.max_speed, self.wobble_amp, self.wobble_freq])


@numba.njit(cache=True)
def _opp_command(ball_y, center, tick, max_speed, amp, freq):
    d = ball_y + amp * math.sin(freq * tick) - center
    if d > max_speed:
        return max_speed
    if d < -max_speed:
        return -max_speed
    return d


def opponent_command(state: GameState, cfg: OpponentConfig = OpponentConfig()) -> float:
    """Paddle displacement toward ``ball_y + wobble_amp * sin(wobble_freq * tick)``.

    Saturates at ``max_speed``; within one step the paddle lands on the target.
    """
    return _opp_command(state.ball.pos_y, state.opp_paddle.center_y, float(state.tick),
                        cfg.max_speed, cfg.wobble_amp, cfg.wobble_freq)


@numba.njit(cache=True)
def _run(s, p, o, until_agent, tick_limit, counts):
    """Tick until the next decision point.

    ``until_agent``: stop when the ball reaches the agent plane.  Otherwise
    stop when a serve is needed or a ball heading for the agent is at the
    midline.  ``counts`` accumulates opponent hits and misses.
    """
    while True:
        if not until_agent:
            if s[10] == 2.0:
                return _NEED_SERVE, 0
            if s[10] == 0.0 and s[0] <= MIDLINE_X + SAMPLE_EPS:
                return _AT_SAMPLE, 0
        if s[9] >= tick_limit:
            return _ABORT, 0
        cmd = _opp_command(s[1], s[6], s[9], o[0], o[1], o[2])
        bits = _tick(s, p, cmd)
        if bits & EV_OPP_HIT:
            counts[0] += 1
        elif bits & EV_OPP_MISS:
            counts[1] += 1
        if until_agent and bits & (EV_AGENT_HIT | EV_AGENT_MISS):
            return _AGENT_DONE, bits


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    mode: str
    certainty: float | None
    position: float
    outcome: str


@dataclass(frozen=True)
class MatchResult:
    """Score when the agent reaches its target.

    ``rallies`` counts balls the agent had to return; ``agent_hit_rate`` is
    the fraction of those it returned.
    """

    agent_points: int
    opp_points: int
    rallies: int
    agent_hit_rate: float
    opp_returns: int = 0


class Game:
    """A running game on a state vector, driven by the fast kernels."""

    def __init__(self, rng: np.random.Generator, opponent: OpponentConfig = OpponentConfig(),
                 phys: PhysicsConfig = DEFAULT_PHYSICS, tick_limit: float = MAX_MATCH_TICKS):
        self.rng = rng
        self.phys = phys
        self.opponent = opponent
        self.s = new_game(phys).to_array()
        self._p = phys.params
        self._o = opponent.params
        self.tick_limit = float(tick_limit)
        self.counts = np.zeros(2, dtype=np.int64)

    @property
    def state(self) -> GameState:
        return GameState.from_array(self.s, self.phys.half_height)

    def next_ball(self, stop: Callable[[], bool] | None = None) -> bool:
        """Run until a ball heading for the agent reaches the midline.

        Returns False if ``stop()`` turned true after a point was scored.
        """
        s = self.s
        while True:
            code, _ = _run(s, self._p, self._o, False, self.tick_limit, self.counts)
            if code == _AT_SAMPLE:
                return True
            if code == _ABORT:
                raise MatchAborted(f"no decision after {int(s[9])} ticks")
            if stop is not None and stop():
                return False
            serve_array(self.rng, s, self.phys)

    def ball(self) -> BallState:
        s = self.s
        return BallState(s[0], s[1], s[2], s[3], s[4] > 0.5)

    def play_ball(self, placement: float) -> Result:
        """Place the agent paddle and run until the ball reaches it."""
        s = self.s
        s[5] = clamp_center(placement, self.phys)
        code, bits = _run(s, self._p, self._o, True, self.tick_limit, self.counts)
        if code == _ABORT:
            raise MatchAborted(f"ball never reached the agent ({int(s[9])} ticks)")
        return Result.HIT if bits & EV_AGENT_HIT else Result.MISS


class Trainer:
    """Reward training of one agent on its own persistent game.

    Calling :meth:`train` repeatedly continues the same trajectory, so a run
    split into pieces is identical to one uninterrupted run.
    """

    def __init__(self, agent, rng: np.random.Generator,
                 opponent: OpponentConfig = OpponentConfig(),
                 phys: PhysicsConfig = DEFAULT_PHYSICS, record: bool = True):
        self.agent = agent
        self.game = Game(rng, opponent, phys, tick_limit=math.inf)
        self.record = record
        self.epochs_done = 0
        self.hits = 0

    def train(self, epochs: int) -> list[EpochRecord]:
        if epochs < 0:
            raise ValueError("epochs must be >= 0")
        agent, game = self.agent, self.game
        rng, phys = game.rng, game.phys
        records = []
        for _ in range(epochs):
            game.next_ball()
            ball = game.ball()
            f = encode_features(ball, phys)
            decision = choose_placement(agent, f, True, rng, ball)
            outcome = game.play_ball(decision.position)
            learn_from_outcome(agent, f, decision.position, outcome)
            self.epochs_done += 1
            if outcome is Result.HIT:
                self.hits += 1
            if self.record:
                records.append(EpochRecord(self.epochs_done, decision.mode.value,
                                           decision.certainty, decision.position,
                                           outcome.value))
        return records


def run_training(agent, epochs: int, rng: np.random.Generator,
                 cfg: OpponentConfig = OpponentConfig(),
                 phys: PhysicsConfig = DEFAULT_PHYSICS,
                 record: bool = True) -> tuple[object, list[EpochRecord]]:
    trainer = Trainer(agent, rng, cfg, phys, record)
    records = trainer.train(epochs)
    return agent, records


def run_match(agent, target_points: int, rng: np.random.Generator,
              cfg: OpponentConfig = OpponentConfig(),
              phys: PhysicsConfig = DEFAULT_PHYSICS,
              tick_limit: int = MAX_MATCH_TICKS,
              trace: Callable[[str], None] | None = None) -> MatchResult:
    """Play with training off until the agent has ``target_points``.

    With ``trace`` set, every tick is stepped individually and reported as
    one JSON line; the game itself is identical to the untraced run.
    """
    if target_points < 1:
        raise ValueError("target_points must be >= 1")
    if trace is not None:
        return _traced_match(agent, target_points, rng, cfg, phys, tick_limit, trace)
    game = Game(rng, cfg, phys, tick_limit)
    s = game.s
    rallies = hits = 0
    while game.next_ball(stop=lambda: s[7] >= target_points):
        ball = game.ball()
        f = encode_features(ball, phys)
        decision = choose_placement(agent, f, False, rng, ball)
        rallies += 1
        if game.play_ball(decision.position) is Result.HIT:
            hits += 1
    return MatchResult(int(s[7]), int(s[8]), rallies, hits / rallies if rallies else 0.0,
                       int(game.counts[0]))


def _traced_match(agent, target_points, rng, cfg, phys, tick_limit, trace):
    # tick-by-tick twin of run_match built on the same kernels
    from .physics import RallyPhase
    s = new_game(phys).to_array()
    p, o = phys.params, cfg.params
    h = phys.half_height
    rallies = hits = opp_returns = 0
    placed = False
    while True:
        phase = s[10]
        if phase == RallyPhase.BETWEEN_RALLIES:
            if s[7] >= target_points:
                break
            serve_array(rng, s, phys)
            trace(json.dumps({"tick": int(s[9]), "serve": {"vx": s[2], "vy": s[3]}}))
            continue
        if phase == RallyPhase.TOWARD_AGENT and not placed and s[0] <= MIDLINE_X + SAMPLE_EPS:
            state = GameState.from_array(s, h)
            f = encode_features(state.ball, phys)
            decision = choose_placement(agent, f, False, rng, state.ball)
            s[5] = clamp_center(decision.position, phys)
            rallies += 1
            placed = True
        if s[9] >= tick_limit:
            raise MatchAborted(f"no result after {int(s[9])} ticks")
        cmd = _opp_command(s[1], s[6], s[9], o[0], o[1], o[2])
        bits = _tick(s, p, cmd)
        if bits & (EV_AGENT_HIT | EV_AGENT_MISS):
            placed = False
            hits += bool(bits & EV_AGENT_HIT)
        opp_returns += bool(bits & EV_OPP_HIT)
        trace(trace_record(GameState.from_array(s, h), events_from_bits(bits)))
    return MatchResult(int(s[7]), int(s[8]), rallies, hits / rallies if rallies else 0.0,
                       opp_returns)


def ascii_frame(state: GameState, width: int = 40, height: int = 16) -> str:
    """Character-grid picture of the field: ``]`` agent, ``[`` opponent, ``o`` ball."""
    grid = [[" "] * width for _ in range(height)]

    def row(y):
        return min(int(y * height), height - 1)

    for col, paddle, ch in ((0, state.agent_paddle, "]"), (width - 1, state.opp_paddle, "[")):
        top, bottom = paddle.center_y - paddle.half_height, paddle.center_y + paddle.half_height
        for r in range(row(top), row(bottom) + 1):
            grid[r][col] = ch
    bx = min(int(state.ball.pos_x * width), width - 1)
    grid[row(state.ball.pos_y)][bx] = "o"
    border = "+" + "-" * width + "+"
    lines = [border] + ["|" + "".join(r) + "|" for r in grid] + [border]
    lines.append(f"tick {state.tick}  agent {state.agent_score}  opponent {state.opp_score}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# architecture comparison

@dataclass(frozen=True)
class CompareConfig:
    checkpoints: tuple[int, ...] = (500_000, 1_000_000, 2_000_000, 5_000_000)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    target_points: int = 10_000
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    opponent: OpponentConfig = field(default_factory=OpponentConfig)
    physics: PhysicsConfig = DEFAULT_PHYSICS
    learning_rate: float = 0.3
    agent_kinds: tuple[str, ...] = ("simple", "four_net")
    workers: int = 1

    def __post_init__(self):
        cps = tuple(self.checkpoints)
        if not cps or any(c < 0 for c in cps) or list(cps) != sorted(set(cps)):
            raise ValueError("checkpoints must be a non-empty strictly increasing list of epochs >= 0")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.target_points < 1:
            raise ValueError("target_points must be >= 1")


@dataclass(frozen=True)
class ReportRow:
    agent_kind: str
    seed: int
    checkpoint_epochs: int
    result: MatchResult


@dataclass
class CheckpointReport:
    rows: list[ReportRow] = field(default_factory=list)
    agents: dict[tuple[str, int], object] = field(default_factory=dict, repr=False)

    CSV_COLUMNS = ("agent_kind", "seed", "checkpoint_epochs", "agent_points", "opp_points",
                   "rallies", "agent_hit_rate")

    def select(self, agent_kind: str, checkpoint: int) -> list[MatchResult]:
        return [r.result for r in self.rows
                if r.agent_kind == agent_kind and r.checkpoint_epochs == checkpoint]

    def median_conceded(self, agent_kind: str, checkpoint: int) -> float:
        return float(np.median([m.opp_points for m in self.select(agent_kind, checkpoint)]))

    def median_hit_rate(self, agent_kind: str, checkpoint: int) -> float:
        return float(np.median([m.agent_hit_rate for m in self.select(agent_kind, checkpoint)]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for r in self.rows:
            m = r.result
            w.writerow([r.agent_kind, r.seed, r.checkpoint_epochs, m.agent_points,
                        m.opp_points, m.rallies, repr(m.agent_hit_rate)])
        return buf.getvalue()


def seed_streams(seed: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """(agent-initialisation, training-environment) seed sequences for a run seed."""
    agent_ss, env_ss = np.random.SeedSequence(seed).spawn(2)
    return agent_ss, env_ss


def eval_rng(seed: int, checkpoint: int) -> np.random.Generator:
    # independent of the training streams, shared by both agent kinds
    return np.random.default_rng(np.random.SeedSequence([seed, checkpoint], spawn_key=(99,)))


def _train_and_evaluate(kind: str, seed: int, cfg: CompareConfig):
    agent_ss, env_ss = seed_streams(seed)
    agent = agents.make_agent(kind, agent_ss, cfg.thresholds, cfg.learning_rate)
    trainer = Trainer(agent, np.random.default_rng(env_ss), cfg.opponent, cfg.physics,
                      record=False)
    rows = []
    for cp in cfg.checkpoints:
        trainer.train(cp - trainer.epochs_done)
        result = run_match(agent, cfg.target_points, eval_rng(seed, cp), cfg.opponent,
                           cfg.physics)
        rows.append(ReportRow(kind, seed, cp, result))
    return rows, agent


def compare_architectures(cfg: CompareConfig,
                          progress: Callable[[str], None] | None = None) -> CheckpointReport:
    """Train each agent kind per seed, pausing at every checkpoint for a match."""
    jobs = [(kind, seed) for seed in cfg.seeds for kind in cfg.agent_kinds]
    report = CheckpointReport()
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            outputs = list(pool.map(_train_and_evaluate, *zip(*jobs),
                                    [cfg] * len(jobs)))
    else:
        outputs = []
        for kind, seed in jobs:
            outputs.append(_train_and_evaluate(kind, seed, cfg))
            if progress:
                progress(f"{kind} seed {seed} done")
    for (kind, seed), (rows, agent) in zip(jobs, outputs):
        report.rows.extend(rows)
        report.agents[(kind, seed)] = agent
    return report


def records_to_jsonl(records: Iterable[EpochRecord]) -> str:
    return "".join(json.dumps(asdict(r)) + "\n" for r in records)

