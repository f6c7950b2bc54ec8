"""Learning paddle agents.

``SimpleAgent`` trains one prediction network on randomly placed paddles
that happened to return the ball.  ``FourNetAgent`` adds a positive-reward,
a negative-reward and an intuition network; during training their outputs
gate where the paddle goes:

* certainty high and recent certainties high -> trust the prediction,
* certainty in the middle band -> intuition net picks the candidate position
  with the best estimated hit odds,
* certainty low -> random placement.

With training off both agents simply place at the prediction.
"""

from __future__ import annotations

import enum
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import netcore
from .encoding import candidate_grid_inputs, extend_features
from .netcore import Network, init_network, train_step
from .physics import AGENT_PLANE_X, BallState, Result, intercept_oracle

AGENT_FORMAT_VERSION = 1


class Mode(enum.Enum):
    PREDICTED = "predicted"
    INTUITION = "intuition"
    RANDOM = "random"


@dataclass(frozen=True)
class ThresholdConfig:
    high: float = 0.95
    window_mean_min: float = 0.80
    low: float = 0.30
    grid: int = 33
    window_size: int = 10

    def __post_init__(self):
        if not 0 <= self.low < self.high <= 1:
            raise ValueError("thresholds need 0 <= low < high <= 1")
        if not 0 <= self.window_mean_min <= 1:
            raise ValueError("window_mean_min must lie in [0, 1]")
        if int(self.grid) != self.grid or self.grid < 2:
            raise ValueError("grid must be an integer >= 2")
        if int(self.window_size) != self.window_size or self.window_size < 1:
            raise ValueError("window_size must be an integer >= 1")


class CertaintyWindow:
    """The most recent certainty values; mean of an empty window is 0."""

    def __init__(self, size: int = 10, values=()):
        self._values = deque(values, maxlen=size)

    @property
    def size(self) -> int:
        return self._values.maxlen

    def push(self, c: float) -> None:
        self._values.append(float(c))

    def mean(self) -> float:
        if not self._values:
            return 0.0
        return sum(self._values) / len(self._values)

    def values(self) -> list[float]:
        return list(self._values)

    def __len__(self):
        return len(self._values)

    def __eq__(self, other):
        return (isinstance(other, CertaintyWindow) and self.size == other.size
                and self.values() == other.values())


@dataclass
class SimpleAgent:
    prediction: Network
    kind = "simple"

    @classmethod
    def create(cls, seed, learning_rate: float = netcore.DEFAULT_LEARNING_RATE) -> SimpleAgent:
        return cls(init_network(netcore.SIMPLE_PREDICTION, seed, learning_rate))

    def networks(self) -> dict[str, Network]:
        return {"prediction": self.prediction}


@dataclass
class FourNetAgent:
    prediction: Network
    positive: Network
    negative: Network
    intuition: Network
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    window: CertaintyWindow | None = None
    kind = "four_net"

    def __post_init__(self):
        expected = {"prediction": netcore.FOURNET_PREDICTION, "positive": netcore.REWARD,
                    "negative": netcore.REWARD, "intuition": netcore.INTUITION}
        for name, spec in expected.items():
            if getattr(self, name).spec != spec:
                raise netcore.SpecError(f"{name} network must be {spec}")
        if self.window is None:
            self.window = CertaintyWindow(self.thresholds.window_size)

    @classmethod
    def create(cls, seed, thresholds: ThresholdConfig | None = None,
               learning_rate: float = netcore.DEFAULT_LEARNING_RATE) -> FourNetAgent:
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        seeds = ss.spawn(4)
        specs = (netcore.FOURNET_PREDICTION, netcore.REWARD, netcore.REWARD, netcore.INTUITION)
        nets = [init_network(spec, s, learning_rate) for spec, s in zip(specs, seeds)]
        return cls(*nets, thresholds=thresholds or ThresholdConfig())

    def networks(self) -> dict[str, Network]:
        return {"prediction": self.prediction, "positive": self.positive,
                "negative": self.negative, "intuition": self.intuition}


@dataclass
class OracleAgent:
    """Reference player that places exactly at the true intercept."""

    kind = "oracle"

    def networks(self) -> dict[str, Network]:
        return {}


@dataclass(frozen=True)
class PlacementDecision:
    position: float
    mode: Mode
    certainty: float | None = None


def predict_position(agent, f: np.ndarray) -> float:
    return float(netcore._forward(agent.prediction.w1, agent.prediction.w2, f)[0])


def compute_certainty(pos_hit_out: float, neg_miss_out: float) -> float:
    """Estimated chance that a placement returns the ball."""
    return float(pos_hit_out) * (1.0 - float(neg_miss_out))


def select_mode(c: float, window_mean: float, thresholds: ThresholdConfig) -> Mode:
    if c >= thresholds.high and window_mean >= thresholds.window_mean_min:
        return Mode.PREDICTED
    if c >= thresholds.low:
        return Mode.INTUITION
    return Mode.RANDOM


def intuition_scores(intuition: Network, f: np.ndarray, grid: int) -> tuple[np.ndarray, np.ndarray]:
    q, xs = candidate_grid_inputs(f, grid)
    out = netcore._forward_batch(intuition.w1, intuition.w2, xs)
    return q, out[:, 1] * (1.0 - out[:, 2])


def intuition_argmax(intuition: Network, f: np.ndarray, grid: int = 33) -> float:
    """Grid candidate with the highest ``hit * (1 - miss)``; ties go to the lowest."""
    if grid < 2:
        raise ValueError("grid must be >= 2")
    q, scores = intuition_scores(intuition, f, grid)
    return float(q[int(np.argmax(scores))])


def gate_certainty(agent: FourNetAgent, f: np.ndarray, p: float) -> float:
    x8 = extend_features(f, p)
    hit = netcore._forward(agent.positive.w1, agent.positive.w2, x8)[1]
    miss = netcore._forward(agent.negative.w1, agent.negative.w2, x8)[1]
    return compute_certainty(hit, miss)


def choose_placement(agent, f: np.ndarray, training: bool, rng: np.random.Generator,
                     ball: BallState | None = None) -> PlacementDecision:
    """Where to put the paddle for the incoming ball described by ``f``.

    ``ball`` is only consulted by :class:`OracleAgent`.
    """
    if isinstance(agent, OracleAgent):
        if ball is None:
            raise ValueError("OracleAgent needs the ball state")
        return PlacementDecision(intercept_oracle(ball, AGENT_PLANE_X), Mode.PREDICTED)
    if not training:
        return PlacementDecision(predict_position(agent, f), Mode.PREDICTED)
    if isinstance(agent, SimpleAgent):
        return PlacementDecision(float(rng.random()), Mode.RANDOM)

    p = predict_position(agent, f)
    c = gate_certainty(agent, f, p)
    mode = select_mode(c, agent.window.mean(), agent.thresholds)
    agent.window.push(c)
    if mode is Mode.PREDICTED:
        pos = p
    elif mode is Mode.INTUITION:
        pos = intuition_argmax(agent.intuition, f, agent.thresholds.grid)
    else:
        pos = float(rng.random())
    return PlacementDecision(pos, mode, c)


_ONE = np.ones(1)
_MASK_BINARY2 = np.array([0.0, 1.0])
_MASK_BINARY3 = np.array([0.0, 1.0, 1.0])
_ONES2 = np.ones(2)
_ONES3 = np.ones(3)


def learn_from_outcome(agent, f: np.ndarray, placed: float, outcome: Result):
    """Reward-modulated update after one placement.  Mutates and returns ``agent``.

    The prediction net only ever learns from hits, with the placed position
    as its target.  The reward and intuition nets see both outcomes; on a
    miss their position output is masked out because a missed placement is
    no regression target.
    """
    hit = outcome is Result.HIT
    if isinstance(agent, OracleAgent):
        return agent
    if hit:
        train_step(agent.prediction, f, np.array([placed]), _ONE)
    if isinstance(agent, SimpleAgent):
        return agent

    x8 = extend_features(f, placed)
    if hit:
        train_step(agent.positive, x8, np.array([placed, 1.0]), _ONES2)
        train_step(agent.negative, x8, np.array([placed, 0.0]), _ONES2)
        train_step(agent.intuition, x8, np.array([placed, 1.0, 0.0]), _ONES3)
    else:
        train_step(agent.positive, x8, np.array([0.0, 0.0]), _MASK_BINARY2)
        train_step(agent.negative, x8, np.array([0.0, 1.0]), _MASK_BINARY2)
        train_step(agent.intuition, x8, np.array([0.0, 0.0, 1.0]), _MASK_BINARY3)
    return agent


# ---------------------------------------------------------------------------
# checkpoints

def agent_to_dict(agent, epochs: int | None = None) -> dict:
    d = {"format_version": AGENT_FORMAT_VERSION, "agent_kind": agent.kind,
         "networks": {k: netcore.network_to_dict(n) for k, n in agent.networks().items()}}
    if epochs is not None:
        d["epochs"] = int(epochs)
    if isinstance(agent, FourNetAgent):
        t = agent.thresholds
        d["thresholds"] = {"high": t.high, "window_mean_min": t.window_mean_min,
                           "low": t.low, "grid": t.grid, "window_size": t.window_size}
        d["window"] = agent.window.values()
    return d


def agent_from_dict(d: dict):
    if not isinstance(d, dict):
        raise netcore.LoadError("agent checkpoint must be a JSON object")
    if d.get("format_version") != AGENT_FORMAT_VERSION:
        raise netcore.LoadError(f"format_version: expected {AGENT_FORMAT_VERSION}, "
                                f"got {d.get('format_version')!r}")
    kind = d.get("agent_kind")
    nets_raw = d.get("networks", {})

    def net(name):
        if name not in nets_raw:
            raise netcore.LoadError(f"networks.{name}: missing")
        try:
            return netcore.network_from_dict(nets_raw[name])
        except netcore.LoadError as exc:
            raise netcore.LoadError(f"networks.{name}.{exc}") from None

    try:
        if kind == "oracle":
            return OracleAgent()
        if kind == "simple":
            return SimpleAgent(net("prediction"))
        if kind == "four_net":
            th = ThresholdConfig(**d["thresholds"])
            window = CertaintyWindow(th.window_size, d.get("window", []))
            return FourNetAgent(net("prediction"), net("positive"), net("negative"),
                                net("intuition"), thresholds=th, window=window)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, netcore.LoadError):
            raise
        raise netcore.LoadError(f"agent checkpoint: {exc}") from None
    raise netcore.LoadError(f"agent_kind: unknown value {kind!r}")


def save_agent(agent, path, epochs: int | None = None) -> None:
    """Write a single-file JSON checkpoint (networks, thresholds, window)."""
    Path(path).write_text(json.dumps(agent_to_dict(agent, epochs), allow_nan=False))


def read_checkpoint(path) -> tuple[object, int]:
    """Load a checkpoint; returns (agent, epochs trained or 0 if unrecorded)."""
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise netcore.LoadError(f"{path}: not valid JSON: {exc}") from None
    agent = agent_from_dict(d)
    epochs = d.get("epochs", 0)
    if not isinstance(epochs, int) or epochs < 0:
        raise netcore.LoadError("epochs: must be a non-negative integer")
    return agent, epochs


def load_agent(path):
    return read_checkpoint(path)[0]


def make_agent(kind: str, seed, thresholds: ThresholdConfig | None = None,
               learning_rate: float = netcore.DEFAULT_LEARNING_RATE):
    if kind == "simple":
        return SimpleAgent.create(seed, learning_rate)
    if kind == "four_net":
        return FourNetAgent.create(seed, thresholds, learning_rate)
    if kind == "oracle":
        return OracleAgent()
    raise ValueError(f"unknown agent kind {kind!r}")

