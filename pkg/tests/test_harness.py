import csv
import io
import json
import math
from dataclasses import replace

import numpy as np
import pytest

from certpong.agent import (FourNetAgent, OracleAgent, SimpleAgent, agent_to_dict, make_agent,
                            predict_position)
from certpong.encoding import encode_features
from certpong.harness import (CompareConfig, Game, MatchAborted, OpponentConfig, Trainer,
                              ascii_frame, compare_architectures, eval_rng, opponent_command,
                              records_to_jsonl, run_match, run_training, seed_streams)
from certpong.physics import BallState, PaddleState, Result, new_game

from conftest import DESK

OPP = OpponentConfig()


def state_with(ball_y, opp_y, tick):
    s = new_game()
    return replace(s, ball=BallState(0.5, ball_y, -0.02, 0.0),
                   opp_paddle=PaddleState(1.0, opp_y), tick=tick)


# -- opponent ----------------------------------------------------------------------

def test_opponent_saturates_upward():
    assert opponent_command(state_with(0.1, 0.8, 0), OPP) == -OPP.max_speed


def test_opponent_lands_on_close_target():
    assert opponent_command(state_with(0.505, 0.5, 0), OPP) == pytest.approx(0.005, abs=1e-15)


def test_opponent_wobble_phase():
    tick = math.pi / 2 / OPP.wobble_freq
    cfg = OpponentConfig(max_speed=1.0)
    assert opponent_command(state_with(0.5, 0.5, 0), cfg) == 0.0
    assert opponent_command(state_with(0.5, 0.5, tick), cfg) == pytest.approx(0.05, abs=1e-12)


def test_opponent_config_validated():
    with pytest.raises(ValueError):
        OpponentConfig(max_speed=0.0)


def test_opponent_fallibility():
    m = run_match(OracleAgent(), 800, np.random.default_rng(3))
    faced = m.opp_returns + m.agent_points
    assert faced >= 10_000
    assert 0 < m.agent_points / faced < 0.2


# -- training ----------------------------------------------------------------------

def test_zero_epochs_changes_nothing():
    agent = FourNetAgent.create(0)
    before = agent_to_dict(agent)
    _, records = run_training(agent, 0, np.random.default_rng(0))
    assert records == [] and agent_to_dict(agent) == before


def test_training_is_deterministic():
    def train():
        agent = FourNetAgent.create(5)
        run_training(agent, 2000, np.random.default_rng(6))
        return agent_to_dict(agent)

    assert train() == train()


def test_record_accounting():
    _, records = run_training(SimpleAgent.create(1), 777, np.random.default_rng(1))
    assert len(records) == 777
    assert [r.epoch for r in records] == list(range(1, 778))
    lines = records_to_jsonl(records).splitlines()
    assert len(lines) == 777 and json.loads(lines[0])["mode"] == "random"


def test_training_rejects_negative_epochs():
    with pytest.raises(ValueError):
        run_training(SimpleAgent.create(0), -1, np.random.default_rng(0))


def test_split_training_equals_uninterrupted():
    a = Trainer(FourNetAgent.create(2), np.random.default_rng(3), record=False)
    a.train(1500)
    b = Trainer(FourNetAgent.create(2), np.random.default_rng(3), record=False)
    for chunk in (1, 499, 1000):
        b.train(chunk)
    assert agent_to_dict(a.agent) == agent_to_dict(b.agent)


@pytest.mark.xfail(strict=True, reason="50K epochs reach roughly 0.6, see notes on learning speed")
def test_simple_agent_learns_in_50k_epochs():
    agent_ss, env_ss = seed_streams(0)
    agent = SimpleAgent.create(agent_ss)
    run_training(agent, 50_000, np.random.default_rng(env_ss), record=False)
    m = run_match(agent, 200, eval_rng(0, 50_000))
    assert m.agent_hit_rate >= 0.85


# -- matches -----------------------------------------------------------------------

def test_oracle_match_is_perfect():
    m = run_match(OracleAgent(), 100, np.random.default_rng(0))
    assert m.agent_hit_rate == 1.0 and m.opp_points == 0 and m.agent_points == 100


def test_untrained_agent_matches_monte_carlo():
    agent = SimpleAgent.create(4)
    m = run_match(agent, 50, np.random.default_rng(21))
    # estimate the per-ball hit probability of this fixed policy on fresh balls
    game, n, hits = Game(np.random.default_rng(22)), 20_000, 0
    for _ in range(n):
        game.next_ball()
        hits += game.play_ball(predict_position(agent, encode_features(game.ball()))) is Result.HIT
    p = hits / n
    sigma = math.sqrt(p * (1 - p) / m.rallies)
    assert abs(m.agent_hit_rate - p) <= 3 * sigma
    assert m.opp_points > m.agent_points


def test_match_ends_exactly_at_target():
    m = run_match(SimpleAgent.create(0), 7, np.random.default_rng(1))
    assert m.agent_points == 7


def test_match_guard_aborts():
    with pytest.raises(MatchAborted):
        run_match(SimpleAgent.create(0), 10_000, np.random.default_rng(0), tick_limit=5000)


def test_traced_match_equals_untraced():
    agent = FourNetAgent.create(8)
    run_training(agent, 3000, np.random.default_rng(8), record=False)
    lines = []
    traced = run_match(agent, 20, eval_rng(8, 3000), trace=lines.append)
    plain = run_match(agent, 20, eval_rng(8, 3000))
    assert traced == plain
    last = json.loads(lines[-1])
    assert last["score"] == [plain.agent_points, plain.opp_points]


def test_ascii_frame_shape():
    frame = ascii_frame(new_game(), width=20, height=8).splitlines()
    assert len(frame) == 11
    assert all(len(line) == 22 for line in frame[:10])
    assert "o" in "".join(frame) and "]" in frame[4] + frame[5] and "[" in frame[4] + frame[5]


# -- comparison --------------------------------------------------------------------

SMALL = CompareConfig(checkpoints=(200, 600), seeds=(0, 1), target_points=5)


@pytest.fixture(scope="module")
def small_report():
    return compare_architectures(SMALL)


def test_report_row_count(small_report):
    assert len(small_report.rows) == len(SMALL.checkpoints) * len(SMALL.seeds) * 2
    assert {r.checkpoint_epochs for r in small_report.rows} == set(SMALL.checkpoints)


def test_report_csv_columns(small_report):
    rows = list(csv.reader(io.StringIO(small_report.to_csv())))
    assert rows[0] == ["agent_kind", "seed", "checkpoint_epochs", "agent_points", "opp_points",
                       "rallies", "agent_hit_rate"]
    assert len(rows) == 1 + len(small_report.rows)
    assert all(int(r[3]) == 5 for r in rows[1:])


def test_checkpoint_purity(small_report):
    for kind in ("simple", "four_net"):
        agent_ss, env_ss = seed_streams(1)
        agent = make_agent(kind, agent_ss)
        Trainer(agent, np.random.default_rng(env_ss), record=False).train(600)
        assert agent_to_dict(agent) == agent_to_dict(small_report.agents[(kind, 1)])


def test_parallel_compare_matches_serial(small_report):
    par = compare_architectures(replace(SMALL, workers=2))
    assert par.to_csv() == small_report.to_csv()


def test_compare_config_validated():
    with pytest.raises(ValueError):
        CompareConfig(checkpoints=(100, 50))


def test_median_hit_rate_non_decreasing(desk_report):
    # a statement about the median over 5 seeds; single seeds may dip
    for kind in ("simple", "four_net"):
        medians = [desk_report.median_hit_rate(kind, cp) for cp in DESK.checkpoints]
        assert all(b >= a for a, b in zip(medians, medians[1:])), medians
