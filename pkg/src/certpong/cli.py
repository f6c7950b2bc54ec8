"""Command-line entry point.

    certpong train     [--config FILE] [--key value ...]
    certpong eval      --agent_path agent.json
    certpong compare   --checkpoints 25000,50000 --target_points 500
    certpong replay    --agent_path agent.json
    certpong gradcheck

Any configuration key can be overridden as ``--dotted.key value``.
Exit codes: 0 success, 1 invalid configuration, 2 runtime failure,
3 gradient check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import agent as agents
from . import harness, netcore
from .config import ConfigError, resolve
from .physics import AGENT_PLANE_X, OPP_PLANE_X, BallState, GameState, PaddleState

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3
GRADCHECK_TOLERANCE = 1e-4


def parse_overrides(tokens: list[str]) -> dict:
    out = {}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            try:
                value = next(it)
            except StopIteration:
                raise ConfigError(f"{key}: missing value") from None
        out[key.replace("-", "_")] = value
    return out


def _load_agent(cfg):
    path = cfg["agent_path"]
    if not path:
        raise ConfigError("agent_path: required for this subcommand")
    return agents.read_checkpoint(path)


def cmd_train(cfg, out: Path) -> int:
    seed = cfg["seeds"][0]
    agent_ss, env_ss = harness.seed_streams(seed)
    agent = agents.make_agent(cfg["agent_kind"], agent_ss, cfg.thresholds, cfg["learning_rate"])
    trainer = harness.Trainer(agent, np.random.default_rng(env_ss), cfg.opponent, cfg.physics,
                              record=cfg["record_epochs"])
    records = trainer.train(cfg["epochs"])
    agents.save_agent(agent, out / "agent.json", epochs=trainer.epochs_done)
    if cfg["record_epochs"]:
        (out / "epochs.jsonl").write_text(harness.records_to_jsonl(records))
    rate = trainer.hits / trainer.epochs_done if trainer.epochs_done else 0.0
    print(f"trained {agent.kind} for {trainer.epochs_done} epochs "
          f"(training hit rate {rate:.3f}) -> {out / 'agent.json'}")
    return EXIT_OK


def _result_csv(kind: str, seed: int, epochs: int, m: harness.MatchResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(harness.CheckpointReport.CSV_COLUMNS)
    w.writerow([kind, seed, epochs, m.agent_points, m.opp_points, m.rallies,
                repr(m.agent_hit_rate)])
    return buf.getvalue()


def cmd_eval(cfg, out: Path) -> int:
    agent, epochs = _load_agent(cfg)
    seed = cfg["seeds"][0]
    result = harness.run_match(agent, cfg["target_points"], harness.eval_rng(seed, epochs),
                               cfg.opponent, cfg.physics)
    text = _result_csv(agent.kind, seed, epochs, result)
    (out / "eval.csv").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_compare(cfg, out: Path) -> int:
    report = harness.compare_architectures(cfg.compare_config(),
                                           progress=lambda msg: print(msg, file=sys.stderr))
    (out / "report.csv").write_text(report.to_csv())
    agent_dir = out / "agents"
    agent_dir.mkdir(exist_ok=True)
    last = cfg["checkpoints"][-1]
    for (kind, seed), agent in report.agents.items():
        agents.save_agent(agent, agent_dir / f"{kind}_seed{seed}.json", epochs=last)
    print(report.to_csv(), end="")
    return EXIT_OK


def cmd_replay(cfg, out: Path) -> int:
    agent, epochs = _load_agent(cfg)
    every = cfg["replay.frame_every"]
    lines, frames = [], []

    def trace(line):
        lines.append(line)
        rec = json.loads(line)
        if "ball" in rec and rec["tick"] % every == 0:
            frames.append(harness.ascii_frame(_state_from_record(rec, cfg.physics)))

    result = harness.run_match(agent, cfg["replay.target_points"],
                               harness.eval_rng(cfg["seeds"][0], epochs), cfg.opponent,
                               cfg.physics, trace=trace)
    (out / "trace.jsonl").write_text("\n".join(lines) + "\n")
    (out / "frames.txt").write_text("\n\n".join(frames) + "\n")
    print(f"{len(lines)} trace lines, {len(frames)} frames; final score "
          f"{result.agent_points}-{result.opp_points}")
    return EXIT_OK


def _state_from_record(rec: dict, phys) -> GameState:
    b = rec["ball"]
    h = phys.half_height
    return GameState(BallState(b["x"], b["y"], b["vx"], b["vy"], b["boosted"]),
                     PaddleState(AGENT_PLANE_X, rec["agent_y"], h),
                     PaddleState(OPP_PLANE_X, rec["opp_y"], h),
                     rec["score"][0], rec["score"][1], rec["tick"])


def gradcheck(pairs: int = 100, seed: int = 0, epsilon: float = 1e-5) -> dict[str, float]:
    """Worst analytic-vs-numeric relative error per agent architecture."""
    rng = np.random.default_rng(seed)
    worst = {}
    for spec in netcore.AGENT_SPECS:
        err = 0.0
        for _ in range(pairs):
            net = netcore.init_network(spec, rng)
            # random biases too, so the bias gradients are exercised
            net.w1[:, -1] = rng.uniform(-0.5, 0.5, spec.n_hidden)
            net.w2[:, -1] = rng.uniform(-0.5, 0.5, spec.n_out)
            mask = rng.integers(0, 2, spec.n_out).astype(float)
            mask[rng.integers(spec.n_out)] = 1.0
            sample = netcore.TrainingSample(rng.random(spec.n_in), rng.random(spec.n_out), mask)
            analytic = netcore.analytic_gradient(net, sample)
            numeric = netcore.numeric_gradient(net, sample, epsilon)
            for a, n in zip(analytic, numeric):
                err = max(err, netcore.relative_error(a, n))
        worst[str(spec)] = err
    return worst


def cmd_gradcheck(cfg, out: Path) -> int:
    worst = gradcheck(seed=cfg["seeds"][0])
    ok = True
    for spec, err in worst.items():
        status = "ok" if err < GRADCHECK_TOLERANCE else "FAIL"
        ok &= err < GRADCHECK_TOLERANCE
        print(f"{spec:>8}  max relative error {err:.3e}  {status}")
    print(f"max relative error {max(worst.values()):.3e} (tolerance {GRADCHECK_TOLERANCE:g})")
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "compare": cmd_compare,
            "replay": cmd_replay, "gradcheck": cmd_gradcheck}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="certpong", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config file")
    try:
        args, rest = parser.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = resolve(args.config, parse_overrides(rest))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = cfg.output_dir
    try:
        cfg.write_resolved()
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (netcore.LoadError, harness.MatchAborted, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
