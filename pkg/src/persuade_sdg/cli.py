"""Command-line driver: play, selfplay, extract, train, eval, measure, toy-init.

Settings resolve as flags, then a ``--config`` JSON file, then built-in
defaults. Every artifact carries the effective settings: JSON outputs embed
them, line-delimited outputs get a ``<out>.meta.json`` sidecar.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import grpo
from .arena import (
    ENGINES,
    DEFAULT_LOGS,
    DEFAULT_MATCHES,
    DEFAULT_SAMPLE,
    DEFAULT_TEAM_EVAL_MATCHES,
    AgentSpec,
    MatchPlan,
    SampleExceedsPool,
    extract_dataset,
    generate_selfplay,
    load_pool,
    read_logs,
    run_match,
    run_team_eval,
    run_tournament,
    seats,
    write_logs,
    write_report,
)
from .persuasion import RewardMode, TrainingInstance, all_modes, measure_reward, read_dataset, write_dataset
from .policy import EOS, UNK, ToyPolicy, ToyPolicyParams, load_checkpoint, save_checkpoint

log = logging.getLogger("persuade_sdg")

DEFAULT_BACKENDS = [{"kind": "stub", "name": "stub-a"}, {"kind": "stub", "name": "stub-b"},
                    {"kind": "stub", "name": "stub-c"}]

# Built-in defaults per command; also the set of keys a config file may set.
DEFAULTS: dict[str, dict[str, Any]] = {
    "play": {"game": None, "agents": None, "seed": 0, "out": None, "tie_rule": "random",
             "standard_tie": False},
    "selfplay": {"game": None, "count": DEFAULT_LOGS, "backends": None, "seed": 0, "out": None,
                 "workers": 1, "tie_rule": "random", "standard_tie": False},
    "extract": {"logs": None, "sample": DEFAULT_SAMPLE, "seed": 0, "out": None},
    "train": {"dataset": None, "measurer": None, "refiner": None, "out": None, "metrics": None,
              "n": 8, "epsilon": 0.2, "beta": 0.04, "lr": 1e-6, "epochs": 3, "seed": 0,
              "max_steps": None, "inner_steps": 1, "accumulate": 1, "temperature": 1.0,
              "max_tokens": 16, "mode": "full"},
    "eval": {"game": None, "pool": None, "matches": None, "seed": 0, "out": None, "workers": 1,
             "variant": None, "opponent": None, "side": None, "tie_rule": "random",
             "standard_tie": False},
    "measure": {"instance": None, "index": 0, "candidate": None, "measurer": None, "mode": "full"},
    "toy-init": {"dataset": None, "vocab_size": 64, "out": None, "scale": 0.0, "seed": 0,
                 "context_window": 4},
}


class UsageError(Exception):
    pass


class MissingArtifact(Exception):
    pass


def _engine_config(cfg: Mapping) -> dict:
    if cfg["game"] == "werewolf":
        return {"tie_rule": cfg["tie_rule"]}
    if cfg["game"] == "onuw":
        return {"standard_tie": bool(cfg["standard_tie"])}
    return {}


def _need(path, what: str) -> Path:
    if path is None:
        raise UsageError(f"missing required {what}")
    p = Path(path)
    if not p.is_file():
        raise MissingArtifact(f"{what} not found: {p}")
    return p


def _write_meta(out: Path, command: str, cfg: Mapping, extra: Mapping | None = None):
    meta = {"command": command, "config": dict(cfg), **(extra or {})}
    Path(str(out) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _pool_seats(pool: list[AgentSpec], game: str, seed: int) -> tuple[AgentSpec, ...]:
    n = seats(game)
    if len(pool) == n:
        return tuple(pool)
    rng = np.random.default_rng(seed)
    return tuple(pool[i] for i in rng.integers(len(pool), size=n))


# --- commands -----------------------------------------------------------------------
def cmd_play(cfg: dict) -> int:
    if cfg["game"] is None:
        raise UsageError("--game is required")
    pool = load_pool(_need(cfg["agents"], "agent pool file"))
    plan = MatchPlan(cfg["game"], _pool_seats(pool, cfg["game"], cfg["seed"]), cfg["seed"],
                     _engine_config(cfg))
    record = run_match(plan)
    if cfg["out"]:
        write_logs(cfg["out"], [record])
        _write_meta(Path(cfg["out"]), "play", cfg)
    if record["aborted"]:
        print(f"match aborted: {record['error'] or 'round cap reached'}")
        return 1 if record["error"] else 0
    out = record["outcome"]
    print(f"{cfg['game']} seed {cfg['seed']}: {out['winner']} wins after {out['rounds']} round(s)")
    return 0


def cmd_selfplay(cfg: dict) -> int:
    if cfg["game"] is None or cfg["out"] is None:
        raise UsageError("--game and --out are required")
    backends = DEFAULT_BACKENDS
    if cfg["backends"]:
        doc = json.loads(_need(cfg["backends"], "backend pool file").read_text())
        backends = doc["backends"] if isinstance(doc, Mapping) else doc
    logs = generate_selfplay(cfg["game"], cfg["count"], backends, cfg["seed"], _engine_config(cfg),
                             workers=cfg["workers"])
    write_logs(cfg["out"], logs)
    aborted = sum(l["aborted"] for l in logs)
    _write_meta(Path(cfg["out"]), "selfplay", cfg, {"backends": backends, "aborted": aborted})
    print(f"wrote {len(logs)} logs to {cfg['out']} ({aborted} aborted)")
    return 0


def cmd_extract(cfg: dict) -> int:
    if cfg["out"] is None:
        raise UsageError("--out is required")
    logs = read_logs(_need(cfg["logs"], "game log file"))
    data = extract_dataset(logs, cfg["sample"], cfg["seed"])
    write_dataset(cfg["out"], data)
    _write_meta(Path(cfg["out"]), "extract", cfg)
    print(f"wrote {len(data)} instances to {cfg['out']}")
    return 0


def cmd_train(cfg: dict) -> int:
    if cfg["out"] is None:
        raise UsageError("--out is required")
    data = read_dataset(_need(cfg["dataset"], "dataset file"))
    m_params, _ = load_checkpoint(_need(cfg["measurer"], "measurer checkpoint"))
    if cfg["refiner"]:
        r_params, _ = load_checkpoint(_need(cfg["refiner"], "refiner checkpoint"))
    else:
        r_params = ToyPolicyParams.zeros(m_params.vocab, m_params.context_window)
    keys = grpo.TrainerConfig.__dataclass_fields__
    tc = grpo.TrainerConfig(**{k: cfg[k] for k in keys})
    res = grpo.train(data, ToyPolicy(m_params, "measurer"), r_params, tc, metrics_path=cfg["metrics"])
    grpo.save_trained(cfg["out"], res, tc, {"run": cfg, "skipped": res.skipped})
    if cfg["metrics"]:
        _write_meta(Path(cfg["metrics"]), "train", cfg)
    last = res.trace[-1] if res.trace else {}
    print(f"trained {res.steps} step(s), skipped {res.skipped}; "
          f"final mean reward {last.get('mean_reward', float('nan')):.4f}, kl {last.get('kl', 0.0):.4f}")
    return 0


def cmd_eval(cfg: dict) -> int:
    if cfg["game"] is None:
        raise UsageError("--game is required")
    pool = load_pool(_need(cfg["pool"], "agent pool file"))
    team_mode = cfg["variant"] is not None or cfg["opponent"] is not None or cfg["side"] is not None
    if team_mode:
        if None in (cfg["variant"], cfg["opponent"], cfg["side"]):
            raise UsageError("--variant, --opponent and --side go together")
        by_id = {a.id: a for a in pool}
        for k in ("variant", "opponent"):
            if cfg[k] not in by_id:
                raise UsageError(f"agent {cfg[k]!r} is not in the pool")
        matches = cfg["matches"] if cfg["matches"] is not None else DEFAULT_TEAM_EVAL_MATCHES
        res = run_team_eval(by_id[cfg["variant"]], by_id[cfg["opponent"]], cfg["game"], cfg["side"],
                            matches, cfg["seed"], _engine_config(cfg), cfg["workers"])
        doc = {**res.to_dict(), "config": cfg}
        if cfg["out"]:
            Path(cfg["out"]).write_text(json.dumps(doc, indent=2) + "\n")
        print(f"{res.variant} on {res.side}: {res.wins}/{res.matches} wins "
              f"({100 * res.win_rate:.1f}%), {res.aborted} aborted")
        return 0
    matches = cfg["matches"] if cfg["matches"] is not None else DEFAULT_MATCHES
    report = run_tournament(pool, cfg["game"], matches, cfg["seed"], _engine_config(cfg), cfg["workers"])
    report.config = {**report.config, "run": cfg}
    if cfg["out"]:
        write_report(cfg["out"], report)
    print(report.render())
    return 0


def _load_instance(path: Path, index: int) -> TrainingInstance:
    text = path.read_text()
    try:
        return TrainingInstance.from_dict(json.loads(text))
    except json.JSONDecodeError:
        lines = [l for l in text.splitlines() if l.strip()]
        if not 0 <= index < len(lines):
            raise UsageError(f"--index {index} out of range for {len(lines)} instances") from None
        return TrainingInstance.from_dict(json.loads(lines[index]))


def cmd_measure(cfg: dict) -> int:
    if cfg["candidate"] is None:
        raise UsageError("--candidate is required")
    inst = _load_instance(_need(cfg["instance"], "instance file"), cfg["index"])
    params, _ = load_checkpoint(_need(cfg["measurer"], "measurer checkpoint"))
    measurer = ToyPolicy(params, "measurer")
    if cfg["mode"] == "all":
        for mode, value in all_modes(cfg["candidate"], inst.intent, inst.context, measurer).items():
            print(f"{mode}\t{value!r}")
    else:
        print(repr(measure_reward(cfg["candidate"], inst.intent, inst.context, measurer, cfg["mode"])))
    return 0


def cmd_toy_init(cfg: dict) -> int:
    """Toy checkpoint whose vocabulary is the most frequent words of a dataset."""
    if cfg["out"] is None:
        raise UsageError("--out is required")
    data = read_dataset(_need(cfg["dataset"], "dataset file"))
    counts: Counter[str] = Counter()
    for inst in data:
        for text in (inst.base, inst.intent.desired, inst.intent.undesired):
            counts.update(text.lower().split())
    counts.pop(UNK, None)
    counts.pop(EOS, None)
    words = [w for w, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]
    vocab = [UNK, EOS] + words[: max(cfg["vocab_size"] - 2, 0)]
    rng = np.random.default_rng(cfg["seed"])
    params = (ToyPolicyParams.random(vocab, rng, cfg["scale"], cfg["context_window"]) if cfg["scale"] > 0
              else ToyPolicyParams.zeros(vocab, cfg["context_window"]))
    save_checkpoint(cfg["out"], params, {"run": cfg})
    print(f"wrote toy checkpoint with {len(vocab)} tokens to {cfg['out']}")
    return 0


COMMANDS = {"play": cmd_play, "selfplay": cmd_selfplay, "extract": cmd_extract, "train": cmd_train,
            "eval": cmd_eval, "measure": cmd_measure, "toy-init": cmd_toy_init}


# --- parser -------------------------------------------------------------------------
def _engine_flags(p):
    p.add_argument("--tie-rule", choices=["random", "no-elimination"],
                   help="Werewolf day-vote tie rule (default random)")
    p.add_argument("--standard-tie", action="store_const", const=True,
                   help="ONUW: nobody is eliminated when every player gets one vote")


def build_parser() -> argparse.ArgumentParser:
    games = sorted(ENGINES)
    parser = argparse.ArgumentParser(prog="sdg", description="Persuasion training toolkit for social deduction games.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="JSON file of settings; flags override it")
        return p

    p = add("play", "Run one match and write its game log.")
    p.add_argument("--game", choices=games, help="game to play")
    p.add_argument("--agents", help="agent pool JSON; one agent per seat, or sampled per seat")
    p.add_argument("--seed", type=int, help="match seed (default 0)")
    p.add_argument("--out", help="game log output (line-delimited JSON)")
    _engine_flags(p)

    p = add("selfplay", "Generate self-play game logs with vanilla agents.")
    p.add_argument("--game", choices=games, help="game to play")
    p.add_argument("--count", type=int, help=f"number of matches (default {DEFAULT_LOGS})")
    p.add_argument("--backends", help="JSON list of backend bindings (default: three stub backends)")
    p.add_argument("--seed", type=int, help="generation seed (default 0)")
    p.add_argument("--out", help="game log output (line-delimited JSON)")
    p.add_argument("--workers", type=int, help="parallel match workers (default 1)")
    _engine_flags(p)

    p = add("extract", "Sample training instances from game logs.")
    p.add_argument("--logs", help="game log file")
    p.add_argument("--sample", type=int, help=f"instances to draw (default {DEFAULT_SAMPLE})")
    p.add_argument("--seed", type=int, help="sampling seed (default 0)")
    p.add_argument("--out", help="dataset output (line-delimited JSON)")

    p = add("train", "Train the toy refiner with group relative policy optimization.")
    p.add_argument("--dataset", help="dataset file from extract")
    p.add_argument("--measurer", help="toy measurer checkpoint (frozen)")
    p.add_argument("--refiner", help="initial refiner checkpoint (default: zeros over the measurer vocabulary)")
    p.add_argument("--out", help="trained refiner checkpoint")
    p.add_argument("--metrics", help="per-step metrics output (line-delimited JSON)")
    p.add_argument("--n", type=int, help="group size (default 8)")
    p.add_argument("--epsilon", type=float, help="clip range (default 0.2)")
    p.add_argument("--beta", type=float, help="KL weight (default 0.04)")
    p.add_argument("--lr", type=float, help="learning rate (default 1e-6)")
    p.add_argument("--epochs", type=int, help="passes over the dataset (default 3)")
    p.add_argument("--seed", type=int, help="training seed (default 0)")
    p.add_argument("--max-steps", type=int, help="stop after this many updates")
    p.add_argument("--inner-steps", type=int, help="gradient steps per sampled group (default 1)")
    p.add_argument("--accumulate", type=int, help="groups per parameter update (default 1)")
    p.add_argument("--temperature", type=float, help="sampling temperature (default 1.0)")
    p.add_argument("--max-tokens", type=int, help="candidate length limit (default 16)")
    p.add_argument("--mode", choices=[m.value for m in RewardMode], help="reward mode (default full)")

    p = add("eval", "Run a tournament over an agent pool, or a same-team evaluation.")
    p.add_argument("--game", choices=games, help="game to play")
    p.add_argument("--pool", help="agent pool JSON")
    p.add_argument("--matches", type=int,
                   help=f"matches (default {DEFAULT_MATCHES}; {DEFAULT_TEAM_EVAL_MATCHES} in team mode)")
    p.add_argument("--seed", type=int, help="tournament seed (default 0)")
    p.add_argument("--out", help="report output (JSON with a rendered table)")
    p.add_argument("--workers", type=int, help="parallel match workers (default 1)")
    p.add_argument("--variant", help="team mode: agent id playing the chosen side")
    p.add_argument("--opponent", help="team mode: agent id playing the other side")
    p.add_argument("--side", choices=["village", "werewolf", "good", "evil"], help="team mode: side of the variant")
    _engine_flags(p)

    p = add("measure", "Print the follower reward of one candidate utterance.")
    p.add_argument("--instance", help="instance JSON, or a dataset file with --index")
    p.add_argument("--index", type=int, help="line of the dataset file (default 0)")
    p.add_argument("--candidate", help="candidate utterance")
    p.add_argument("--measurer", help="toy measurer checkpoint")
    p.add_argument("--mode", choices=[m.value for m in RewardMode] + ["all"], help="reward mode (default full)")

    p = add("toy-init", "Write a toy checkpoint with a vocabulary taken from a dataset.")
    p.add_argument("--dataset", help="dataset file")
    p.add_argument("--vocab-size", type=int, help="tokens including <unk> and <eos> (default 64)")
    p.add_argument("--context-window", type=int, help="positional context length (default 4)")
    p.add_argument("--scale", type=float, help="std of random initial weights (default 0: zeros)")
    p.add_argument("--seed", type=int, help="seed for random weights (default 0)")
    p.add_argument("--out", help="checkpoint output")
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
        doc = doc.get(command, doc) if isinstance(doc, dict) else doc
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(doc) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
        cfg.update(doc)
    for k in cfg:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if "game" in cfg and cfg["game"] is not None and cfg["game"] not in ENGINES:
        raise UsageError(f"unknown game {cfg['game']!r}")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args.command, args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"sdg {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except MissingArtifact as exc:
        print(f"sdg {args.command}: {exc}", file=sys.stderr)
        return 1
    except (SampleExceedsPool, ValueError, KeyError, OSError) as exc:
        print(f"sdg {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
