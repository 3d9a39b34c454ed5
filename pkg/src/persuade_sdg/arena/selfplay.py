"""Self-play log generation and training-set extraction."""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from ..persuasion import TrainingInstance, instances_from_log
from .agents import AgentSpec, Framework, PolicyCache
from .match import MatchPlan, engine_class, run_match

DEFAULT_LOGS = 500
DEFAULT_SAMPLE = 4000


class SampleExceedsPool(ValueError):
    pass


def run_plans(plans: Sequence[MatchPlan], workers: int = 1) -> list[dict]:
    """Run plans in order; with ``workers > 1`` matches run in separate processes.
    Each match owns its engine, agents and random stream, so results do not
    depend on the worker count."""
    if workers <= 1 or len(plans) <= 1:
        cache = PolicyCache()
        return [run_match(p, cache) for p in plans]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(run_match, plans, chunksize=max(1, len(plans) // (4 * workers))))


def plan_selfplay(game: str, count: int, backends: Sequence[Mapping[str, Any]], seed: int,
                  config: Mapping[str, Any] | None = None) -> list[MatchPlan]:
    """Vanilla agents throughout, each seat's backend drawn uniformly from ``backends``."""
    if count < 0:
        raise ValueError("count must be non-negative")
    if not backends:
        raise ValueError("need at least one backend")
    n = engine_class(game).n_players
    rng = np.random.default_rng(seed)
    specs = [AgentSpec(f"vanilla:{b.get('name', b.get('model', i))}", Framework.VANILLA, backend=dict(b))
             for i, b in enumerate(backends)]
    plans = []
    for k in range(count):
        picks = rng.integers(len(specs), size=n)
        match_seed = int(rng.integers(2**31 - 1))
        plans.append(MatchPlan(game, tuple(specs[i] for i in picks), match_seed, dict(config or {}),
                               match_id=f"{game}-selfplay-{seed}-{k}", record_intents=True))
    return plans


def generate_selfplay(game: str, count: int, backends: Sequence[Mapping[str, Any]], seed: int,
                      config: Mapping[str, Any] | None = None, workers: int = 1) -> list[dict]:
    return run_plans(plan_selfplay(game, count, backends, seed, config), workers)


def instance_pool(logs: Iterable[Mapping]) -> tuple[list[TrainingInstance], int]:
    pool, skipped = [], 0
    for log in logs:
        if log.get("aborted"):
            continue
        got, s = instances_from_log(log)
        pool.extend(got)
        skipped += s
    return pool, skipped


def extract_dataset(logs: Iterable[Mapping], sample_size: int = DEFAULT_SAMPLE,
                    seed: int = 0) -> list[TrainingInstance]:
    """Uniform sample without replacement from every usable turn of the logs."""
    pool, _ = instance_pool(logs)
    if sample_size > len(pool):
        raise SampleExceedsPool(f"asked for {sample_size} instances but the logs hold {len(pool)}")
    idx = np.random.default_rng(seed).choice(len(pool), size=sample_size, replace=False)
    return [pool[int(i)] for i in idx]


def write_logs(path, logs: Iterable[Mapping]) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for log in logs:
            fh.write(json.dumps(log, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_logs(path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
