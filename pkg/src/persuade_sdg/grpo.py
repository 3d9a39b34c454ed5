"""Group relative policy optimization for the toy refiner.

Rewards within a group are standardized into advantages, each candidate gets a
sequence-level importance ratio against the snapshot taken when the group was
sampled, and the clipped surrogate is traded off against an exact KL to a
frozen reference.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .persuasion import (
    PersuasionError,
    RewardMode,
    TrainingInstance,
    measure_group,
    refine_prompt,
    sample_group,
)
from .policy.base import GenerationSettings, Policy, UnsupportedCapability
from .policy.toy import (
    ToyPolicy,
    ToyPolicyParams,
    _log_softmax,
    save_checkpoint,
    score_tokens,
    step_features,
)

logger = logging.getLogger(__name__)


class GroupTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class AdvantageGroup:
    rewards: np.ndarray
    mean: float
    std: float
    advantages: np.ndarray


def advantages(rewards: Sequence[float]) -> AdvantageGroup:
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1 or r.size < 2:
        raise GroupTooSmall("advantages need a group of at least two rewards")
    mu = float(r.mean())
    sigma = float(r.std())
    # equal rewards can still leave a roundoff std of ~1e-16
    if r.max() == r.min() or not np.isfinite(sigma):
        sigma = 0.0
        adv = np.zeros_like(r)
    else:
        adv = (r - mu) / sigma
    return AdvantageGroup(r, mu, sigma, adv)


def clipped_term(rho: float, A: float, eps: float) -> float:
    if not 0.0 < eps < 1.0:
        raise ValueError("clip range must lie in (0, 1)")
    return min(rho * A, float(np.clip(rho, 1.0 - eps, 1.0 + eps)) * A)


@dataclass
class PolicyTriple:
    """Parameters being trained, the snapshot that sampled the current group,
    and the reference fixed at the start of training."""

    current: ToyPolicyParams
    old: ToyPolicyParams
    ref: ToyPolicyParams

    @classmethod
    def start(cls, params: ToyPolicyParams) -> PolicyTriple:
        return cls(params.copy(), params.copy(), params.copy())

    def snapshot(self):
        self.old = self.current.copy()


def _require_toy(*policies):
    for p in policies:
        if not isinstance(p, ToyPolicyParams):
            raise UnsupportedCapability("exact ratios and KL need toy policy parameters")


def importance_ratio(triple: PolicyTriple, candidate: str, prompt) -> float:
    _require_toy(triple.current, triple.old)
    new = ToyPolicy(triple.current).score(prompt, candidate).total
    old = ToyPolicy(triple.old).score(prompt, candidate).total
    return float(np.exp(new - old))


def _step_rows(params: ToyPolicyParams, context: list[int], targets: Sequence[list[int]]) -> np.ndarray:
    rows = [step_features(params, context, t) for t in targets if t]
    return np.vstack(rows) if rows else np.zeros((0, params.n_features))


def _kl_rows(W: np.ndarray, W_ref: np.ndarray, phi: np.ndarray):
    logp = _log_softmax(phi @ W)
    logq = _log_softmax(phi @ W_ref)
    p = np.exp(logp)
    kl = (p * (logp - logq)).sum(axis=1)
    return kl, p, logp - logq


def kl_penalty(params: ToyPolicyParams, ref: ToyPolicyParams, context: list[int],
               targets: Sequence[list[int]]) -> float:
    """Exact KL(params || ref), averaged over every step context the targets visit."""
    _require_toy(params, ref)
    phi = _step_rows(params, context, targets)
    if len(phi) == 0:
        return 0.0
    kl, _, _ = _kl_rows(params.weights, ref.weights, phi)
    return float(max(kl.mean(), 0.0))


@dataclass
class GroupBatch:
    """A sampled group in token form, ready for the objective."""

    context: list[int]
    candidates: list[list[int]]
    advantages: np.ndarray
    old_logp: np.ndarray

    @classmethod
    def build(cls, triple: PolicyTriple, prompt, candidates: Sequence[str], adv) -> GroupBatch:
        pol = ToyPolicy(triple.old)
        ctx = pol.context_ids(prompt)
        toks = [pol.tokenizer.tokenize(c) for c in candidates]
        old = np.array([score_tokens(triple.old, ctx, t).total for t in toks])
        a = adv.advantages if isinstance(adv, AdvantageGroup) else np.asarray(adv, dtype=np.float64)
        return cls(ctx, toks, a, old)


@dataclass
class ObjectiveValue:
    value: float
    surrogate: float
    kl: float
    ratios: np.ndarray
    clip_fraction: float
    grad: np.ndarray | None = None


def objective(batch: GroupBatch, triple: PolicyTriple, config: TrainerConfig,
              with_grad: bool = False) -> ObjectiveValue:
    """J = mean of clipped terms minus beta times the exact KL to the reference."""
    P = triple.current
    eps, beta = config.epsilon, config.beta
    n = len(batch.candidates)
    grad = np.zeros_like(P.weights) if with_grad else None
    ratios = np.empty(n)
    terms = np.empty(n)
    clipped = 0
    for i, toks in enumerate(batch.candidates):
        A = float(batch.advantages[i])
        if toks:
            phi = step_features(P, batch.context, toks)
            logp = _log_softmax(phi @ P.weights)
            new = float(logp[np.arange(len(toks)), toks].sum())
        else:
            phi, logp, new = None, None, 0.0
        rho = float(np.exp(new - batch.old_logp[i]))
        ratios[i] = rho
        terms[i] = clipped_term(rho, A, eps)
        in_range = 1.0 - eps <= rho <= 1.0 + eps
        clipped += not in_range
        # the unclipped branch carries the gradient whenever it is the minimum
        if with_grad and toks and rho * A <= np.clip(rho, 1 - eps, 1 + eps) * A and A != 0.0:
            resid = -np.exp(logp)
            resid[np.arange(len(toks)), toks] += 1.0
            grad += (A * rho / n) * (phi.T @ resid)
    surrogate = float(terms.mean())
    kl = 0.0
    phi_all = _step_rows(P, batch.context, batch.candidates)
    if len(phi_all):
        kl_r, p, diff = _kl_rows(P.weights, triple.ref.weights, phi_all)
        kl = float(kl_r.mean())
        if with_grad and beta != 0.0:
            grad -= beta * (phi_all.T @ (p * (diff - kl_r[:, None]))) / len(phi_all)
    return ObjectiveValue(surrogate - beta * kl, surrogate, kl, ratios, clipped / n, grad)


@dataclass
class TrainerConfig:
    n: int = 8
    epsilon: float = 0.2
    beta: float = 0.04
    lr: float = 1e-6
    epochs: int = 3
    seed: int = 0
    max_steps: int | None = None
    inner_steps: int = 1
    accumulate: int = 1
    temperature: float = 1.0
    max_tokens: int = 16
    mode: str = RewardMode.FULL.value

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 1 or self.inner_steps < 1 or self.accumulate < 1:
            raise ValueError("epochs, inner_steps and accumulate must be at least 1")
        if self.max_steps is not None and self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        RewardMode(self.mode)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    params: ToyPolicyParams
    trace: list[dict] = field(default_factory=list)
    skipped: int = 0
    steps: int = 0


def train(dataset: Sequence[TrainingInstance], measurer: Policy, params: ToyPolicyParams,
          config: TrainerConfig, *, metrics_path=None,
          on_step: Callable[[dict], None] | None = None) -> TrainResult:
    """Ascend J over the dataset. The reference is the starting parameters.

    Each instance: snapshot, sample ``n`` refinements of its base utterance,
    score them with the frozen measurer, standardize, take ``inner_steps``
    gradient steps. Instances that fail are skipped and counted.
    """
    if not dataset:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(config.seed)
    triple = PolicyTriple.start(params)
    result = TrainResult(triple.current)
    metrics_fh = Path(metrics_path).open("w") if metrics_path else None
    pending: list[np.ndarray] = []
    try:
        for epoch in range(config.epochs):
            for idx in rng.permutation(len(dataset)):
                if config.max_steps is not None and result.steps >= config.max_steps:
                    return result
                inst = dataset[int(idx)]
                triple.snapshot()
                refiner = ToyPolicy(triple.old)
                settings = GenerationSettings(config.temperature, config.max_tokens, rng)
                try:
                    prompt = refine_prompt(inst.context, inst.base, refiner)
                    group = sample_group(inst.context, inst.base, refiner, config.n, settings)
                    measure_group(group, inst.intent, inst.context, measurer, config.mode)
                except (PersuasionError, ValueError) as exc:
                    logger.warning("skipping instance %d: %s", int(idx), exc)
                    result.skipped += 1
                    continue
                adv = advantages(group.rewards)
                batch = GroupBatch.build(triple, prompt, group.candidates, adv)
                before = objective(batch, triple, config, with_grad=True)
                for k in range(config.inner_steps):
                    ov = before if k == 0 else objective(batch, triple, config, with_grad=True)
                    pending.append(ov.grad)
                    if len(pending) >= config.accumulate:
                        triple.current.weights += config.lr * np.mean(pending, axis=0)
                        pending.clear()
                after = objective(batch, triple, config)
                result.steps += 1
                rec = {
                    "step": result.steps,
                    "epoch": epoch,
                    "instance": int(idx),
                    "mean_reward": float(np.mean(group.rewards)),
                    "kl": after.kl,
                    "clip_fraction": after.clip_fraction,
                    "objective": before.value,
                    "objective_after": after.value,
                }
                result.trace.append(rec)
                if metrics_fh:
                    metrics_fh.write(json.dumps(rec) + "\n")
                if on_step:
                    on_step(rec)
        return result
    finally:
        if metrics_fh:
            metrics_fh.close()


def save_trained(path, result: TrainResult, config: TrainerConfig, extra: dict | None = None):
    save_checkpoint(path, result.params, {"trainer": config.to_dict(), **(extra or {})})


def read_metrics(path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(l) for l in fh if l.strip()]


__all__ = [
    "GroupTooSmall", "AdvantageGroup", "advantages", "clipped_term", "PolicyTriple",
    "importance_ratio", "kl_penalty", "GroupBatch", "ObjectiveValue", "objective",
    "TrainerConfig", "TrainResult", "train", "save_trained", "read_metrics",
]
