"""Independent reference computations the package is checked against."""
import numpy as np

from persuade_sdg.grpo import GroupBatch, PolicyTriple, advantages, objective
from persuade_sdg.policy import ChatPrompt, ToyPolicyParams


def oracle_phi(vocab_size, window, seq):
    """Feature vector of the toy model, written out from its definition."""
    V = vocab_size
    f = np.zeros((window + 1) * V + 1)
    for pos, tok in enumerate(reversed(seq[-window:] if window else [])):
        f[pos * V + tok] = 1.0
    for tok in set(seq):
        f[window * V + tok] = 1.0
    f[-1] = 1.0
    return f


def oracle_next(params, seq):
    z = oracle_phi(params.V, params.context_window, list(seq)) @ params.weights
    e = np.exp(z - z.max())
    return e / e.sum()


def oracle_joint(params, context, seq):
    """Probability of ``seq`` after ``context`` as a plain product of softmaxes."""
    p = 1.0
    for j, tok in enumerate(seq):
        p *= oracle_next(params, list(context) + list(seq[:j]))[tok]
    return p


def random_batch(rng, vocab=("<unk>", "<eos>", "a", "b", "c"), perturb=0.3, n=4):
    """A group with current != old != ref, for objective and gradient checks."""
    old = ToyPolicyParams.random(vocab, rng, context_window=2)
    cur = old.copy()
    cur.weights += rng.normal(0, perturb, cur.weights.shape)
    ref = ToyPolicyParams.random(vocab, rng, context_window=2)
    triple = PolicyTriple(cur, old, ref)
    words = list(vocab[2:])
    cands = [" ".join(rng.choice(words, size=int(rng.integers(1, 4)))) for _ in range(n)]
    adv = advantages(rng.normal(size=n))
    return triple, GroupBatch.build(triple, ChatPrompt.of(("user", " ".join(words[:2]))), cands, adv)


def fd_objective_grad(batch, triple, cfg, h=1e-5):
    """Central differences of J over every weight."""
    W = triple.current.weights
    num = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        w = W[idx]
        W[idx] = w + h
        up = objective(batch, triple, cfg).value
        W[idx] = w - h
        down = objective(batch, triple, cfg).value
        W[idx] = w
        num[idx] = (up - down) / (2 * h)
    return num
