import itertools
import json
import math

import httpx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from persuade_sdg.policy import (
    EOS,
    UNK,
    AuthError,
    CannedPolicy,
    ChatPrompt,
    GenerationSettings,
    RemoteChatPolicy,
    RemoteEndpoint,
    RemoteError,
    RetryExhausted,
    StubBackend,
    Tokenizer,
    ToyPolicy,
    ToyPolicyParams,
    UnsupportedCapability,
    load_checkpoint,
    next_token_distribution,
    remote_generate,
    save_checkpoint,
    score_tokens,
)
from oracles import oracle_joint
from persuade_sdg.policy.toy import logprob_gradient_tokens

VOCAB4 = (UNK, EOS, "a", "b")


# --- tokenizer ---------------------------------------------------------------------
def test_tokenizer_lowercases_and_maps_unknowns():
    tok = Tokenizer(VOCAB4 + ("vote",))
    assert tok.tokenize("A  b\tVOTE zebra") == [2, 3, 4, 0]
    assert tok.tokenize("<eos>") == [0]


def test_vocabulary_must_reserve_tokens():
    with pytest.raises(ValueError):
        Tokenizer(("a", "b"))
    with pytest.raises(ValueError):
        Tokenizer((UNK, EOS, "a", "a"))


@given(st.lists(st.sampled_from(["a", "b", "vote", "yes"]), max_size=12))
def test_tokenizer_round_trip(words):
    tok = Tokenizer(VOCAB4 + ("vote", "yes"))
    text = " ".join(words)
    assert tok.detokenize(tok.tokenize(text)) == text


# --- scoring -----------------------------------------------------------------------
def test_zero_weights_are_uniform():
    p = ToyPolicyParams.zeros(VOCAB4)
    assert np.allclose(next_token_distribution(p, [2, 3]), 0.25)


def test_uniform_three_token_score():
    pol = ToyPolicy(ToyPolicyParams.zeros(VOCAB4))
    s = pol.score(ChatPrompt.of(("user", "a b")), "a b a")
    assert s.total == pytest.approx(3 * math.log(1 / 4), abs=1e-12)
    assert s.total == pytest.approx(-4.1589, abs=1e-4)


def test_empty_target_scores_zero():
    pol = ToyPolicy(ToyPolicyParams.random(VOCAB4, np.random.default_rng(0)))
    assert pol.score(ChatPrompt.of(("user", "a")), "").total == 0.0


@pytest.mark.parametrize("V", [3, 4])
def test_score_matches_enumeration(V):
    rng = np.random.default_rng(V)
    vocab = VOCAB4[:V]
    for _ in range(10):
        params = ToyPolicyParams.random(vocab, rng, scale=1.5, context_window=int(rng.integers(1, 5)))
        context = [int(t) for t in rng.integers(0, V, size=int(rng.integers(0, 4)))]
        joint = {seq: oracle_joint(params, context, seq) for seq in itertools.product(range(V), repeat=3)}
        assert sum(joint.values()) == pytest.approx(1.0, abs=1e-9)
        for L in (1, 2, 3):
            target = [int(t) for t in rng.integers(0, V, size=L)]
            marginal = sum(p for seq, p in joint.items() if list(seq[:L]) == target)
            assert math.exp(score_tokens(params, context, target).total) == pytest.approx(marginal, abs=1e-9)


def test_length_four_mass_sums_to_one():
    params = ToyPolicyParams.random(VOCAB4, np.random.default_rng(5))
    total = sum(math.exp(score_tokens(params, [2], list(seq)).total)
                for seq in itertools.product(range(4), repeat=4))
    assert total == pytest.approx(1.0, abs=1e-9)


def test_eos_absorbing_distribution_sums_to_one():
    # sequences stop at the first <eos> or after L tokens
    params = ToyPolicyParams.random(VOCAB4, np.random.default_rng(6))
    L, eos = 4, 1
    total = 0.0
    for n in range(1, L + 1):
        for body in itertools.product([0, 2, 3], repeat=n - 1):
            total += math.exp(score_tokens(params, [3], list(body) + [eos]).total)
    for body in itertools.product([0, 2, 3], repeat=L):
        total += math.exp(score_tokens(params, [3], list(body)).total)
    assert total == pytest.approx(1.0, abs=1e-9)


def test_generation_only_policy_cannot_score():
    pol = RemoteChatPolicy(RemoteEndpoint("http://x", "m", api_key="k"))
    with pytest.raises(UnsupportedCapability):
        pol.score(ChatPrompt.of(("user", "hi")), "there")


# --- gradient ----------------------------------------------------------------------
def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    h = 1e-5
    worst = 0.0
    for _ in range(20):
        params = ToyPolicyParams.random(VOCAB4 + ("c",), rng, context_window=2)
        ctx = [int(t) for t in rng.integers(0, 5, size=3)]
        tgt = [int(t) for t in rng.integers(0, 5, size=3)]
        g = logprob_gradient_tokens(params, ctx, tgt)
        num = np.zeros_like(g)
        for idx in np.ndindex(g.shape):
            w = params.weights[idx]
            params.weights[idx] = w + h
            up = score_tokens(params, ctx, tgt).total
            params.weights[idx] = w - h
            down = score_tokens(params, ctx, tgt).total
            params.weights[idx] = w
            num[idx] = (up - down) / (2 * h)
        worst = max(worst, np.abs(g - num).max() / max(np.abs(num).max(), 1e-8))
    assert worst < 1e-4


def test_expected_score_gradient_vanishes():
    # targets drawn from the policy itself: E[grad log p] = 0
    rng = np.random.default_rng(2)
    params = ToyPolicyParams.random(VOCAB4, rng, scale=0.7, context_window=2)
    pol = ToyPolicy(params)
    ctx = [2, 3]
    exact = np.zeros_like(params.weights)
    second = np.zeros_like(params.weights)
    for seq in itertools.product(range(4), repeat=2):
        p = math.exp(score_tokens(params, ctx, list(seq)).total)
        g = logprob_gradient_tokens(params, ctx, list(seq))
        exact += p * g
        second += p * g * g
    assert np.abs(exact).max() < 1e-12
    n = 4000
    mean = sum(logprob_gradient_tokens(params, ctx, pol.sample_tokens(ctx, 2, rng, stop_at_eos=False))
               for _ in range(n)) / n
    sigma = np.sqrt(second / n)
    assert np.all(np.abs(mean) <= 3 * sigma + 1e-12)


def test_empty_target_zero_gradient():
    params = ToyPolicyParams.random(VOCAB4, np.random.default_rng(0))
    assert not logprob_gradient_tokens(params, [2], []).any()


# --- generation --------------------------------------------------------------------
def test_sampling_frequencies_match_scores():
    rng = np.random.default_rng(9)
    vocab = VOCAB4[:3] + ("b",)
    params = ToyPolicyParams.random(vocab[:3], rng, scale=1.0)
    pol = ToyPolicy(params)
    counts = {}
    n = 50_000
    for _ in range(n):
        seq = tuple(pol.sample_tokens([2], 2, rng, stop_at_eos=False))
        counts[seq] = counts.get(seq, 0) + 1
    for seq in itertools.product(range(3), repeat=2):
        expected = math.exp(score_tokens(params, [2], list(seq)).total)
        assert abs(counts.get(seq, 0) / n - expected) <= 0.01


def test_generation_is_seeded():
    pol = ToyPolicy(ToyPolicyParams.random(VOCAB4, np.random.default_rng(1)))
    prompt = ChatPrompt.of(("user", "a b"))
    a = pol.generate(prompt, GenerationSettings(1.0, 8, np.random.default_rng(4)))
    b = pol.generate(prompt, GenerationSettings(1.0, 8, np.random.default_rng(4)))
    assert a == b


def test_cold_sampling_is_argmax():
    params = ToyPolicyParams.random(VOCAB4, np.random.default_rng(3), scale=2.0)
    pol = ToyPolicy(params)
    ctx = [2]
    greedy = []
    for _ in range(5):
        tok = int(np.argmax(next_token_distribution(params, ctx + greedy)))
        greedy.append(tok)
        if tok == 1:
            break
    got = pol.sample_tokens(ctx, 5, np.random.default_rng(0), temperature=1e-6)
    assert got == greedy


def test_truncation_flag():
    vocab = VOCAB4
    params = ToyPolicyParams.zeros(vocab)
    params.weights[params.feature_index(bias=True), 1] = -50.0  # never end
    g = ToyPolicy(params).generate(ChatPrompt.of(("user", "a")), GenerationSettings(1.0, 3, np.random.default_rng(0)))
    assert g.truncated and len(g.tokens) == 3


def test_checkpoint_round_trip(tmp_path):
    params = ToyPolicyParams.random(VOCAB4, np.random.default_rng(0), context_window=3)
    save_checkpoint(tmp_path / "c.json", params, {"note": "x"})
    back, cfg = load_checkpoint(tmp_path / "c.json")
    assert back.vocab == params.vocab and back.context_window == 3
    assert np.array_equal(back.weights, params.weights) and cfg == {"note": "x"}


def test_checkpoint_rejects_other_files(tmp_path):
    (tmp_path / "x.json").write_text(json.dumps({"format": "other"}))
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "x.json")


def test_weight_shape_checked():
    with pytest.raises(ValueError):
        ToyPolicyParams(VOCAB4, np.zeros((3, 4)))


# --- offline backends --------------------------------------------------------------
def test_stub_backend_is_deterministic():
    prompt = ChatPrompt.of(("system", "Your are (Player 2)"), ("user", "talk to the next player (Player 3)"))
    a = StubBackend("s").generate(prompt, GenerationSettings())
    b = StubBackend("s").generate(prompt, GenerationSettings())
    assert a == b and a.text.startswith("Response: ")


def test_canned_policy_cycles_and_records():
    pol = CannedPolicy(["one", "two"])
    p = ChatPrompt.of(("user", "x"))
    assert [pol.generate(p, GenerationSettings()).text for _ in range(3)] == ["one", "two", "one"]
    assert len(pol.calls) == 3


# --- remote client -----------------------------------------------------------------
def _client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def _endpoint(**kw):
    base = dict(base_url="http://llm.test/v1", model="m1", api_key="secret", max_retries=2, backoff=0.0)
    base.update(kw)
    return RemoteEndpoint(**base)


PROMPT = ChatPrompt.of(("system", "rules"), ("user", "speak"))


def test_remote_echo_and_request_shape():
    seen = {}

    def handler(req):
        seen["url"] = str(req.url)
        seen["auth"] = req.headers["authorization"]
        seen["body"] = json.loads(req.content)
        return httpx.Response(200, json={"choices": [{"message": {"content": "Response: hello"}}]})

    out = remote_generate(_endpoint(), PROMPT, GenerationSettings(0.7, 32), _client(handler))
    assert out == "Response: hello"
    assert seen["url"] == "http://llm.test/v1/chat/completions"
    assert seen["auth"] == "Bearer secret"
    assert seen["body"] == {"model": "m1", "temperature": 0.7, "max_tokens": 32,
                            "messages": [{"role": "system", "content": "rules"},
                                         {"role": "user", "content": "speak"}]}


def test_missing_credential_fails_before_network(monkeypatch):
    monkeypatch.delenv("SDG_API_KEY", raising=False)
    calls = []

    def handler(req):
        calls.append(req)
        return httpx.Response(200)

    with pytest.raises(AuthError):
        remote_generate(_endpoint(api_key=None), PROMPT, GenerationSettings(), _client(handler))
    assert calls == []


def test_credential_from_environment(monkeypatch):
    monkeypatch.setenv("SDG_API_KEY", "envkey")

    def handler(req):
        assert req.headers["authorization"] == "Bearer envkey"
        return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

    pol = RemoteChatPolicy(_endpoint(api_key=None), client=_client(handler))
    assert pol.generate(PROMPT, GenerationSettings()).text == "ok"


@pytest.mark.parametrize("status,category", [(500, "server"), (503, "server"), (429, "rate_limit")])
def test_retryable_statuses_exhaust(status, category):
    calls = []

    def handler(req):
        calls.append(req)
        return httpx.Response(status, text="busy")

    with pytest.raises(RetryExhausted) as info:
        remote_generate(_endpoint(), PROMPT, GenerationSettings(), _client(handler))
    assert len(calls) == 3 and info.value.attempts == 3
    assert info.value.category == category and info.value.status == status


def test_retry_then_success():
    replies = iter([httpx.Response(502), httpx.Response(200, json={"choices": [{"message": {"content": "late"}}]})])
    out = remote_generate(_endpoint(), PROMPT, GenerationSettings(), _client(lambda req: next(replies)))
    assert out == "late"


def test_network_failure_category():
    def handler(req):
        raise httpx.ConnectError("refused", request=req)

    with pytest.raises(RetryExhausted) as info:
        remote_generate(_endpoint(max_retries=1), PROMPT, GenerationSettings(), _client(handler))
    assert info.value.category == "network" and info.value.attempts == 2


@pytest.mark.parametrize("resp,exc,category", [
    (httpx.Response(401), AuthError, "auth"),
    (httpx.Response(400, text="bad"), RemoteError, "client"),
    (httpx.Response(200, json={"nope": 1}), RemoteError, "protocol"),
])
def test_non_retryable_failures(resp, exc, category):
    calls = []

    def handler(req):
        calls.append(req)
        return resp

    with pytest.raises(exc) as info:
        remote_generate(_endpoint(), PROMPT, GenerationSettings(), _client(handler))
    assert info.value.category == category and len(calls) == 1


def test_audit_log(tmp_path):
    path = tmp_path / "audit.jsonl"

    def handler(req):
        return httpx.Response(200, json={"choices": [{"message": {"content": "hi"}}]})

    remote_generate(_endpoint(audit_path=str(path)), PROMPT, GenerationSettings(), _client(handler))
    rec = json.loads(path.read_text())
    assert rec["status"] == 200 and rec["request"]["model"] == "m1"
