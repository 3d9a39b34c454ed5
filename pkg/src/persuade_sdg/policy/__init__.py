"""Text policies: the toy log-linear model, offline stubs and the remote chat client."""
from .base import (
    ChatMessage,
    ChatPrompt,
    Generation,
    GenerationSettings,
    Policy,
    PolicyError,
    ScoredSequence,
    UnsupportedCapability,
)
from .remote import (
    API_KEY_ENV,
    AuthError,
    RemoteChatPolicy,
    RemoteEndpoint,
    RemoteError,
    RetryExhausted,
    remote_generate,
)
from .stub import CannedPolicy, StubBackend
from .toy import (
    EOS,
    UNK,
    Tokenizer,
    ToyPolicy,
    ToyPolicyParams,
    load_checkpoint,
    logprob_gradient_tokens,
    next_token_distribution,
    save_checkpoint,
    score_tokens,
    step_features,
)


def generate(policy: Policy, prompt: ChatPrompt, settings: GenerationSettings) -> Generation:
    return policy.generate(prompt, settings)


def score(policy: Policy, prompt: ChatPrompt, target: str) -> ScoredSequence:
    return policy.score(prompt, target)


def logprob_gradient(params: ToyPolicyParams, prompt: ChatPrompt, target: str):
    return ToyPolicy(params).logprob_gradient(prompt, target)
