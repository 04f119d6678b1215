"""Log-prob providers: an OpenAI-compatible HTTP client and deterministic mocks."""

import logging
import math
import os
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Mapping, Optional, Sequence

import httpx

from src.core.config import ModelSpec
from src.core.exceptions import (
    AuthError,
    ConfigurationError,
    ProviderError,
    RateLimitError,
    TransientProviderError,
)
from src.human.distribution import OpinionDistribution
from src.probe.prompts import parse_prompt
from src.survey.schema import GroupRef, Question

logger = logging.getLogger(__name__)

# Mock log-probs are floored so every returned entry stays finite.
MOCK_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class CompletionRequest:
    """A single next-token query."""

    prompt: str
    top_k: int
    params: Dict[str, Any] = field(default_factory=dict)


class RateLimiter:
    """Minimum-interval limiter shared by all worker threads.

    Each caller reserves the next free send slot under the lock and sleeps
    outside it, so requests leave at most ``requests_per_second`` apart with
    no burst allowance.
    """

    def __init__(self, requests_per_second: float = 0.0):
        self.min_interval = 1.0 / requests_per_second if requests_per_second > 0 else 0.0
        self.next_slot = 0.0
        self._lock = threading.Lock()

    def reserve(self) -> float:
        """Claim the next send slot and return how long to wait for it."""
        with self._lock:
            now = time.monotonic()
            slot = max(now, self.next_slot)
            self.next_slot = slot + self.min_interval
            return slot - now

    def acquire(self) -> None:
        """Block until another request may be sent."""
        if not self.min_interval:
            return
        wait_time = self.reserve()
        if wait_time > 0:
            time.sleep(wait_time)


class BaseProvider(ABC):
    """Abstract base class for log-prob providers.

    ``complete`` returns the raw top-k map of token -> log-prob for the next
    token after the prompt.
    """

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.rate_limiter = RateLimiter(spec.requests_per_second)
        self.calls = 0
        self._calls_lock = threading.Lock()

    @property
    def model_id(self) -> str:
        return self.spec.model_id

    @property
    def top_k(self) -> int:
        return self.spec.top_k

    def token_for(self, label: str) -> str:
        return self.spec.label_token.format(label=label)

    def cache_params(self) -> Dict[str, Any]:
        """Everything besides model and prompt that changes the answer."""
        return {
            "provider": self.spec.provider,
            "base_url": self.spec.base_url,
            "label_token": self.spec.label_token,
            "params": self.spec.params,
        }

    def request(self, prompt: str) -> CompletionRequest:
        return CompletionRequest(prompt=prompt, top_k=self.top_k, params=dict(self.spec.params))

    def query(self, request: CompletionRequest) -> Dict[str, float]:
        """Rate-limited, counted call to ``complete``."""
        self.rate_limiter.acquire()
        with self._calls_lock:
            self.calls += 1
        return self.complete(request)

    @abstractmethod
    def complete(self, request: CompletionRequest) -> Dict[str, float]:
        """Return token -> log-prob for the top-k next tokens."""
        pass

    def close(self) -> None:
        pass


class OpenAICompletionsProvider(BaseProvider):
    """Legacy ``/completions`` endpoint of an OpenAI-compatible server."""

    def __init__(self, spec: ModelSpec, client: Optional[httpx.Client] = None):
        super().__init__(spec)
        if not spec.base_url:
            raise ConfigurationError(f"Model {spec.name}: base_url is required for the HTTP provider")
        self._client = client
        self._owns_client = client is None

    def _get_client(self) -> httpx.Client:
        if self._client is None:
            api_key = os.environ.get(self.spec.api_key_env or "")
            if not api_key:
                raise AuthError(
                    f"Environment variable {self.spec.api_key_env} is not set",
                    model_id=self.model_id,
                )
            self._client = httpx.Client(
                base_url=self.spec.base_url,
                timeout=self.spec.timeout,
                headers={"Authorization": f"Bearer {api_key}"},
            )
        return self._client

    def complete(self, request: CompletionRequest) -> Dict[str, float]:
        payload = {
            "model": self.model_id,
            "prompt": request.prompt,
            "max_tokens": 1,
            "temperature": 0,
            "logprobs": request.top_k,
            **request.params,
        }
        try:
            response = self._get_client().post("/completions", json=payload)
        except httpx.TransportError as e:
            raise TransientProviderError(f"Transport failure: {e}", model_id=self.model_id)
        except httpx.HTTPError as e:
            raise ProviderError(f"HTTP failure: {e}", model_id=self.model_id)

        status = response.status_code
        if status in (401, 403):
            raise AuthError(f"Provider rejected credentials (HTTP {status})", model_id=self.model_id)
        if status == 429:
            raise RateLimitError("Provider rate limited the request", model_id=self.model_id)
        if status >= 500:
            raise TransientProviderError(f"Provider returned HTTP {status}", model_id=self.model_id)
        if status >= 400:
            raise ProviderError(f"Provider returned HTTP {status}: {response.text[:200]}",
                                model_id=self.model_id)

        try:
            top = response.json()["choices"][0]["logprobs"]["top_logprobs"][0]
            return {str(token): float(lp) for token, lp in top.items()}
        except (ValueError, KeyError, IndexError, TypeError, AttributeError, httpx.HTTPError) as e:
            raise ProviderError(f"Malformed completion response: {e}", model_id=self.model_id)

    def close(self) -> None:
        if self._client is not None and self._owns_client:
            self._client.close()
            self._client = None


class UniformProvider(BaseProvider):
    """Random-choice baseline: equal mass on every presented option."""

    def complete(self, request: CompletionRequest) -> Dict[str, float]:
        _, options = parse_prompt(request.prompt)
        if not options:
            raise ProviderError("Prompt lists no options", model_id=self.model_id)
        lp = -math.log(len(options))
        return {self.token_for(label): lp for label, _ in options}


class FixedMapProvider(BaseProvider):
    """Returns the ``logprobs`` map from the model params for every prompt."""

    def __init__(self, spec: ModelSpec):
        super().__init__(spec)
        fixed = spec.params.get("logprobs")
        if not isinstance(fixed, Mapping) or not fixed:
            raise ConfigurationError(f"Model {spec.name}: fixed provider needs params.logprobs")
        self.fixed = {str(k): float(v) for k, v in fixed.items()}

    def complete(self, request: CompletionRequest) -> Dict[str, float]:
        return dict(self.fixed)


class GroupMimicProvider(BaseProvider):
    """Answers with a human group's distribution, following option text.

    With ``triggers`` set, the group is only emulated when the prompt carries
    one of them (a steering context for that group); any other prompt gets
    uniform answers.
    """

    def __init__(
        self,
        spec: ModelSpec,
        questions: Sequence[Question],
        distributions: Mapping[str, OpinionDistribution],
        triggers: Sequence[str] = (),
    ):
        super().__init__(spec)
        self.questions = {q.text: q for q in questions}
        self.distributions = distributions
        self.triggers = tuple(triggers)

    def _triggered(self, prompt: str) -> bool:
        return not self.triggers or any(t in prompt for t in self.triggers)

    def complete(self, request: CompletionRequest) -> Dict[str, float]:
        question_text, options = parse_prompt(request.prompt)
        question = self.questions.get(question_text)
        if question is None or not options:
            raise ProviderError(f"Unknown question in prompt: {question_text[:60]!r}",
                                model_id=self.model_id)
        dist = self.distributions.get(question.qid)
        if dist is None or not self._triggered(request.prompt):
            lp = -math.log(len(options))
            return {self.token_for(label): lp for label, _ in options}

        refusal = dist.refusal_rate or 0.0
        by_text: Dict[str, float] = {
            option.text: (1.0 - refusal) * p for option, p in zip(question.choices, dist.probs)
        }
        if question.refusal is not None:
            by_text[question.refusal.text] = refusal
        return {
            self.token_for(label): math.log(max(by_text.get(text, 0.0), MOCK_PROB_FLOOR))
            for label, text in options
        }


class CacheOnlyProvider(BaseProvider):
    """Replays recorded answers; any cache miss is an error."""

    def complete(self, request: CompletionRequest) -> Dict[str, float]:
        raise ProviderError("Cache miss while replaying recorded probes", model_id=self.model_id)


GroupLookup = Callable[[Optional[GroupRef]], Mapping[str, OpinionDistribution]]
TriggerLookup = Callable[[GroupRef], Sequence[str]]


class ProviderFactory:
    """Factory for creating the provider each model spec asks for."""

    def __init__(
        self,
        questions: Sequence[Question] = (),
        group_distributions: Optional[GroupLookup] = None,
        steering_triggers: Optional[TriggerLookup] = None,
        cache_only: bool = False,
    ):
        self.questions = list(questions)
        self.group_distributions = group_distributions
        self.steering_triggers = steering_triggers
        self.cache_only = cache_only
        self._providers: Dict[str, BaseProvider] = {}

    def get_provider(self, spec: ModelSpec) -> BaseProvider:
        if spec.name not in self._providers:
            self._providers[spec.name] = self._create_provider(spec)
        return self._providers[spec.name]

    def _create_provider(self, spec: ModelSpec) -> BaseProvider:
        if self.cache_only:
            return CacheOnlyProvider(spec)
        if spec.provider == "openai":
            return OpenAICompletionsProvider(spec)
        if spec.provider == "uniform":
            return UniformProvider(spec)
        if spec.provider == "fixed":
            return FixedMapProvider(spec)
        if spec.provider == "group_mimic":
            return self._create_mimic(spec)
        raise ConfigurationError(f"Unknown provider: {spec.provider}")

    def _create_mimic(self, spec: ModelSpec) -> GroupMimicProvider:
        if self.group_distributions is None:
            raise ConfigurationError(f"Model {spec.name}: group_mimic needs human distributions")
        key = spec.params.get("group", "overall")
        group = None if key == "overall" else GroupRef.parse(key)
        triggers: Sequence[str] = ()
        if spec.params.get("steerable", False):
            if group is None or self.steering_triggers is None:
                raise ConfigurationError(f"Model {spec.name}: a steerable mimic needs a group")
            triggers = self.steering_triggers(group)
        return GroupMimicProvider(spec, self.questions, self.group_distributions(group), triggers)

    def close(self) -> None:
        for provider in self._providers.values():
            provider.close()
