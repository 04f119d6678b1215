"""Cached, retried log-prob queries."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping

from tenacity import Retrying, retry_if_exception_type, stop_after_attempt, wait_exponential

from src.core.config import RetryPolicy
from src.core.exceptions import ProviderError, RateLimitError, TransientProviderError
from src.probe.cache import ProbeCache, cache_key
from src.probe.prompts import PromptSpec
from src.probe.providers import BaseProvider

logger = logging.getLogger(__name__)

# Providers sometimes round log-probs of near-certain tokens slightly above 0.
LOGPROB_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ProbeResult:
    """A provider's top-k answer to one prompt.

    ``token_logprobs`` is the raw map as returned; ``logprobs`` re-keys the
    entries that match a presented option label (other labels are missing).
    """

    prompt_hash: str
    model_id: str
    logprobs: Dict[str, float]
    token_logprobs: Dict[str, float]
    returned_top_k: int
    from_cache: bool = field(default=False, compare=False)

    @property
    def assigned_mass(self) -> float:
        """Total probability of every returned entry."""
        return math.fsum(math.exp(lp) for lp in self.token_logprobs.values())


def _clean(raw: Mapping[str, float], model_id: str) -> Dict[str, float]:
    cleaned: Dict[str, float] = {}
    for token, value in raw.items():
        try:
            lp = float(value)
        except (TypeError, ValueError):
            raise ProviderError(f"Non-numeric log-prob {value!r} for token {token!r}", model_id=model_id)
        if math.isnan(lp) or lp > LOGPROB_TOLERANCE:
            raise ProviderError(f"Invalid log-prob {lp!r} for token {token!r}", model_id=model_id)
        cleaned[token] = min(lp, 0.0)
    return cleaned


def _result(provider: BaseProvider, prompt: PromptSpec, raw: Mapping[str, float], from_cache: bool) -> ProbeResult:
    tokens = _clean(raw, provider.model_id)
    labels = {}
    for label in prompt.presented_labels:
        token = provider.token_for(label)
        if token in tokens:
            labels[label] = tokens[token]
    return ProbeResult(
        prompt_hash=prompt.prompt_hash,
        model_id=provider.model_id,
        logprobs=labels,
        token_logprobs=tokens,
        returned_top_k=len(tokens),
        from_cache=from_cache,
    )


def _retrying(policy: RetryPolicy) -> Retrying:
    return Retrying(
        stop=stop_after_attempt(policy.attempts),
        wait=wait_exponential(multiplier=policy.backoff_base, max=policy.backoff_max),
        retry=retry_if_exception_type((TransientProviderError, RateLimitError)),
        reraise=True,
    )


def query_logprobs(
    provider: BaseProvider,
    prompt: PromptSpec,
    cache: ProbeCache,
    retry: RetryPolicy = RetryPolicy(),
) -> ProbeResult:
    """Return the top-k next-token log-probs for a prompt.

    Cache hits never reach the provider. Transient failures and rate limits
    are retried with exponential backoff; credentials errors are not.
    """
    key = cache_key(provider.model_id, prompt.text, provider.top_k, provider.cache_params())
    record = cache.get(key)
    if record is not None:
        return _result(provider, prompt, record["logprobs"], from_cache=True)

    request = provider.request(prompt.text)
    try:
        raw = _retrying(retry)(provider.query, request)
    except RateLimitError as e:
        raise RateLimitError(
            f"Still rate limited after {retry.attempts} attempts",
            model_id=provider.model_id, attempts=retry.attempts,
        ) from e
    except TransientProviderError as e:
        raise ProviderError(
            f"Provider failed after {retry.attempts} attempts: {e}",
            model_id=provider.model_id, attempts=retry.attempts,
        ) from e

    result = _result(provider, prompt, raw, from_cache=False)
    cache.put(key, provider.model_id, prompt.prompt_hash, result.token_logprobs)
    logger.debug("Probed %s on %s: %d entries", provider.model_id, prompt.qid, result.returned_top_k)
    return result
