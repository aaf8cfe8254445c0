"""Pairwise urgency comparators and the directed-score contract.

A comparator scores one direction at a time: score_directed(existing, new)
answers "how strongly is the new message more urgent than the existing
one". compare() runs both directions and reduces them to a signed margin
eta in [-1, 1]:

    probability backends:  eta = s_ab - s_ba
    reward backends:       eta = sigmoid(d) - sigmoid(-d),  d = s_ab - s_ba

eta > 0 means the second argument (b) is more urgent; eta < 0 the first;
eta = 0 is an explicit TIE. Exact score equality is the only tie; there is
no epsilon band.
"""

from __future__ import annotations

import json
import logging
import math
import random
import re
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Protocol

from . import gateway, prompts
from .corpus import LabeledMessage, Message, UrgencyLabel
from .errors import (
    BadScore,
    ComparisonFailed,
    ConfigError,
    OracleNeedsLabels,
    TriageRankError,
    UnparseableAnswer,
    UnparseableLogprobs,
)

logger = logging.getLogger(__name__)


class Winner(Enum):
    A = "A"
    B = "B"
    TIE = "TIE"


class ScoreKind(Enum):
    PROBABILITY = "probability"
    REWARD = "reward"


@dataclass(frozen=True)
class DirectionScore:
    """Score for one prompt direction. Probability kind must be in [0, 1]."""

    value: float
    kind: ScoreKind
    raw: object = None

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise BadScore(f"direction score is not finite: {self.value!r}")
        if self.kind is ScoreKind.PROBABILITY and not 0.0 <= self.value <= 1.0:
            raise BadScore(f"probability score out of [0, 1]: {self.value!r}")


@dataclass(frozen=True)
class ComparisonOutcome:
    """Both directed scores for a pair plus the derived margin and winner."""

    a_id: str
    b_id: str
    s_ab: DirectionScore
    s_ba: DirectionScore
    eta: float
    winner: Winner

    def to_record(self) -> dict:
        return {
            "a_id": self.a_id,
            "b_id": self.b_id,
            "s_ab": self.s_ab.value,
            "s_ba": self.s_ba.value,
            "kind": self.s_ab.kind.value,
            "eta": self.eta,
            "winner": self.winner.value,
        }


class Comparator(Protocol):
    def score_directed(self, existing: Message, new: Message) -> DirectionScore: ...


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def pair_eta(s_ab: DirectionScore, s_ba: DirectionScore) -> float:
    """Reduce two directed scores to the signed margin eta in [-1, 1]."""
    if s_ab.kind is not s_ba.kind:
        raise ComparisonFailed(
            f"mixed score kinds: {s_ab.kind.value} vs {s_ba.kind.value}"
        )
    if s_ab.kind is ScoreKind.PROBABILITY:
        return s_ab.value - s_ba.value
    difference = s_ab.value - s_ba.value
    return _logistic(difference) - _logistic(-difference)


def compare(comparator: Comparator, a: Message, b: Message) -> ComparisonOutcome:
    """Run both directions and derive eta and the winner.

    Any backend failure in either direction raises ComparisonFailed; no
    partial outcome is produced.
    """
    if a.id == b.id:
        raise ConfigError(f"cannot compare message {a.id!r} with itself")
    try:
        s_ab = comparator.score_directed(a, b)
        s_ba = comparator.score_directed(b, a)
    except ComparisonFailed:
        raise
    except TriageRankError as exc:
        raise ComparisonFailed(f"pair ({a.id}, {b.id}): {exc}") from exc
    except Exception as exc:
        raise ComparisonFailed(
            f"pair ({a.id}, {b.id}): {type(exc).__name__}: {exc}"
        ) from exc
    eta = pair_eta(s_ab, s_ba)
    if eta > 0:
        winner = Winner.B
    elif eta < 0:
        winner = Winner.A
    else:
        winner = Winner.TIE
    return ComparisonOutcome(a.id, b.id, s_ab, s_ba, eta, winner)


class NoisyOracleComparator:
    """Label-aware test double with gap-dependent error.

    Knows the gold labels and emits calibrated-looking probabilities of
    0.5 +/- margin. With probability flip(gap) the wrong message is
    favored. Per-pair randomness derives from (seed, sorted id pair), so
    results are independent of call order and concurrency.
    """

    def __init__(
        self,
        labels: Mapping[str, UrgencyLabel] | Iterable[LabeledMessage],
        flip_prob_by_gap: Mapping[int, float] | None = None,
        seed: int = 0,
        margin: float = 0.4,
    ):
        if isinstance(labels, Mapping):
            self._labels = dict(labels)
        else:
            self._labels = {item.id: item.label for item in labels}
        self._flip = dict(flip_prob_by_gap or {})
        for gap, probability in self._flip.items():
            if not 0.0 <= probability <= 1.0:
                raise ConfigError(f"flip probability for gap {gap} out of [0, 1]")
        if not 0.0 < margin <= 0.5:
            raise ConfigError("margin must be in (0, 0.5]")
        self._seed = seed
        self._margin = margin
        self.cache_identity = (
            f"oracle(seed={seed},margin={margin},"
            f"flip={sorted(self._flip.items())})"
        )

    def _level(self, message: Message) -> int:
        label = self._labels.get(message.id)
        if label is None or not label.is_ordinal:
            raise OracleNeedsLabels(
                f"no ordinal label for message {message.id!r}", message_id=message.id
            )
        return label.level

    def score_directed(self, existing: Message, new: Message) -> DirectionScore:
        level_existing = self._level(existing)
        level_new = self._level(new)
        if level_existing == level_new:
            return DirectionScore(0.5, ScoreKind.PROBABILITY)
        gap = abs(level_existing - level_new)
        first, second = sorted((existing.id, new.id))
        rng = random.Random(f"{self._seed}|{first}|{second}")
        flipped = rng.random() < self._flip.get(gap, 0.0)
        new_is_more_urgent = level_new < level_existing
        if flipped:
            new_is_more_urgent = not new_is_more_urgent
        value = 0.5 + self._margin if new_is_more_urgent else 0.5 - self._margin
        return DirectionScore(value, ScoreKind.PROBABILITY)


def noisy_oracle(
    labels: Mapping[str, UrgencyLabel] | Iterable[LabeledMessage],
    flip_prob_by_gap: Mapping[int, float] | None = None,
    seed: int = 0,
    margin: float = 0.4,
) -> NoisyOracleComparator:
    return NoisyOracleComparator(labels, flip_prob_by_gap, seed, margin)


def perfect_oracle(
    labels: Mapping[str, UrgencyLabel] | Iterable[LabeledMessage],
) -> NoisyOracleComparator:
    """Noiseless oracle: always agrees with the gold level ordering."""
    return NoisyOracleComparator(labels, flip_prob_by_gap=None)


class LogprobComparator:
    """Directed probability from the YES token mass of a chat backend."""

    def __init__(
        self,
        config: gateway.EndpointConfig,
        system_prompt: str | None = None,
    ):
        self._config = config
        self._system = (
            system_prompt if system_prompt is not None else prompts.SYSTEM.body
        )
        self.cache_identity = f"logprob({config.model_name})"
        self.prompt_variant = f"urgent_sft@{prompts.CATALOG_VERSION}"

    def score_directed(self, existing: Message, new: Message) -> DirectionScore:
        prompt = prompts.render(prompts.URGENT_SFT, prompts.pair_bindings(existing, new))
        result = gateway.complete(self._config, self._system, prompt, want_logprobs=True)
        if not result.token_probabilities:
            raise UnparseableLogprobs(
                f"no YES/NO probability for pair ({existing.id}, {new.id})"
            )
        return DirectionScore(
            result.token_probabilities["YES"], ScoreKind.PROBABILITY, raw=result
        )


_FINAL_ANSWER = re.compile(r"\b(YES|NO)\b", re.IGNORECASE)


def parse_final_answer(text: str) -> str:
    """Last standalone YES/NO in a completion; raises UnparseableAnswer."""
    matches = _FINAL_ANSWER.findall(text)
    if not matches:
        raise UnparseableAnswer(f"no YES/NO found in completion: {text[:200]!r}")
    return matches[-1].upper()


class ReasoningComparator:
    """Hard 0/1 probability from the final YES/NO of a free-text completion."""

    def __init__(
        self,
        config: gateway.EndpointConfig,
        system_prompt: str | None = None,
    ):
        self._config = config
        self._system = (
            system_prompt if system_prompt is not None else prompts.SYSTEM.body
        )
        self.cache_identity = f"reasoning({config.model_name})"
        self.prompt_variant = f"urgent_sft@{prompts.CATALOG_VERSION}"

    def score_directed(self, existing: Message, new: Message) -> DirectionScore:
        prompt = prompts.render(prompts.URGENT_SFT, prompts.pair_bindings(existing, new))
        result = gateway.complete(self._config, self._system, prompt, want_logprobs=False)
        answer = parse_final_answer(result.text)
        return DirectionScore(
            1.0 if answer == "YES" else 0.0, ScoreKind.PROBABILITY, raw=result
        )


class RewardComparator:
    """Scalar reward for the new message as a more-urgent completion."""

    def __init__(self, config: gateway.EndpointConfig):
        self._config = config
        self.cache_identity = f"reward({config.model_name})"
        self.prompt_variant = f"urgent_reward@{prompts.CATALOG_VERSION}"

    def score_directed(self, existing: Message, new: Message) -> DirectionScore:
        prompt = prompts.render(
            prompts.URGENT_REWARD, {"message": prompts.message_block(existing)}
        )
        value = gateway.score(self._config, prompt, prompts.message_block(new))
        return DirectionScore(value, ScoreKind.REWARD)


def logprob_comparator(
    config: gateway.EndpointConfig, system_prompt: str | None = None
) -> LogprobComparator:
    return LogprobComparator(config, system_prompt)


def reasoning_comparator(
    config: gateway.EndpointConfig, system_prompt: str | None = None
) -> ReasoningComparator:
    return ReasoningComparator(config, system_prompt)


def reward_comparator(config: gateway.EndpointConfig) -> RewardComparator:
    return RewardComparator(config)


class ComparisonCache:
    """Append-only on-disk store of directed scores.

    File format: one JSON object per line with fields key, value, kind,
    timestamp. Later entries win; the file is compacted on load when
    duplicates or corrupt lines are found. Corrupt lines are dropped with
    a warning and those keys fall back to the backend.
    """

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._entries: dict[str, tuple[float, str]] = {}
        self._lock = threading.Lock()
        if self._path is not None and self._path.exists():
            self._load()

    def __len__(self) -> int:
        return len(self._entries)

    def _load(self) -> None:
        assert self._path is not None
        try:
            raw_lines = self._path.read_text(encoding="utf-8").splitlines()
        except (OSError, UnicodeDecodeError) as exc:
            logger.warning(
                "CacheInvalid: cannot read cache %s (%s); starting empty",
                self._path,
                exc,
            )
            return
        dirty = False
        for line in raw_lines:
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                key = entry["key"]
                value = float(entry["value"])
                kind = entry["kind"]
                if not math.isfinite(value):
                    raise ValueError("non-finite value")
                ScoreKind(kind)
            except (ValueError, KeyError, TypeError):
                logger.warning(
                    "CacheInvalid: dropping corrupt cache line in %s", self._path
                )
                dirty = True
                continue
            if key in self._entries:
                dirty = True
            self._entries[key] = (value, kind)
        if dirty:
            self._compact()

    def _compact(self) -> None:
        assert self._path is not None
        with self._path.open("w", encoding="utf-8") as handle:
            for key, (value, kind) in self._entries.items():
                handle.write(self._format_line(key, value, kind))

    @staticmethod
    def _format_line(key: str, value: float, kind: str) -> str:
        return (
            json.dumps(
                {"key": key, "value": value, "kind": kind, "timestamp": time.time()},
                sort_keys=True,
            )
            + "\n"
        )

    def get(self, key: str) -> DirectionScore | None:
        with self._lock:
            entry = self._entries.get(key)
        if entry is None:
            return None
        value, kind = entry
        return DirectionScore(value, ScoreKind(kind))

    def put(self, key: str, score: DirectionScore) -> None:
        with self._lock:
            self._entries[key] = (score.value, score.kind.value)
            if self._path is not None:
                with self._path.open("a", encoding="utf-8") as handle:
                    handle.write(
                        self._format_line(key, score.value, score.kind.value)
                    )

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()
            if self._path is not None and self._path.exists():
                self._path.unlink()


class CachedComparator:
    """Transparent read-through cache around another comparator.

    Keys are (backend identity, prompt variant, ordered id pair), so the
    two directions of a pair are cached independently. ``hits`` and
    ``misses`` count directed lookups.
    """

    def __init__(self, inner: Comparator, store: ComparisonCache):
        self._inner = inner
        self._store = store
        self.cache_identity = getattr(inner, "cache_identity", type(inner).__name__)
        self.prompt_variant = getattr(inner, "prompt_variant", "default")
        self.hits = 0
        self.misses = 0

    def _key(self, existing: Message, new: Message) -> str:
        return json.dumps(
            [self.cache_identity, self.prompt_variant, existing.id, new.id]
        )

    def has_cached_pair(self, a: Message, b: Message) -> bool:
        """True when both directions of the pair are already stored."""
        return (
            self._store.get(self._key(a, b)) is not None
            and self._store.get(self._key(b, a)) is not None
        )

    def score_directed(self, existing: Message, new: Message) -> DirectionScore:
        key = self._key(existing, new)
        cached_score = self._store.get(key)
        if cached_score is not None:
            self.hits += 1
            return cached_score
        score = self._inner.score_directed(existing, new)
        self._store.put(key, score)
        self.misses += 1
        return score


def cached(inner: Comparator, store: ComparisonCache) -> CachedComparator:
    return CachedComparator(inner, store)
