"""Tournament ranking: all-pairs comparison and win-rate sort.

Every unordered pair is compared exactly once (two directed backend
scores). The winner's running score grows by 1 + |eta|; a tie credits 0.5
to each side. The final ranking sorts by total score, ids ascending on
exact ties, which makes the result invariant to the input inbox order.

Pairwise tasks are independent and may run in parallel (``max_workers``);
score accumulation stays single-threaded in sorted pair order, so the
result equals the sequential computation. A failed comparison aborts the
tournament: a triage ranking built on partial comparisons is a safety
hazard. The raised error carries the outcomes completed so far so a
cached re-run can resume cheaply.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Iterator, Sequence

from .compare import Comparator, ComparisonOutcome, Winner, compare
from .corpus import Message
from .errors import ComparisonFailed, DataError, DuplicateId


@dataclass(frozen=True)
class TournamentResult:
    """Ranking plus full provenance of every comparison.

    comparisons_made counts pairs that reached the backend; cache_hits
    counts pairs served entirely from cache. Their sum is n(n-1)/2 for a
    full tournament over n messages.
    """

    messages: tuple[Message, ...]
    ranking: tuple[str, ...]
    scores: dict[str, float]
    outcomes: tuple[ComparisonOutcome, ...]
    ties_encountered: int
    comparisons_made: int
    cache_hits: int

    def to_record(self) -> dict:
        return {
            "ranking": list(self.ranking),
            "scores": {k: self.scores[k] for k in sorted(self.scores)},
            "outcomes": [outcome.to_record() for outcome in self.outcomes],
            "ties_encountered": self.ties_encountered,
            "comparisons_made": self.comparisons_made,
            "cache_hits": self.cache_hits,
        }


def _apply_outcome(scores: dict[str, float], outcome: ComparisonOutcome) -> int:
    """Credit the pair's score mass; returns 1 when the pair tied."""
    if outcome.winner is Winner.B:
        scores[outcome.b_id] += 1.0 + abs(outcome.eta)
        return 0
    if outcome.winner is Winner.A:
        scores[outcome.a_id] += 1.0 + abs(outcome.eta)
        return 0
    scores[outcome.a_id] += 0.5
    scores[outcome.b_id] += 0.5
    return 1


def _execute_pairs(
    pairs: Sequence[tuple[Message, Message]],
    comparator: Comparator,
    max_workers: int,
) -> Iterator[tuple[ComparisonOutcome, bool]]:
    """Yield (outcome, served_from_cache) in the given pair order.

    Only this pair's task ever writes its two directed cache keys, so the
    pre-compare probe is exact even with parallel workers.
    """
    probe = getattr(comparator, "has_cached_pair", None)

    def _task(pair: tuple[Message, Message]) -> tuple[ComparisonOutcome, bool]:
        a, b = pair
        from_cache = bool(probe(a, b)) if probe is not None else False
        return compare(comparator, a, b), from_cache

    if max_workers <= 1:
        for pair in pairs:
            yield _task(pair)
        return
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        # map preserves order and re-raises each task's error at its slot
        yield from pool.map(_task, pairs)


def _accumulate(
    executed: Iterable[tuple[ComparisonOutcome, bool]],
    scores: dict[str, float],
    outcomes: list[ComparisonOutcome],
) -> tuple[int, int, int]:
    """Apply outcomes in order; returns (ties, comparisons_made, cache_hits)."""
    ties = 0
    made = 0
    hits = 0
    try:
        for outcome, from_cache in executed:
            if from_cache:
                hits += 1
            else:
                made += 1
            ties += _apply_outcome(scores, outcome)
            outcomes.append(outcome)
    except ComparisonFailed as exc:
        exc.partial_outcomes = tuple(outcomes)
        raise
    return ties, made, hits


def _ranking(scores: dict[str, float]) -> tuple[str, ...]:
    return tuple(sorted(scores, key=lambda message_id: (-scores[message_id], message_id)))


def run_tournament(
    inbox: Sequence[Message], comparator: Comparator, max_workers: int = 1
) -> TournamentResult:
    """Compare all n-choose-2 pairs and sort the inbox by total score.

    Pairs are visited in sorted-id order, so scores do not depend on the
    input permutation and directed cache keys line up across runs.
    """
    if len(inbox) < 2:
        raise DataError(f"tournament needs at least 2 messages, got {len(inbox)}")
    ids = [message.id for message in inbox]
    if len(set(ids)) != len(ids):
        raise DuplicateId("inbox contains duplicate message ids")
    ordered = sorted(inbox, key=lambda message: message.id)
    scores = {message.id: 0.0 for message in ordered}
    outcomes: list[ComparisonOutcome] = []
    pairs = list(combinations(ordered, 2))
    ties, made, hits = _accumulate(
        _execute_pairs(pairs, comparator, max_workers), scores, outcomes
    )
    return TournamentResult(
        messages=tuple(ordered),
        ranking=_ranking(scores),
        scores=scores,
        outcomes=tuple(outcomes),
        ties_encountered=ties,
        comparisons_made=made,
        cache_hits=hits,
    )


def insert_incremental(
    result: TournamentResult,
    new_message: Message,
    comparator: Comparator,
    max_workers: int = 1,
) -> TournamentResult:
    """Add one message using only n new comparisons.

    All previous pairwise scores are kept untouched; only the new
    message's pairs are compared, in the same id-sorted direction the full
    tournament uses, so a cached re-run over the enlarged inbox needs zero
    backend calls.
    """
    if new_message.id in result.scores:
        raise DuplicateId(f"message {new_message.id!r} is already ranked")
    scores = dict(result.scores)
    scores[new_message.id] = 0.0
    outcomes = list(result.outcomes)
    pairs = [
        tuple(sorted((existing, new_message), key=lambda message: message.id))
        for existing in result.messages
    ]
    ties, made, hits = _accumulate(
        _execute_pairs(pairs, comparator, max_workers), scores, outcomes
    )
    messages = tuple(
        sorted((*result.messages, new_message), key=lambda message: message.id)
    )
    return TournamentResult(
        messages=messages,
        ranking=_ranking(scores),
        scores=scores,
        outcomes=tuple(outcomes),
        ties_encountered=result.ties_encountered + ties,
        comparisons_made=result.comparisons_made + made,
        cache_hits=result.cache_hits + hits,
    )
