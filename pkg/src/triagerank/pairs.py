"""Evaluation pairs, training triplets, SFT/reward exports, and inboxes.

Pair difficulty follows the level gap: easy means a gap of at least 4,
medium a gap of 2 or 3, hard a gap of 1. Triplets are (anchor, more
urgent, less urgent) with anchors drawn from L2..L5 only, since nothing
is reliably more urgent than L1 or less urgent than L6.

All generation is seeded; exports are byte-identical for the same seed
and inputs.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import prompts
from .compare import Winner
from .corpus import (
    LabeledMessage,
    UrgencyLabel,
    by_level,
    label_for_level,
)
from .errors import (
    ConfigError,
    EqualLabels,
    ExportFailed,
    InsufficientLevel,
    NoTriplets,
    NoValidPairs,
)


class Difficulty(Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"


def difficulty_for_gap(gap: int) -> Difficulty:
    if gap >= 4:
        return Difficulty.EASY
    if gap >= 2:
        return Difficulty.MEDIUM
    if gap == 1:
        return Difficulty.HARD
    raise EqualLabels(f"no difficulty for gap {gap}")


@dataclass(frozen=True)
class EvalPair:
    """A gold-labeled comparison pair with its difficulty stratum."""

    a: LabeledMessage
    b: LabeledMessage
    gold_more_urgent: Winner
    difficulty: Difficulty
    gap: int

    def __post_init__(self):
        if self.gap != abs(self.a.level - self.b.level):
            raise EqualLabels("gap does not match the label levels")

    def swapped(self) -> "EvalPair":
        """Same pair with the argument order flipped."""
        return EvalPair(
            a=self.b,
            b=self.a,
            gold_more_urgent=Winner.B if self.gold_more_urgent is Winner.A else Winner.A,
            difficulty=self.difficulty,
            gap=self.gap,
        )

    def to_record(self) -> dict:
        return {
            "a": self.a.to_record(),
            "b": self.b.to_record(),
            "gold_more_urgent": self.gold_more_urgent.value,
            "difficulty": self.difficulty.value,
            "gap": self.gap,
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "EvalPair":
        return make_eval_pair(
            LabeledMessage.from_record(record["a"]),
            LabeledMessage.from_record(record["b"]),
        )


def make_eval_pair(a: LabeledMessage, b: LabeledMessage) -> EvalPair:
    """Derive gold label, gap and difficulty for a cross-level pair."""
    if a.level == b.level:
        raise EqualLabels(f"pair ({a.id}, {b.id}) has equal urgency levels")
    gap = abs(a.level - b.level)
    return EvalPair(
        a=a,
        b=b,
        gold_more_urgent=Winner.A if a.level < b.level else Winner.B,
        difficulty=difficulty_for_gap(gap),
        gap=gap,
    )


def _ordinal_only(corpus: Iterable[LabeledMessage]) -> list[LabeledMessage]:
    return [labeled for labeled in corpus if labeled.label.is_ordinal]


def build_eval_pairs(
    corpus: Sequence[LabeledMessage],
    count: int,
    seed: int,
    difficulty_quotas: Mapping[Difficulty, int] | None = None,
) -> list[EvalPair]:
    """Sample seeded cross-level evaluation pairs.

    Returns exactly ``count`` pairs, or all feasible ones when fewer
    exist. The orientation of each pair (which message is a) is
    randomized. With ``difficulty_quotas`` the sample is drawn per
    difficulty stratum instead and ``count`` is ignored.
    """
    if count < 0:
        raise ConfigError("count must be non-negative")
    ordinal = _ordinal_only(corpus)
    if len({labeled.level for labeled in ordinal}) < 2:
        raise NoValidPairs("corpus has fewer than two distinct urgency levels")
    candidates = [
        (i, j)
        for i in range(len(ordinal))
        for j in range(i + 1, len(ordinal))
        if ordinal[i].level != ordinal[j].level
    ]
    rng = random.Random(seed)

    def _draw(pool: list[tuple[int, int]], wanted: int) -> list[EvalPair]:
        chosen = pool if wanted >= len(pool) else rng.sample(pool, wanted)
        drawn = []
        for i, j in chosen:
            first, second = (i, j) if rng.random() < 0.5 else (j, i)
            drawn.append(make_eval_pair(ordinal[first], ordinal[second]))
        return drawn

    if difficulty_quotas is None:
        return _draw(candidates, count)
    pairs: list[EvalPair] = []
    for difficulty in Difficulty:
        wanted = difficulty_quotas.get(difficulty, 0)
        if wanted <= 0:
            continue
        pool = [
            (i, j)
            for i, j in candidates
            if difficulty_for_gap(abs(ordinal[i].level - ordinal[j].level)) is difficulty
        ]
        pairs.extend(_draw(pool, wanted))
    return pairs


@dataclass(frozen=True)
class Triplet:
    """(anchor, more urgent, less urgent); anchor level must be 2..5."""

    anchor: LabeledMessage
    more_urgent: LabeledMessage
    less_urgent: LabeledMessage

    def __post_init__(self):
        if not 2 <= self.anchor.level <= 5:
            raise NoTriplets(
                f"anchor {self.anchor.id!r} has level {self.anchor.level}, need 2..5"
            )
        if not self.more_urgent.level < self.anchor.level < self.less_urgent.level:
            raise NoTriplets(
                f"triplet ({self.more_urgent.id}, {self.anchor.id}, "
                f"{self.less_urgent.id}) violates the level ordering"
            )

    def to_record(self) -> dict:
        return {
            "anchor": self.anchor.to_record(),
            "more_urgent": self.more_urgent.to_record(),
            "less_urgent": self.less_urgent.to_record(),
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "Triplet":
        return cls(
            anchor=LabeledMessage.from_record(record["anchor"]),
            more_urgent=LabeledMessage.from_record(record["more_urgent"]),
            less_urgent=LabeledMessage.from_record(record["less_urgent"]),
        )


DEFAULT_MAX_USES = 4


def build_triplets(
    corpus: Sequence[LabeledMessage],
    max_uses_per_message: int = DEFAULT_MAX_USES,
    seed: int = 0,
    count: int | None = None,
) -> list[Triplet]:
    """Generate seeded training triplets with partner usage caps.

    Anchors (levels 2..5) are visited in random order; for each, a more-
    and a less-urgent partner are drawn by first picking an eligible level
    uniformly, then a message within it, skipping messages already used as
    a partner ``max_uses_per_message`` times. Without ``count`` every
    anchor is visited once; with it, passes repeat until the target or the
    supply is exhausted.
    """
    if max_uses_per_message < 1:
        raise ConfigError("max_uses_per_message must be >= 1")
    if count is not None and count < 1:
        raise ConfigError("count must be >= 1 when given")
    levels = by_level(corpus)
    anchors = [
        labeled
        for level in (2, 3, 4, 5)
        for labeled in levels.get(level, ())
    ]
    if not anchors:
        raise NoTriplets("no messages with level 2..5 to anchor on")
    rng = random.Random(seed)
    usage: Counter = Counter()
    triplets: list[Triplet] = []

    def _pick_partner(eligible_levels: list[int]) -> LabeledMessage | None:
        available = [
            level
            for level in eligible_levels
            if any(usage[m.id] < max_uses_per_message for m in levels.get(level, ()))
        ]
        if not available:
            return None
        level = rng.choice(available)
        pool = [m for m in levels[level] if usage[m.id] < max_uses_per_message]
        return rng.choice(pool)

    while True:
        progressed = False
        for anchor in rng.sample(anchors, len(anchors)):
            if count is not None and len(triplets) >= count:
                break
            more = _pick_partner(list(range(1, anchor.level)))
            less = _pick_partner(list(range(anchor.level + 1, 7)))
            if more is None or less is None:
                continue
            usage[more.id] += 1
            usage[less.id] += 1
            triplets.append(
                Triplet(anchor=anchor, more_urgent=more, less_urgent=less)
            )
            progressed = True
        if count is None or len(triplets) >= count or not progressed:
            break
    if not triplets:
        raise NoTriplets("no triplet could be formed from the corpus")
    return triplets


def write_eval_pairs(eval_pairs: Iterable[EvalPair], path: str | Path) -> int:
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for pair in eval_pairs:
            handle.write(json.dumps(pair.to_record(), sort_keys=True) + "\n")
            count += 1
    return count


def read_eval_pairs(path: str | Path) -> list[EvalPair]:
    with Path(path).open("r", encoding="utf-8") as handle:
        return [EvalPair.from_record(json.loads(line)) for line in handle if line.strip()]


def write_triplets(triplets: Iterable[Triplet], path: str | Path) -> int:
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for triplet in triplets:
            handle.write(json.dumps(triplet.to_record(), sort_keys=True) + "\n")
            count += 1
    return count


def read_triplets(path: str | Path) -> list[Triplet]:
    with Path(path).open("r", encoding="utf-8") as handle:
        return [Triplet.from_record(json.loads(line)) for line in handle if line.strip()]


@dataclass(frozen=True)
class ExportSummary:
    records: int
    path: Path


def _write_jsonl(records: Iterable[dict], path: str | Path) -> ExportSummary:
    path = Path(path)
    count = 0
    try:
        with path.open("w", encoding="utf-8") as handle:
            for record in records:
                handle.write(json.dumps(record, sort_keys=True) + "\n")
                count += 1
    except OSError as exc:
        raise ExportFailed(f"cannot write {path}: {exc}") from exc
    return ExportSummary(records=count, path=path)


def sft_records(triplets: Sequence[Triplet]) -> list[dict]:
    """Four yes/no records per triplet, exactly label-balanced.

    Each record's prompt asks whether the new (second) message is more
    urgent than the existing (first) one, so:
    (anchor, more) -> YES, (anchor, less) -> NO,
    (more, anchor) -> NO,  (less, anchor) -> YES.
    """
    records = []
    for triplet in triplets:
        layout = (
            (triplet.anchor, triplet.more_urgent, "YES"),
            (triplet.anchor, triplet.less_urgent, "NO"),
            (triplet.more_urgent, triplet.anchor, "NO"),
            (triplet.less_urgent, triplet.anchor, "YES"),
        )
        for existing, new, target in layout:
            prompt = prompts.render(
                prompts.URGENT_SFT,
                prompts.pair_bindings(existing.message, new.message),
            )
            records.append({"prompt": prompt, "completion": target})
    return records


def export_sft(triplets: Sequence[Triplet], path: str | Path) -> ExportSummary:
    """Write the SFT training export (JSONL of {prompt, completion})."""
    if not triplets:
        raise NoTriplets("nothing to export")
    return _write_jsonl(sft_records(triplets), path)


def reward_records(triplets: Sequence[Triplet]) -> list[dict]:
    """Two preference records per triplet: forward and inverse prompts.

    Forward asks for a more urgent message (chosen = more urgent); the
    inverse asks for a less urgent one (chosen = less urgent), balancing
    gradient updates against the four SFT records.
    """
    records = []
    for triplet in triplets:
        anchor_block = prompts.message_block(triplet.anchor.message)
        more_block = prompts.message_block(triplet.more_urgent.message)
        less_block = prompts.message_block(triplet.less_urgent.message)
        records.append(
            {
                "prompt": prompts.render(
                    prompts.URGENT_REWARD, {"message": anchor_block}
                ),
                "chosen": more_block,
                "rejected": less_block,
            }
        )
        records.append(
            {
                "prompt": prompts.render(
                    prompts.URGENT_REWARD_INVERSE, {"message": anchor_block}
                ),
                "chosen": less_block,
                "rejected": more_block,
            }
        )
    return records


def export_reward(triplets: Sequence[Triplet], path: str | Path) -> ExportSummary:
    """Write the reward training export (JSONL of {prompt, chosen, rejected})."""
    if not triplets:
        raise NoTriplets("nothing to export")
    return _write_jsonl(reward_records(triplets), path)


@dataclass(frozen=True)
class InboxSpec:
    """Per-level message counts plus the sampling seed."""

    counts: Mapping[UrgencyLabel, int]
    seed: int = 0

    def __post_init__(self):
        counts = dict(self.counts)
        for label, count in counts.items():
            if not label.is_ordinal:
                raise ConfigError(f"inbox spec cannot request {label.value} messages")
            if count < 0:
                raise ConfigError(f"negative count for {label.value}")
        if sum(counts.values()) < 2:
            raise ConfigError("inbox spec must request at least 2 messages")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @classmethod
    def uniform(cls, per_level: int = 5, seed: int = 0) -> "InboxSpec":
        return cls(
            counts={label_for_level(level): per_level for level in range(1, 7)},
            seed=seed,
        )

    @classmethod
    def from_counts(cls, counts: Sequence[int], seed: int = 0) -> "InboxSpec":
        """Counts for L1..L6 in order, e.g. (5, 3, 5, 7, 7, 4)."""
        if len(counts) != 6:
            raise ConfigError("inbox spec needs exactly 6 counts (L1..L6)")
        return cls(
            counts={
                label_for_level(level): count
                for level, count in enumerate(counts, start=1)
            },
            seed=seed,
        )


def assemble_inbox(
    corpus: Sequence[LabeledMessage], spec: InboxSpec
) -> list[LabeledMessage]:
    """Draw the requested per-level counts and shuffle the result.

    Sampling and the final order are both seeded; the initial order is a
    uniform shuffle since win-rate ranking is order-insensitive anyway.
    """
    levels = by_level(corpus)
    rng = random.Random(spec.seed)
    picked: list[LabeledMessage] = []
    for level in range(1, 7):
        label = label_for_level(level)
        wanted = spec.counts.get(label, 0)
        if wanted == 0:
            continue
        pool = levels.get(level, [])
        if len(pool) < wanted:
            raise InsufficientLevel(
                f"need {wanted} {label.value} messages, corpus has {len(pool)}",
                label=label,
            )
        picked.extend(rng.sample(pool, wanted))
    rng.shuffle(picked)
    return picked
