"""Intrinsic and extrinsic evaluation metrics.

Extrinsic ranking quality uses graded-relevance NDCG with exponential
gain and its tail-normalized variant:

    DCG@k    = sum_{i=1..k} (2^rel_i - 1) / log2(i + 1)
    NDCG@k   = DCG@k / ideal DCG@k            in [0, 1]
    T-NDCG@k = NDCG@k(L) - NDCG@k(reverse(L)) in [-1, 1]

The reversal term penalizes urgent messages sorted to the bottom, which
plain NDCG ignores. Relevance maps level 1 to gain 5 down to level 6 at
gain 0 (no medical attention needed).

Multi-class rankings with intra-class ties are scored by the expected
T-NDCG over seeded intra-class shuffles (mean and sample deviation).
"""

from __future__ import annotations

import math
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as scipy_stats

from .compare import Comparator, ComparisonOutcome, Winner, compare
from .corpus import UrgencyLabel, label_for_level
from .errors import ConfigError, DataError, MissingLabel, NoStrata, NoValidPairs
from .pairs import Difficulty, EvalPair


def _default_gains() -> dict[UrgencyLabel, int]:
    return {label_for_level(level): 6 - level for level in range(1, 7)}


@dataclass(frozen=True)
class RelevanceMapping:
    """Urgency level to relevance gain; must strictly decrease, L6 -> 0."""

    gains: Mapping[UrgencyLabel, int] = field(default_factory=_default_gains)

    def __post_init__(self):
        gains = dict(self.gains)
        previous = None
        for level in range(1, 7):
            label = label_for_level(level)
            if label not in gains:
                raise ConfigError(f"relevance mapping is missing {label.value}")
            if previous is not None and gains[label] >= previous:
                raise ConfigError("relevance must strictly decrease with level")
            previous = gains[label]
        if gains[UrgencyLabel.L6] != 0:
            raise ConfigError("L6 must map to relevance 0")
        object.__setattr__(self, "gains", gains)

    def relevance(self, label: UrgencyLabel) -> int:
        if not label.is_ordinal:
            raise MissingLabel(f"{label.value} has no relevance")
        return self.gains[label]


DEFAULT_RELEVANCE = RelevanceMapping()


@dataclass(frozen=True)
class IntrinsicReport:
    """Pairwise accuracy, overall and per difficulty stratum."""

    overall_accuracy: float
    per_difficulty: dict[Difficulty, tuple[float, int]]
    tie_count: int
    total: int

    def to_record(self) -> dict:
        return {
            "overall_accuracy": self.overall_accuracy,
            "per_difficulty": {
                difficulty.value: {"accuracy": accuracy, "n": n}
                for difficulty, (accuracy, n) in sorted(
                    self.per_difficulty.items(), key=lambda item: item[0].value
                )
            },
            "tie_count": self.tie_count,
            "total": self.total,
        }


def intrinsic_accuracy(
    pairs: Sequence[EvalPair], comparator: Comparator
) -> IntrinsicReport:
    """Score a comparator on gold pairs.

    A pair counts correct iff the winner matches the gold side; a TIE is
    incorrect (an undecided comparator has not triaged) and increments
    tie_count.
    """
    if not pairs:
        raise NoValidPairs("intrinsic evaluation needs at least one pair")
    correct_total = 0
    ties = 0
    by_difficulty: dict[Difficulty, list[bool]] = defaultdict(list)
    for pair in pairs:
        outcome = compare(comparator, pair.a.message, pair.b.message)
        if outcome.winner is Winner.TIE:
            ties += 1
            is_correct = False
        else:
            is_correct = outcome.winner is pair.gold_more_urgent
        correct_total += is_correct
        by_difficulty[pair.difficulty].append(is_correct)
    per_difficulty = {
        difficulty: (sum(results) / len(results), len(results))
        for difficulty, results in by_difficulty.items()
    }
    return IntrinsicReport(
        overall_accuracy=correct_total / len(pairs),
        per_difficulty=per_difficulty,
        tie_count=ties,
        total=len(pairs),
    )


def _gain_vector(
    ranking: Sequence[str],
    labels: Mapping[str, UrgencyLabel],
    mapping: RelevanceMapping,
) -> list[int]:
    gains = []
    for message_id in ranking:
        if message_id not in labels:
            raise MissingLabel(f"no label for ranked id {message_id!r}")
        gains.append(mapping.relevance(labels[message_id]))
    return gains


def _dcg(gains: Sequence[int], k: int) -> float:
    return sum(
        (2.0**gain - 1.0) / math.log2(position + 1)
        for position, gain in enumerate(gains[:k], start=1)
    )


def ndcg_at_k(
    ranking: Sequence[str],
    labels: Mapping[str, UrgencyLabel],
    mapping: RelevanceMapping = DEFAULT_RELEVANCE,
    k: int | None = None,
) -> float:
    """NDCG@k with exponential gain; 1.0 when the ideal DCG is 0.

    The ideal ordering is the ranking's own label multiset sorted by
    relevance descending, so the denominator is permutation-invariant.
    """
    if k is None:
        k = len(ranking)
    if not 1 <= k <= len(ranking):
        raise ConfigError(f"k must be in 1..{len(ranking)}, got {k}")
    gains = _gain_vector(ranking, labels, mapping)
    ideal = _dcg(sorted(gains, reverse=True), k)
    if ideal == 0.0:
        return 1.0
    return _dcg(gains, k) / ideal


def t_ndcg_at_k(
    ranking: Sequence[str],
    labels: Mapping[str, UrgencyLabel],
    mapping: RelevanceMapping = DEFAULT_RELEVANCE,
    k: int | None = None,
) -> float:
    """Tail-normalized NDCG: NDCG@k(L) - NDCG@k(exact reversal of L)."""
    reversed_ranking = list(reversed(ranking))
    return ndcg_at_k(ranking, labels, mapping, k) - ndcg_at_k(
        reversed_ranking, labels, mapping, k
    )


def expected_t_ndcg(
    class_groups: Sequence[Sequence[str]],
    labels: Mapping[str, UrgencyLabel],
    mapping: RelevanceMapping = DEFAULT_RELEVANCE,
    k: int | None = None,
    shuffles: int = 1000,
    seed: int = 0,
) -> tuple[float, float]:
    """Mean and sample stddev of T-NDCG over intra-class shuffles.

    ``class_groups`` is the predicted ranking as ordered groups of ids,
    most urgent class first; order within a group is meaningless and is
    shuffled independently per trial. Per-trial seeds derive from
    (seed, trial), so parallel evaluation would match this sequential
    result.
    """
    if shuffles < 1:
        raise ConfigError("shuffles must be >= 1")
    values = np.empty(shuffles)
    for trial in range(shuffles):
        rng = random.Random(f"{seed}:{trial}")
        flat: list[str] = []
        for group in class_groups:
            members = list(group)
            rng.shuffle(members)
            flat.extend(members)
        values[trial] = t_ndcg_at_k(flat, labels, mapping, k)
    if shuffles == 1 or np.all(values == values[0]):
        # identical samples have exactly zero spread; keep float dust out
        stddev = 0.0
    else:
        stddev = float(np.std(values, ddof=1))
    return float(np.mean(values)), stddev


@dataclass(frozen=True)
class ChiSquareResult:
    chi_square: float
    dof: int
    p_value: float
    cramers_v: float
    n: int


def chi_square_independence(table: Sequence[Sequence[float]]) -> ChiSquareResult:
    """Pearson chi-square test of independence, no continuity correction.

    Rows or columns summing to zero are dropped before computing. The
    p-value comes from the chi-square distribution with (r-1)(c-1)
    degrees of freedom; Cramér's V = sqrt(chi2 / (n * min(r-1, c-1))).
    """
    observed = np.asarray(table, dtype=float)
    if observed.ndim != 2 or observed.size == 0:
        raise DataError("contingency table must be 2-dimensional and non-empty")
    if (observed < 0).any():
        raise DataError("contingency table has negative counts")
    observed = observed[observed.sum(axis=1) > 0][:, observed.sum(axis=0) > 0]
    n = float(observed.sum())
    if n == 0:
        raise DataError("contingency table is empty")
    rows, cols = observed.shape
    dof = (rows - 1) * (cols - 1)
    if dof == 0:
        return ChiSquareResult(0.0, 0, 1.0, 0.0, int(n))
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0)) / n
    chi_square = float(((observed - expected) ** 2 / expected).sum())
    p_value = float(scipy_stats.chi2.sf(chi_square, dof))
    cramers_v = math.sqrt(chi_square / (n * min(rows - 1, cols - 1)))
    return ChiSquareResult(chi_square, dof, p_value, cramers_v, int(n))


class BiasScheme(Enum):
    GENDER_OF_ROLES = "gender_of_roles"
    AGE_ORDERING = "age_ordering"


@dataclass(frozen=True)
class BiasReport:
    """Correctness stratified by a demographic scheme, with effect size."""

    scheme: BiasScheme
    strata: dict[str, tuple[int, int]]
    chi_square: float
    p_value: float
    cramers_v: float
    skipped: int

    def to_record(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "strata": {
                name: {"correct": correct, "incorrect": incorrect}
                for name, (correct, incorrect) in sorted(self.strata.items())
            },
            "chi_square": self.chi_square,
            "p_value": self.p_value,
            "cramers_v": self.cramers_v,
            "skipped": self.skipped,
        }


def _roles(pair: EvalPair) -> tuple:
    """(more urgent, less urgent) messages of a pair."""
    if pair.gold_more_urgent is Winner.A:
        return pair.a.message, pair.b.message
    return pair.b.message, pair.a.message


def _stratum_for(pair: EvalPair, scheme: BiasScheme) -> str | None:
    more, less = _roles(pair)
    if more.ehr is None or less.ehr is None:
        return None
    if scheme is BiasScheme.GENDER_OF_ROLES:
        genders = {"male", "female"}
        g_more = more.ehr.gender.value
        g_less = less.ehr.gender.value
        if g_more not in genders or g_less not in genders:
            return None
        return f"more={g_more},less={g_less}"
    if more.ehr.age == less.ehr.age:
        return None
    return "older_more_urgent" if more.ehr.age > less.ehr.age else "older_less_urgent"


def bias_strata(
    pairs: Sequence[EvalPair],
    outcomes: Sequence[ComparisonOutcome],
    scheme: BiasScheme,
) -> BiasReport:
    """Test whether correctness is independent of a demographic ordering.

    Outcomes are matched to pairs by (a_id, b_id). Pairs lacking the
    demographics the scheme needs (or lacking an outcome) are skipped and
    counted.
    """
    outcome_index = {(outcome.a_id, outcome.b_id): outcome for outcome in outcomes}
    counts: dict[str, list[int]] = defaultdict(lambda: [0, 0])
    skipped = 0
    for pair in pairs:
        outcome = outcome_index.get((pair.a.id, pair.b.id))
        stratum = _stratum_for(pair, scheme)
        if outcome is None or stratum is None:
            skipped += 1
            continue
        is_correct = outcome.winner is pair.gold_more_urgent
        counts[stratum][0 if is_correct else 1] += 1
    if not counts:
        raise NoStrata(f"no pair is usable for scheme {scheme.value}")
    names = sorted(counts)
    table = [counts[name] for name in names]
    result = chi_square_independence(table)
    return BiasReport(
        scheme=scheme,
        strata={name: (counts[name][0], counts[name][1]) for name in names},
        chi_square=result.chi_square,
        p_value=result.p_value,
        cramers_v=result.cramers_v,
        skipped=skipped,
    )


@dataclass(frozen=True)
class AgreementReport:
    percent_agreement: float
    cohens_kappa: float
    pairs_used: int
    pairs_excluded: int

    def to_record(self) -> dict:
        return {
            "percent_agreement": self.percent_agreement,
            "cohens_kappa": self.cohens_kappa,
            "pairs_used": self.pairs_used,
            "pairs_excluded": self.pairs_excluded,
        }


def agreement(
    annotations: Iterable[tuple[str, str, str]],
) -> AgreementReport:
    """Percent agreement and Cohen's kappa over doubly-annotated pairs.

    ``annotations`` holds (pair id, annotator id, choice) rows. Only pairs
    with exactly two annotations from distinct annotators are used; the
    rest are excluded and counted. Within a pair, rater slots are assigned
    by ascending annotator id so marginals are well defined.
    """
    by_pair: dict[str, list[tuple[str, str]]] = defaultdict(list)
    for pair_id, annotator_id, choice in annotations:
        by_pair[pair_id].append((annotator_id, choice))
    slot_1: list[str] = []
    slot_2: list[str] = []
    excluded = 0
    for pair_id, rows in by_pair.items():
        if len(rows) != 2 or rows[0][0] == rows[1][0]:
            excluded += 1
            continue
        first, second = sorted(rows)
        slot_1.append(first[1])
        slot_2.append(second[1])
    if not slot_1:
        raise DataError("no pair has exactly two annotations")
    n = len(slot_1)
    observed = sum(a == b for a, b in zip(slot_1, slot_2)) / n
    marginals_1 = Counter(slot_1)
    marginals_2 = Counter(slot_2)
    chance = sum(
        (marginals_1[category] / n) * (marginals_2[category] / n)
        for category in set(marginals_1) | set(marginals_2)
    )
    if chance >= 1.0:
        kappa = 1.0 if observed == 1.0 else 0.0
    else:
        kappa = (observed - chance) / (1.0 - chance)
    return AgreementReport(
        percent_agreement=observed,
        cohens_kappa=kappa,
        pairs_used=n,
        pairs_excluded=excluded,
    )
