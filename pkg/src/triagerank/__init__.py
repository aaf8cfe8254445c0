"""Pairwise urgency ranking for patient message inboxes.

The library turns a labeled message corpus into evaluation pairs,
training triplets and exports, runs pairwise tournaments with pluggable
comparators, and scores the results with triage-aware ranking metrics.
"""

from .annotate import (
    JudgedPair,
    JudgeVariant,
    KeywordResponseClassifier,
    OrdinalPairJudge,
    Verdict,
    auto_label_corpus,
    filter_pairs,
    sextile_labels_from_winrate,
)
from .compare import (
    CachedComparator,
    Comparator,
    ComparisonCache,
    ComparisonOutcome,
    DirectionScore,
    NoisyOracleComparator,
    ScoreKind,
    Winner,
    cached,
    compare,
    logprob_comparator,
    noisy_oracle,
    perfect_oracle,
    reasoning_comparator,
    reward_comparator,
)
from .corpus import (
    EhrRecord,
    Gender,
    LabeledMessage,
    Message,
    Source,
    UrgencyLabel,
    filter_ordinal,
    labels_by_id,
    load_corpus,
    load_fixture_corpus,
    load_messages,
    save_corpus,
)
from .gateway import CompletionResult, EndpointConfig, complete, score
from .metrics import (
    AgreementReport,
    BiasReport,
    BiasScheme,
    IntrinsicReport,
    RelevanceMapping,
    agreement,
    bias_strata,
    chi_square_independence,
    expected_t_ndcg,
    intrinsic_accuracy,
    ndcg_at_k,
    t_ndcg_at_k,
)
from .pairs import (
    Difficulty,
    EvalPair,
    InboxSpec,
    Triplet,
    assemble_inbox,
    build_eval_pairs,
    build_triplets,
    export_reward,
    export_sft,
    make_eval_pair,
)
from .rank import TournamentResult, insert_incremental, run_tournament

__version__ = "0.1.0"
