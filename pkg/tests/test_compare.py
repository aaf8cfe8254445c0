from __future__ import annotations

import math
import random

import pytest

from triagerank.compare import (
    ComparisonCache,
    DirectionScore,
    ScoreKind,
    Winner,
    cached,
    compare,
    logprob_comparator,
    noisy_oracle,
    parse_final_answer,
    perfect_oracle,
    reasoning_comparator,
    reward_comparator,
)
from triagerank.errors import (
    BadScore,
    ComparisonFailed,
    ConfigError,
    OracleNeedsLabels,
    UnparseableAnswer,
    UnparseableLogprobs,
)

from .conftest import make_labeled, make_message
from .test_gateway import config_for


class ScriptedComparator:
    """Returns fixed directed scores from a (existing_id, new_id) table."""

    def __init__(self, table, kind=ScoreKind.PROBABILITY):
        self.table = table
        self.kind = kind
        self.calls = 0

    def score_directed(self, existing, new):
        self.calls += 1
        return DirectionScore(self.table[(existing.id, new.id)], self.kind)


def test_eta_formula_probability():
    comparator = ScriptedComparator({("a", "b"): 0.9, ("b", "a"): 0.2})
    outcome = compare(comparator, make_message("a"), make_message("b"))
    assert outcome.eta == pytest.approx(0.7)
    assert outcome.winner is Winner.B


def test_eta_symmetry_tie():
    comparator = ScriptedComparator({("a", "b"): 0.5, ("b", "a"): 0.5})
    outcome = compare(comparator, make_message("a"), make_message("b"))
    assert outcome.eta == 0.0
    assert outcome.winner is Winner.TIE


def test_reward_eta_logistic_normalization():
    comparator = ScriptedComparator(
        {("a", "b"): 2.0, ("b", "a"): -1.0}, kind=ScoreKind.REWARD
    )
    outcome = compare(comparator, make_message("a"), make_message("b"))
    # independent oracle: sigma(3) - sigma(-3) computed from the definition
    expected = 1.0 / (1.0 + math.exp(-3.0)) - 1.0 / (1.0 + math.exp(3.0))
    assert outcome.eta == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.905, abs=5e-4)
    assert outcome.winner is Winner.B
    assert abs(outcome.eta) <= 1.0


def test_swap_negates_eta_exactly():
    rng = random.Random(11)
    for _ in range(200):
        s_ab, s_ba = rng.random(), rng.random()
        comparator = ScriptedComparator({("a", "b"): s_ab, ("b", "a"): s_ba})
        a, b = make_message("a"), make_message("b")
        forward = compare(comparator, a, b)
        backward = compare(comparator, b, a)
        assert backward.eta == -forward.eta
        if forward.winner is Winner.TIE:
            assert backward.winner is Winner.TIE
        else:
            assert {forward.winner, backward.winner} == {Winner.A, Winner.B}


def test_reward_eta_bounded_for_large_scores():
    rng = random.Random(3)
    for _ in range(200):
        s_ab = rng.uniform(-50, 50)
        s_ba = rng.uniform(-50, 50)
        comparator = ScriptedComparator(
            {("a", "b"): s_ab, ("b", "a"): s_ba}, kind=ScoreKind.REWARD
        )
        outcome = compare(comparator, make_message("a"), make_message("b"))
        assert abs(outcome.eta) <= 1.0
        if s_ab > s_ba:
            assert outcome.winner is Winner.B
        elif s_ab < s_ba:
            assert outcome.winner is Winner.A
        else:
            assert outcome.winner is Winner.TIE


def test_mixed_kinds_fail():
    class Mixed:
        def __init__(self):
            self.kinds = [ScoreKind.PROBABILITY, ScoreKind.REWARD]

        def score_directed(self, existing, new):
            return DirectionScore(0.5, self.kinds.pop(0))

    with pytest.raises(ComparisonFailed):
        compare(Mixed(), make_message("a"), make_message("b"))


def test_compare_same_id_rejected():
    comparator = ScriptedComparator({})
    with pytest.raises(ConfigError):
        compare(comparator, make_message("a"), make_message("a"))


def test_probability_score_bounds():
    with pytest.raises(BadScore):
        DirectionScore(1.2, ScoreKind.PROBABILITY)
    with pytest.raises(BadScore):
        DirectionScore(float("nan"), ScoreKind.REWARD)


# -------------------------------------------------------------------- oracle


def test_perfect_oracle_agrees_with_gold(fixture_corpus):
    oracle = perfect_oracle(fixture_corpus)
    by_id = {labeled.id: labeled for labeled in fixture_corpus}
    for a_id, b_id in [("m01", "m30"), ("m06", "m02"), ("m11", "m16"), ("m21", "m14")]:
        a, b = by_id[a_id], by_id[b_id]
        outcome = compare(oracle, a.message, b.message)
        expected = Winner.A if a.level < b.level else Winner.B
        assert outcome.winner is expected


def test_oracle_same_level_is_tie(fixture_corpus):
    oracle = perfect_oracle(fixture_corpus)
    by_id = {labeled.id: labeled for labeled in fixture_corpus}
    outcome = compare(oracle, by_id["m01"].message, by_id["m02"].message)
    assert outcome.winner is Winner.TIE


def test_oracle_emits_calibrated_margin(fixture_corpus):
    oracle = noisy_oracle(fixture_corpus, margin=0.4)
    by_id = {labeled.id: labeled for labeled in fixture_corpus}
    score = oracle.score_directed(by_id["m30"].message, by_id["m01"].message)
    assert score.value == 0.9
    score = oracle.score_directed(by_id["m01"].message, by_id["m30"].message)
    assert score.value == pytest.approx(0.1)


def test_oracle_needs_labels(fixture_corpus):
    oracle = perfect_oracle(fixture_corpus)
    with pytest.raises(ComparisonFailed):
        compare(oracle, make_message("stranger"), fixture_corpus[0].message)
    with pytest.raises(OracleNeedsLabels):
        oracle.score_directed(make_message("stranger"), fixture_corpus[0].message)


def test_oracle_flip_half_gives_coin_accuracy():
    correct = 0
    trials = 10_000
    for index in range(trials):
        high = make_labeled(f"hp{index}", 1)
        low = make_labeled(f"lp{index}", 6)
        oracle = noisy_oracle([high, low], {5: 0.5}, seed=42)
        outcome = compare(oracle, high.message, low.message)
        correct += outcome.winner is Winner.A
    assert correct / trials == pytest.approx(0.5, abs=0.02)


def test_oracle_deterministic_and_order_invariant():
    a = make_labeled("a", 1)
    b = make_labeled("b", 4)
    first = noisy_oracle([a, b], {3: 0.5}, seed=9)
    second = noisy_oracle([a, b], {3: 0.5}, seed=9)
    outcome_1 = compare(first, a.message, b.message)
    outcome_2 = compare(second, b.message, a.message)
    assert outcome_1.winner.value == {"A": "B", "B": "A"}[outcome_2.winner.value]
    assert outcome_1.eta == -outcome_2.eta


def test_oracle_flip_probability_validation():
    with pytest.raises(ConfigError):
        noisy_oracle([make_labeled("a", 1)], {1: 1.5})
    with pytest.raises(ConfigError):
        noisy_oracle([make_labeled("a", 1)], margin=0.6)


# -------------------------------------------------- gateway-backed comparators


def test_logprob_comparator_scores(mock_endpoint):
    comparator = logprob_comparator(config_for(mock_endpoint))
    mock_endpoint.enqueue_fixture("logprob_top2")
    score = comparator.score_directed(make_message("a"), make_message("b"))
    assert score.value == pytest.approx(0.8, abs=1e-9)
    assert score.kind is ScoreKind.PROBABILITY
    prompt = mock_endpoint.requests[0]["body"]["messages"][1]["content"]
    assert "Existing Patient" in prompt


def test_logprob_comparator_unparseable(mock_endpoint):
    comparator = logprob_comparator(config_for(mock_endpoint))
    mock_endpoint.enqueue_fixture("logprob_unparseable")
    with pytest.raises(UnparseableLogprobs):
        comparator.score_directed(make_message("a"), make_message("b"))


def test_logprob_comparator_backend_down_fails_comparison(mock_endpoint):
    comparator = logprob_comparator(config_for(mock_endpoint, max_retries=0))
    mock_endpoint.enqueue(500, {"error": "down"})
    with pytest.raises(ComparisonFailed):
        compare(comparator, make_message("a"), make_message("b"))


def test_parse_final_answer():
    assert parse_final_answer("thinking... therefore YES") == "YES"
    assert parse_final_answer("NO") == "NO"
    assert parse_final_answer("yes at first, but finally no") == "NO"
    with pytest.raises(UnparseableAnswer):
        parse_final_answer("I cannot decide.")
    with pytest.raises(UnparseableAnswer):
        parse_final_answer("NOTED")  # no standalone token


def test_reasoning_comparator_hard_probabilities(mock_endpoint):
    comparator = reasoning_comparator(config_for(mock_endpoint))
    mock_endpoint.enqueue_fixture("completion_reason_yes")
    assert comparator.score_directed(make_message("a"), make_message("b")).value == 1.0
    mock_endpoint.enqueue_fixture("completion_reason_no")
    assert comparator.score_directed(make_message("a"), make_message("b")).value == 0.0


def test_reasoning_both_yes_is_tie(mock_endpoint):
    comparator = reasoning_comparator(config_for(mock_endpoint))
    mock_endpoint.enqueue_fixture("completion_reason_yes")
    mock_endpoint.enqueue_fixture("completion_reason_yes")
    outcome = compare(comparator, make_message("a"), make_message("b"))
    assert outcome.winner is Winner.TIE
    assert outcome.eta == 0.0


def test_reasoning_unparseable(mock_endpoint):
    comparator = reasoning_comparator(config_for(mock_endpoint))
    mock_endpoint.enqueue_fixture("completion_reason_plain")
    with pytest.raises(UnparseableAnswer):
        comparator.score_directed(make_message("a"), make_message("b"))


def test_reward_comparator_prompt_and_score(mock_endpoint):
    comparator = reward_comparator(config_for(mock_endpoint))
    mock_endpoint.enqueue_fixture("reward_ok")
    existing = make_message("a", text="mild rash on arm")
    new = make_message("b", text="chest pain radiating")
    score = comparator.score_directed(existing, new)
    assert score.value == 1.25
    assert score.kind is ScoreKind.REWARD
    body = mock_endpoint.requests[0]["body"]
    assert "mild rash on arm" in body["prompt"]
    assert body["completion"] == "chest pain radiating"


def test_reward_strict_comparison_no_epsilon(mock_endpoint):
    comparator = reward_comparator(config_for(mock_endpoint))
    mock_endpoint.enqueue_fixture("reward_strict_a")
    mock_endpoint.enqueue_fixture("reward_strict_b")
    outcome = compare(comparator, make_message("a"), make_message("b"))
    # s_ab = 0.1 < s_ba = 0.1000001, strictly: the first argument wins
    assert outcome.winner is Winner.A


def test_reward_equal_scores_tie(mock_endpoint):
    comparator = reward_comparator(config_for(mock_endpoint))
    mock_endpoint.enqueue_fixture("reward_ok")
    mock_endpoint.enqueue_fixture("reward_ok")
    outcome = compare(comparator, make_message("a"), make_message("b"))
    assert outcome.winner is Winner.TIE


# --------------------------------------------------------------------- cache


class CountingComparator:
    def __init__(self, inner):
        self.inner = inner
        self.backend_calls = 0

    def score_directed(self, existing, new):
        self.backend_calls += 1
        return self.inner.score_directed(existing, new)


def test_cache_hit_skips_backend(tmp_path, fixture_corpus):
    counting = CountingComparator(perfect_oracle(fixture_corpus))
    store = ComparisonCache(tmp_path / "cache.jsonl")
    comparator = cached(counting, store)
    a, b = fixture_corpus[0].message, fixture_corpus[7].message
    first = compare(comparator, a, b)
    assert counting.backend_calls == 2
    second = compare(comparator, a, b)
    assert counting.backend_calls == 2
    assert second.eta == first.eta
    assert second.winner is first.winner
    assert comparator.hits == 2
    assert comparator.misses == 2


def test_cache_key_is_direction_sensitive(tmp_path, fixture_corpus):
    counting = CountingComparator(perfect_oracle(fixture_corpus))
    comparator = cached(counting, ComparisonCache(tmp_path / "cache.jsonl"))
    a, b = fixture_corpus[0].message, fixture_corpus[7].message
    comparator.score_directed(a, b)
    assert counting.backend_calls == 1
    comparator.score_directed(b, a)
    assert counting.backend_calls == 2


def test_cache_cleared_behaves_like_uncached(tmp_path, fixture_corpus):
    oracle = perfect_oracle(fixture_corpus)
    store = ComparisonCache(tmp_path / "cache.jsonl")
    comparator = cached(CountingComparator(oracle), store)
    a, b = fixture_corpus[0].message, fixture_corpus[7].message
    cached_outcome = compare(comparator, a, b)
    store.clear()
    fresh_outcome = compare(cached(CountingComparator(oracle), store), a, b)
    plain_outcome = compare(oracle, a, b)
    assert cached_outcome.eta == fresh_outcome.eta == plain_outcome.eta


def test_cache_persists_across_instances(tmp_path, fixture_corpus):
    path = tmp_path / "cache.jsonl"
    counting = CountingComparator(perfect_oracle(fixture_corpus))
    a, b = fixture_corpus[0].message, fixture_corpus[7].message
    compare(cached(counting, ComparisonCache(path)), a, b)
    assert counting.backend_calls == 2
    reopened = cached(counting, ComparisonCache(path))
    compare(reopened, a, b)
    assert counting.backend_calls == 2
    assert reopened.hits == 2


def test_cache_corruption_falls_back_and_compacts(tmp_path, fixture_corpus, caplog):
    path = tmp_path / "cache.jsonl"
    counting = CountingComparator(perfect_oracle(fixture_corpus))
    a, b = fixture_corpus[0].message, fixture_corpus[7].message
    compare(cached(counting, ComparisonCache(path)), a, b)
    with path.open("a", encoding="utf-8") as handle:
        handle.write("{corrupt line\n")
    with caplog.at_level("WARNING"):
        store = ComparisonCache(path)
    assert any("CacheInvalid" in record.message for record in caplog.records)
    assert len(store) == 2
    # compaction rewrote the file without the corrupt line
    reloaded = ComparisonCache(path)
    assert len(reloaded) == 2
    compare(cached(counting, reloaded), a, b)
    assert counting.backend_calls == 2  # still served from cache


def test_cache_unreadable_file_starts_empty(tmp_path, caplog):
    path = tmp_path / "cache.jsonl"
    path.write_bytes(b"\xff\xfe garbage \x00")
    with caplog.at_level("WARNING"):
        store = ComparisonCache(path)
    assert len(store) == 0
    assert any("CacheInvalid" in record.message for record in caplog.records)


def test_cached_scores_lose_only_raw_payload(tmp_path, fixture_corpus):
    store = ComparisonCache(tmp_path / "cache.jsonl")
    comparator = cached(perfect_oracle(fixture_corpus), store)
    a, b = fixture_corpus[0].message, fixture_corpus[7].message
    fresh = comparator.score_directed(a, b)
    again = comparator.score_directed(a, b)
    assert again.value == fresh.value
    assert again.kind is fresh.kind
