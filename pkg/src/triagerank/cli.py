"""Unified command-line entry point.

One subcommand per pipeline stage plus ``pipeline`` for an end-to-end
run. Reports are machine-first JSON; every report embeds the seed, a hash
of the resolved configuration, the comparator identity, and the prompt
catalog version. Exit codes: 0 success, 2 config error, 3 data error,
4 backend error, 5 internal.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import annotate, gateway, metrics, prompts, rank
from .compare import (
    Comparator,
    ComparisonCache,
    cached,
    compare,
    logprob_comparator,
    noisy_oracle,
    reasoning_comparator,
    reward_comparator,
)
from .corpus import (
    LabeledMessage,
    UrgencyLabel,
    labels_by_id,
    load_corpus,
    load_messages,
    save_corpus,
    split_ordinal,
)
from .errors import ConfigError, DataError, TriageRankError, exit_code_for
from .pairs import (
    Difficulty,
    InboxSpec,
    build_eval_pairs,
    build_triplets,
    export_reward,
    export_sft,
    assemble_inbox,
    read_eval_pairs,
    read_triplets,
    write_eval_pairs,
    write_triplets,
)

COMPARATOR_CHOICES = ("oracle", "logprob", "reasoning", "reward")


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _write_report(path: Path, payload: dict) -> None:
    path.write_text(_dump_json(payload), encoding="utf-8")


def _envelope(seed: int, config_hash: str, comparator_identity: str) -> dict:
    return {
        "seed": seed,
        "config_hash": config_hash,
        "comparator": comparator_identity,
        "prompt_catalog_version": prompts.CATALOG_VERSION,
    }


def _args_hash(args: argparse.Namespace) -> str:
    relevant = {
        key: str(value)
        for key, value in sorted(vars(args).items())
        if key != "func"
    }
    return _sha256_text(json.dumps(relevant, sort_keys=True))


def _parse_flip(text: str) -> dict[int, float]:
    """Parse a gap:probability list like '1:0.3,2:0.15'."""
    flip: dict[int, float] = {}
    if not text:
        return flip
    for chunk in text.split(","):
        try:
            gap, probability = chunk.split(":")
            flip[int(gap)] = float(probability)
        except ValueError:
            raise ConfigError(f"bad flip entry {chunk!r}, expected gap:prob") from None
    return flip


def _parse_counts(text: str) -> tuple[int, ...]:
    try:
        counts = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"bad counts {text!r}, expected e.g. 5,5,5,5,5,5") from None
    return counts


def _parse_quotas(text: str) -> dict[Difficulty, int]:
    quotas: dict[Difficulty, int] = {}
    for chunk in text.split(","):
        try:
            name, count = chunk.split(":")
            quotas[Difficulty(name.strip())] = int(count)
        except ValueError:
            raise ConfigError(
                f"bad quota entry {chunk!r}, expected difficulty:count"
            ) from None
    return quotas


def _parse_ks(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"bad k list {text!r}, expected e.g. 10,30") from None


def _endpoint_config(args: argparse.Namespace) -> gateway.EndpointConfig:
    if not getattr(args, "model", None):
        raise ConfigError(f"comparator {args.comparator!r} needs --model")
    return gateway.config_from_env(
        model_name=args.model, base_url=getattr(args, "base_url", None)
    )


def _build_comparator(
    args: argparse.Namespace, labeled: Sequence[LabeledMessage]
) -> Comparator:
    name = args.comparator
    if name == "oracle":
        comparator: Comparator = noisy_oracle(
            labels_by_id(labeled),
            _parse_flip(getattr(args, "flip", "") or ""),
            seed=args.seed,
            margin=getattr(args, "margin", 0.4),
        )
    elif name == "logprob":
        comparator = logprob_comparator(_endpoint_config(args))
    elif name == "reasoning":
        comparator = reasoning_comparator(_endpoint_config(args))
    elif name == "reward":
        comparator = reward_comparator(_endpoint_config(args))
    else:
        raise ConfigError(f"unknown comparator {name!r}")
    cache_path = getattr(args, "cache", None)
    if cache_path:
        comparator = cached(comparator, ComparisonCache(cache_path))
    return comparator


def _identity(comparator: Comparator) -> str:
    return getattr(comparator, "cache_identity", type(comparator).__name__)


# ----------------------------------------------------------------------
# subcommands


def cmd_load_validate(args: argparse.Namespace) -> int:
    records = load_corpus(args.corpus)
    counts = {label.value: 0 for label in UrgencyLabel}
    for labeled in records:
        counts[labeled.label.value] += 1
    print(f"{args.corpus}: {len(records)} records valid")
    for token, count in counts.items():
        if count:
            print(f"  {token}: {count}")
    return 0


def cmd_auto_label(args: argparse.Namespace) -> int:
    messages = load_messages(args.messages)
    labeled = annotate.auto_label_corpus(messages, annotate.KeywordResponseClassifier())
    written = save_corpus(labeled, args.out)
    skipped = len(messages) - len(labeled)
    print(f"labeled {written} messages -> {args.out} ({skipped} skipped, no response)")
    return 0


def cmd_build_pairs(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    quotas = _parse_quotas(args.quotas) if args.quotas else None
    eval_pairs = build_eval_pairs(corpus, args.count, args.seed, quotas)
    written = write_eval_pairs(eval_pairs, args.out)
    print(f"wrote {written} eval pairs -> {args.out}")
    return 0


def cmd_build_triplets(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    triplets = build_triplets(corpus, args.cap, args.seed, args.count)
    written = write_triplets(triplets, args.out)
    print(f"wrote {written} triplets -> {args.out}")
    return 0


def _triplets_from_args(args: argparse.Namespace):
    if args.triplets:
        return read_triplets(args.triplets)
    if not args.corpus:
        raise ConfigError("need --triplets or --corpus")
    return build_triplets(load_corpus(args.corpus), args.cap, args.seed, args.count)


def cmd_export_sft(args: argparse.Namespace) -> int:
    summary = export_sft(_triplets_from_args(args), args.out)
    print(f"wrote {summary.records} SFT records -> {summary.path}")
    return 0


def cmd_export_reward(args: argparse.Namespace) -> int:
    summary = export_reward(_triplets_from_args(args), args.out)
    print(f"wrote {summary.records} reward records -> {summary.path}")
    return 0


def cmd_assemble_inbox(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    spec = InboxSpec.from_counts(_parse_counts(args.spec), seed=args.seed)
    inbox = assemble_inbox(corpus, spec)
    written = save_corpus(inbox, args.out)
    print(f"assembled {written}-message inbox -> {args.out}")
    return 0


def _load_inbox(args: argparse.Namespace) -> list[LabeledMessage]:
    return load_corpus(args.inbox)


def cmd_rank_inbox(args: argparse.Namespace) -> int:
    inbox = _load_inbox(args)
    comparator = _build_comparator(args, inbox)
    result = rank.run_tournament([labeled.message for labeled in inbox], comparator)
    report = _envelope(args.seed, _args_hash(args), _identity(comparator))
    report["tournament"] = result.to_record()
    _write_report(Path(args.out), report)
    print(f"ranked {len(inbox)} messages -> {args.out}")
    print("  top of inbox:", ", ".join(result.ranking[:5]))
    return 0


def cmd_evaluate_intrinsic(args: argparse.Namespace) -> int:
    eval_pairs = read_eval_pairs(args.pairs)
    comparator = _build_comparator(
        args, [pair.a for pair in eval_pairs] + [pair.b for pair in eval_pairs]
    )
    report = metrics.intrinsic_accuracy(eval_pairs, comparator)
    payload = _envelope(args.seed, _args_hash(args), _identity(comparator))
    payload["intrinsic"] = report.to_record()
    _write_report(Path(args.out), payload)
    if args.table:
        print(_intrinsic_table(report))
    print(f"intrinsic accuracy {report.overall_accuracy:.4f} -> {args.out}")
    return 0


def _intrinsic_table(report: metrics.IntrinsicReport) -> str:
    columns = ["overall"] + [difficulty.value for difficulty in Difficulty]
    values = [f"{report.overall_accuracy:.3f}"]
    for difficulty in Difficulty:
        accuracy, n = report.per_difficulty.get(difficulty, (float("nan"), 0))
        values.append(f"{accuracy:.3f} (n={n})" if n else "-")
    width = max(len(c) for c in columns + values) + 2
    header = "".join(c.ljust(width) for c in columns)
    row = "".join(v.ljust(width) for v in values)
    return f"{header}\n{row}"


def _extrinsic_payload(
    result: rank.TournamentResult,
    labels: dict[str, UrgencyLabel],
    ks: Sequence[int],
    shuffles: int,
    seed: int,
) -> dict:
    sextiles = annotate.sextile_labels_from_winrate(
        [(message_id, result.scores[message_id]) for message_id in result.ranking]
    )
    class_groups = [
        [m for m in result.ranking if sextiles[m].level == level]
        for level in range(1, 7)
    ]
    by_k = {}
    for k in ks:
        mean, stddev = metrics.expected_t_ndcg(
            class_groups, labels, k=k, shuffles=shuffles, seed=seed
        )
        by_k[str(k)] = {
            "ndcg": metrics.ndcg_at_k(result.ranking, labels, k=k),
            "t_ndcg": metrics.t_ndcg_at_k(result.ranking, labels, k=k),
            "expected_t_ndcg_sextile": {"mean": mean, "stddev": stddev},
        }
    return {"at_k": by_k, "ties_encountered": result.ties_encountered}


def _extrinsic_table(extrinsic: dict) -> str:
    lines = ["k       NDCG@k    T-NDCG@k"]
    for k, values in sorted(extrinsic["at_k"].items(), key=lambda kv: int(kv[0])):
        lines.append(f"{k:<8}{values['ndcg']:<10.3f}{values['t_ndcg']:.3f}")
    return "\n".join(lines)


def cmd_evaluate_extrinsic(args: argparse.Namespace) -> int:
    inbox = _load_inbox(args)
    comparator = _build_comparator(args, inbox)
    result = rank.run_tournament([labeled.message for labeled in inbox], comparator)
    labels = labels_by_id(inbox)
    ks = [k for k in _parse_ks(args.ks) if k <= len(inbox)]
    payload = _envelope(args.seed, _args_hash(args), _identity(comparator))
    payload["extrinsic"] = _extrinsic_payload(
        result, labels, ks, args.shuffles, args.seed
    )
    payload["ranking"] = list(result.ranking)
    _write_report(Path(args.out), payload)
    if args.table:
        print(_extrinsic_table(payload["extrinsic"]))
    print(f"extrinsic report -> {args.out}")
    return 0


def cmd_bias_report(args: argparse.Namespace) -> int:
    eval_pairs = read_eval_pairs(args.pairs)
    comparator = _build_comparator(
        args, [pair.a for pair in eval_pairs] + [pair.b for pair in eval_pairs]
    )
    outcomes = [
        compare(comparator, pair.a.message, pair.b.message)
        for pair in eval_pairs
    ]
    report = metrics.bias_strata(eval_pairs, outcomes, metrics.BiasScheme(args.scheme))
    payload = _envelope(args.seed, _args_hash(args), _identity(comparator))
    payload["bias"] = report.to_record()
    _write_report(Path(args.out), payload)
    print(
        f"{args.scheme}: chi2={report.chi_square:.4f} p={report.p_value:.4f} "
        f"V={report.cramers_v:.4f} -> {args.out}"
    )
    return 0


def cmd_agreement(args: argparse.Namespace) -> int:
    rows = []
    with open(args.annotations, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                rows.append(
                    (record["pair_id"], record["annotator_id"], record["choice"])
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(
                    f"annotations line {line_number}: {exc}", line=line_number
                ) from None
    report = metrics.agreement(rows)
    payload = _envelope(args.seed, _args_hash(args), "n/a")
    payload["agreement"] = report.to_record()
    _write_report(Path(args.out), payload)
    print(
        f"agreement {report.percent_agreement:.4f}, "
        f"kappa {report.cohens_kappa:.4f} -> {args.out}"
    )
    return 0


# ----------------------------------------------------------------------
# pipeline


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration for one end-to-end pipeline run."""

    corpus: str
    out_dir: str
    seed: int = 0
    comparator: str = "oracle"
    flip: dict[int, float] = field(default_factory=dict)
    margin: float = 0.4
    pair_count: int = 60
    triplet_cap: int = 4
    inbox_counts: tuple[int, ...] = (5, 5, 5, 5, 5, 5)
    ks: tuple[int, ...] = (10, 30)
    shuffles: int = 1000
    auto_label: bool = False
    model: str | None = None
    base_url: str | None = None

    def canonical(self) -> dict:
        return {
            "corpus": self.corpus,
            "seed": self.seed,
            "comparator": self.comparator,
            "flip": {str(k): v for k, v in sorted(self.flip.items())},
            "margin": self.margin,
            "pair_count": self.pair_count,
            "triplet_cap": self.triplet_cap,
            "inbox_counts": list(self.inbox_counts),
            "ks": list(self.ks),
            "shuffles": self.shuffles,
            "auto_label": self.auto_label,
            "model": self.model,
        }

    @property
    def config_hash(self) -> str:
        return _sha256_text(json.dumps(self.canonical(), sort_keys=True))


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    settings: dict = {}
    if args.config:
        try:
            settings = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(settings, dict):
            raise ConfigError("config file must hold a JSON object")
        if "flip" in settings:
            settings["flip"] = {int(k): float(v) for k, v in settings["flip"].items()}
        for key in ("inbox_counts", "ks"):
            if key in settings:
                settings[key] = tuple(settings[key])
    overrides = {
        "corpus": args.corpus,
        "out_dir": args.out_dir,
        "seed": args.seed,
        "comparator": args.comparator,
        "model": args.model,
        "base_url": args.base_url,
    }
    for key, value in overrides.items():
        if value is not None:
            settings[key] = value
    if args.auto_label:
        settings["auto_label"] = True
    unknown = set(settings) - {f.name for f in RunConfig.__dataclass_fields__.values()}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "corpus" not in settings or "out_dir" not in settings:
        raise ConfigError("pipeline needs a corpus path and an output directory")
    try:
        return RunConfig(**settings)
    except TypeError as exc:
        raise ConfigError(f"bad pipeline config: {exc}") from None


class _StageFailure(Exception):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"pipeline failed at stage {stage!r}: {cause}")
        self.stage = stage
        self.cause = cause


def _run_stage(stage: str, func):
    try:
        return func()
    except _StageFailure:
        raise
    except OSError as exc:
        raise _StageFailure(stage, DataError(str(exc))) from exc
    except Exception as exc:
        raise _StageFailure(stage, exc) from exc


def run_pipeline(config: RunConfig) -> dict:
    """Execute load -> filter -> exports -> inbox -> tournament -> metrics.

    Artifacts land in config.out_dir; the returned manifest links each one
    by content hash. Partial artifacts are retained when a stage fails.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, Path] = {}

    def _artifact(name: str, path: Path) -> Path:
        artifacts[name] = path
        return path

    raw = _run_stage("load", lambda: load_corpus(config.corpus))

    def _filter_stage() -> list[LabeledMessage]:
        kept, removed = split_ordinal(raw)
        if config.auto_label:
            relabeled = annotate.auto_label_corpus(
                [labeled.message for labeled in kept],
                annotate.KeywordResponseClassifier(),
            )
            kept, _ = split_ordinal(relabeled)
        save_corpus(kept, _artifact("filtered_corpus", out_dir / "filtered.jsonl"))
        return kept

    corpus = _run_stage("filter", _filter_stage)

    def _pairs_stage():
        eval_pairs = build_eval_pairs(corpus, config.pair_count, config.seed)
        write_eval_pairs(eval_pairs, _artifact("eval_pairs", out_dir / "eval_pairs.jsonl"))
        return eval_pairs

    eval_pairs = _run_stage("pairs", _pairs_stage)

    def _triplets_stage():
        triplets = build_triplets(corpus, config.triplet_cap, config.seed)
        write_triplets(triplets, _artifact("triplets", out_dir / "triplets.jsonl"))
        return triplets

    triplets = _run_stage("triplets", _triplets_stage)
    _run_stage(
        "export_sft",
        lambda: export_sft(triplets, _artifact("sft", out_dir / "sft.jsonl")),
    )
    _run_stage(
        "export_reward",
        lambda: export_reward(triplets, _artifact("reward", out_dir / "reward.jsonl")),
    )

    def _inbox_stage():
        spec = InboxSpec.from_counts(config.inbox_counts, seed=config.seed)
        inbox = assemble_inbox(corpus, spec)
        save_corpus(inbox, _artifact("inbox", out_dir / "inbox.jsonl"))
        return inbox

    inbox = _run_stage("inbox", _inbox_stage)

    def _comparator_stage():
        namespace = argparse.Namespace(
            comparator=config.comparator,
            seed=config.seed,
            flip=",".join(f"{k}:{v}" for k, v in sorted(config.flip.items())),
            margin=config.margin,
            model=config.model,
            base_url=config.base_url,
            cache=None,
        )
        return _build_comparator(namespace, corpus)

    comparator = _run_stage("comparator", _comparator_stage)
    identity = _identity(comparator)
    envelope = _envelope(config.seed, config.config_hash, identity)

    def _tournament_stage():
        result = rank.run_tournament([labeled.message for labeled in inbox], comparator)
        report = dict(envelope)
        report["tournament"] = result.to_record()
        _write_report(_artifact("ranking", out_dir / "ranking.json"), report)
        return result

    result = _run_stage("tournament", _tournament_stage)

    def _metrics_stage():
        intrinsic = metrics.intrinsic_accuracy(eval_pairs, comparator)
        intrinsic_report = dict(envelope)
        intrinsic_report["intrinsic"] = intrinsic.to_record()
        _write_report(_artifact("intrinsic", out_dir / "intrinsic.json"), intrinsic_report)
        labels = labels_by_id(inbox)
        ks = [k for k in config.ks if k <= len(inbox)]
        extrinsic_report = dict(envelope)
        extrinsic_report["extrinsic"] = _extrinsic_payload(
            result, labels, ks, config.shuffles, config.seed
        )
        extrinsic_report["ranking"] = list(result.ranking)
        _write_report(_artifact("extrinsic", out_dir / "extrinsic.json"), extrinsic_report)
        return intrinsic

    _run_stage("metrics", _metrics_stage)

    def _manifest_stage() -> dict:
        manifest = dict(envelope)
        manifest["config"] = config.canonical()
        manifest["artifacts"] = {
            name: {"path": path.name, "sha256": _sha256_file(path)}
            for name, path in sorted(artifacts.items())
        }
        _write_report(out_dir / "manifest.json", manifest)
        return manifest

    return _run_stage("manifest", _manifest_stage)


def cmd_pipeline(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    manifest = run_pipeline(config)
    print(f"pipeline complete -> {config.out_dir}")
    for name in sorted(manifest["artifacts"]):
        print(f"  {name}: {manifest['artifacts'][name]['path']}")
    return 0


# ----------------------------------------------------------------------
# parser


def _add_comparator_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--comparator", choices=COMPARATOR_CHOICES, default="oracle"
    )
    parser.add_argument("--flip", default="", help="oracle flip map, e.g. 1:0.3,2:0.15")
    parser.add_argument("--margin", type=float, default=0.4)
    parser.add_argument("--model", help="endpoint model name (remote comparators)")
    parser.add_argument("--base-url", help="endpoint base URL (remote comparators)")
    parser.add_argument("--cache", help="comparison cache file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="triagerank",
        description="Rank patient messages by medical urgency with pairwise comparators.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    def _sub(
        name: str, func, seed_default: int | None = 0, **kwargs
    ) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(name, **kwargs)
        sub.set_defaults(func=func)
        sub.add_argument("--seed", type=int, default=seed_default)
        return sub

    sub = _sub("load-validate", cmd_load_validate, help="validate a corpus file")
    sub.add_argument("--corpus", required=True)

    sub = _sub("auto-label", cmd_auto_label, help="label messages from clinician responses")
    sub.add_argument("--messages", required=True)
    sub.add_argument("--out", required=True)

    sub = _sub("build-pairs", cmd_build_pairs, help="sample evaluation pairs")
    sub.add_argument("--corpus", required=True)
    sub.add_argument("--count", type=int, default=100)
    sub.add_argument("--quotas", help="per-difficulty quotas, e.g. easy:10,hard:5")
    sub.add_argument("--out", required=True)

    sub = _sub("build-triplets", cmd_build_triplets, help="sample training triplets")
    sub.add_argument("--corpus", required=True)
    sub.add_argument("--cap", type=int, default=4)
    sub.add_argument("--count", type=int)
    sub.add_argument("--out", required=True)

    for name, func in (("export-sft", cmd_export_sft), ("export-reward", cmd_export_reward)):
        sub = _sub(name, func, help=f"write the {name.split('-')[1]} training export")
        sub.add_argument("--triplets", help="prebuilt triplets file")
        sub.add_argument("--corpus", help="corpus to draw triplets from instead")
        sub.add_argument("--cap", type=int, default=4)
        sub.add_argument("--count", type=int)
        sub.add_argument("--out", required=True)

    sub = _sub("assemble-inbox", cmd_assemble_inbox, help="draw a per-level inbox sample")
    sub.add_argument("--corpus", required=True)
    sub.add_argument("--spec", default="5,5,5,5,5,5", help="counts for L1..L6")
    sub.add_argument("--out", required=True)

    sub = _sub("rank-inbox", cmd_rank_inbox, help="run the pairwise tournament")
    sub.add_argument("--inbox", required=True)
    sub.add_argument("--out", required=True)
    _add_comparator_flags(sub)

    sub = _sub("evaluate-intrinsic", cmd_evaluate_intrinsic, help="pairwise accuracy")
    sub.add_argument("--pairs", required=True)
    sub.add_argument("--out", required=True)
    sub.add_argument("--table", action="store_true")
    _add_comparator_flags(sub)

    sub = _sub("evaluate-extrinsic", cmd_evaluate_extrinsic, help="inbox sorting quality")
    sub.add_argument("--inbox", required=True)
    sub.add_argument("--out", required=True)
    sub.add_argument("--ks", default="10,30")
    sub.add_argument("--shuffles", type=int, default=1000)
    sub.add_argument("--table", action="store_true")
    _add_comparator_flags(sub)

    sub = _sub("bias-report", cmd_bias_report, help="demographic stratification")
    sub.add_argument("--pairs", required=True)
    sub.add_argument(
        "--scheme",
        choices=[scheme.value for scheme in metrics.BiasScheme],
        default=metrics.BiasScheme.AGE_ORDERING.value,
    )
    sub.add_argument("--out", required=True)
    _add_comparator_flags(sub)

    sub = _sub("agreement", cmd_agreement, help="inter-annotator agreement")
    sub.add_argument("--annotations", required=True)
    sub.add_argument("--out", required=True)

    sub = _sub("pipeline", cmd_pipeline, seed_default=None, help="run every stage end to end")
    sub.add_argument("--config", help="JSON config file")
    sub.add_argument("--corpus")
    sub.add_argument("--out-dir")
    sub.add_argument("--comparator", choices=COMPARATOR_CHOICES)
    sub.add_argument("--model")
    sub.add_argument("--base-url")
    sub.add_argument("--auto-label", action="store_true")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _StageFailure as failure:
        print(failure, file=sys.stderr)
        return exit_code_for(failure.cause)
    except TriageRankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
