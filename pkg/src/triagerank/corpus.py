"""Canonical data model and JSONL ingestion for patient messages.

A corpus file is UTF-8 line-delimited JSON, one message per line, with
fields ``id``, ``text``, ``label``, ``source`` and optional ``ehr`` and
``clinician_response``. Loading validates the whole file and rejects it on
the first malformed line, reporting the line number.

All types here are frozen: values are safe to share across concurrent
consumers after load.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    BadLabel,
    ConfigError,
    DuplicateId,
    EmptyMessage,
    MalformedRecord,
)

logger = logging.getLogger(__name__)


class UrgencyLabel(Enum):
    """Six ordered urgency levels plus two non-ordinal filtration sentinels.

    L1 is most urgent (emergency attention needed), L6 least urgent (no
    medical attention needed). UNCLEAR and SUPPORTIVE_CARE never enter
    pair or triplet generation.
    """

    L1 = "L1"
    L2 = "L2"
    L3 = "L3"
    L4 = "L4"
    L5 = "L5"
    L6 = "L6"
    UNCLEAR = "UNCLEAR"
    SUPPORTIVE_CARE = "SUPPORTIVE_CARE"

    @property
    def is_ordinal(self) -> bool:
        return self not in (UrgencyLabel.UNCLEAR, UrgencyLabel.SUPPORTIVE_CARE)

    @property
    def level(self) -> int:
        """Numeric level 1..6; lower means more urgent."""
        if not self.is_ordinal:
            raise BadLabel(f"{self.value} has no ordinal level")
        return int(self.value[1])

    @classmethod
    def from_token(cls, token: str) -> "UrgencyLabel":
        try:
            return cls(token)
        except ValueError:
            raise BadLabel(f"unknown label token {token!r}") from None


ORDINAL_LABELS: tuple[UrgencyLabel, ...] = tuple(
    label for label in UrgencyLabel if label.is_ordinal
)
SENTINEL_LABELS: tuple[UrgencyLabel, ...] = (
    UrgencyLabel.UNCLEAR,
    UrgencyLabel.SUPPORTIVE_CARE,
)


def label_for_level(level: int) -> UrgencyLabel:
    """Inverse of ``UrgencyLabel.level`` for 1..6."""
    if not 1 <= level <= 6:
        raise BadLabel(f"no urgency label for level {level}")
    return UrgencyLabel(f"L{level}")


class Gender(Enum):
    MALE = "male"
    FEMALE = "female"
    OTHER = "other"
    UNKNOWN = "unknown"


class Source(Enum):
    REDDIT = "reddit"
    SYNTH = "synth"
    REAL = "real"
    SYNTHETIC_TEST = "synthetic_test"


@dataclass(frozen=True)
class EhrRecord:
    """Structured patient context attached to a message.

    Lists may be empty. Age is whole years, 0..150. Demographics live here
    because bias stratification reads them; messages without an EHR are
    excluded from stratification rather than defaulted.
    """

    problem_list: tuple[str, ...] = ()
    recent_diagnoses: tuple[str, ...] = ()
    active_medications: tuple[str, ...] = ()
    age: int = 0
    gender: Gender = Gender.UNKNOWN

    def __post_init__(self):
        for name in ("problem_list", "recent_diagnoses", "active_medications"):
            value = getattr(self, name)
            if not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))
        if not isinstance(self.age, int) or isinstance(self.age, bool):
            raise MalformedRecord(f"ehr age must be an integer, got {self.age!r}")
        if not 0 <= self.age <= 150:
            raise MalformedRecord(f"ehr age out of range: {self.age}")

    def to_record(self) -> dict:
        return {
            "problem_list": list(self.problem_list),
            "recent_diagnoses": list(self.recent_diagnoses),
            "active_medications": list(self.active_medications),
            "age": self.age,
            "gender": self.gender.value,
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "EhrRecord":
        try:
            gender = Gender(record.get("gender", "unknown"))
        except ValueError:
            raise MalformedRecord(f"unknown gender {record.get('gender')!r}") from None

        def _strings(name: str) -> tuple[str, ...]:
            value = record.get(name, ())
            if isinstance(value, str) or not isinstance(value, (list, tuple)):
                raise MalformedRecord(f"ehr field {name!r} must be a string array")
            return tuple(str(item) for item in value)

        return cls(
            problem_list=_strings("problem_list"),
            recent_diagnoses=_strings("recent_diagnoses"),
            active_medications=_strings("active_medications"),
            age=record.get("age", 0),
            gender=gender,
        )


@dataclass(frozen=True)
class Message:
    """One patient query, optionally with EHR context and a clinician reply."""

    id: str
    text: str
    ehr: EhrRecord | None = None
    clinician_response: str | None = None
    source: Source = Source.SYNTHETIC_TEST

    def __post_init__(self):
        if not self.id or not str(self.id).strip():
            raise MalformedRecord("message id must be a non-empty string")
        if not self.text or not self.text.strip():
            raise EmptyMessage(f"message {self.id!r} has empty text")

    def to_record(self) -> dict:
        record: dict = {"id": self.id, "text": self.text, "source": self.source.value}
        if self.ehr is not None:
            record["ehr"] = self.ehr.to_record()
        if self.clinician_response is not None:
            record["clinician_response"] = self.clinician_response
        return record

    @classmethod
    def from_record(cls, record: Mapping) -> "Message":
        for field in ("id", "text"):
            if field not in record:
                raise MalformedRecord(f"record is missing field {field!r}")
        if not isinstance(record["text"], str):
            raise MalformedRecord("field 'text' must be a string")
        try:
            source = Source(record.get("source", "synthetic_test"))
        except ValueError:
            raise MalformedRecord(f"unknown source {record.get('source')!r}") from None
        ehr = record.get("ehr")
        if ehr is not None and not isinstance(ehr, Mapping):
            raise MalformedRecord("field 'ehr' must be an object")
        response = record.get("clinician_response")
        if response is not None and not isinstance(response, str):
            raise MalformedRecord("field 'clinician_response' must be a string")
        return cls(
            id=str(record["id"]),
            text=record["text"],
            ehr=EhrRecord.from_record(ehr) if ehr is not None else None,
            clinician_response=response,
            source=source,
        )


@dataclass(frozen=True)
class LabeledMessage:
    """A message plus its urgency label.

    Only L1..L6 labels may enter the pair/triplet pipeline; use
    ``filter_ordinal`` to drop sentinel-labeled records first.
    """

    message: Message
    label: UrgencyLabel

    @property
    def id(self) -> str:
        return self.message.id

    @property
    def level(self) -> int:
        return self.label.level

    def to_record(self) -> dict:
        record = self.message.to_record()
        record["label"] = self.label.value
        return record

    @classmethod
    def from_record(cls, record: Mapping) -> "LabeledMessage":
        if "label" not in record:
            raise MalformedRecord("record is missing field 'label'")
        return cls(
            message=Message.from_record(record),
            label=UrgencyLabel.from_token(record["label"]),
        )


def _iter_jsonl(path: Path) -> Iterable[tuple[int, dict]]:
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(
                    f"line {line_number}: invalid JSON ({exc.msg})", line=line_number
                ) from None
            if not isinstance(record, dict):
                raise MalformedRecord(
                    f"line {line_number}: record is not an object", line=line_number
                )
            yield line_number, record


def load_corpus(path: str | Path, format: str = "jsonl") -> list[LabeledMessage]:
    """Load and validate a labeled corpus file.

    The whole file is rejected on any malformed line. Raises DuplicateId,
    BadLabel, EmptyMessage or MalformedRecord with a ``line`` attribute.
    """
    if format != "jsonl":
        raise ConfigError(f"unsupported corpus format {format!r}")
    path = Path(path)
    records: list[LabeledMessage] = []
    seen: set[str] = set()
    for line_number, record in _iter_jsonl(path):
        try:
            labeled = LabeledMessage.from_record(record)
        except (BadLabel, EmptyMessage, MalformedRecord) as exc:
            raise type(exc)(f"line {line_number}: {exc}", line=line_number) from None
        if labeled.id in seen:
            raise DuplicateId(
                f"line {line_number}: duplicate id {labeled.id!r}",
                line=line_number,
                message_id=labeled.id,
            )
        seen.add(labeled.id)
        records.append(labeled)
    return records


def load_messages(path: str | Path) -> list[Message]:
    """Load a message file, ignoring any label field (for auto-labeling)."""
    path = Path(path)
    messages: list[Message] = []
    seen: set[str] = set()
    for line_number, record in _iter_jsonl(path):
        try:
            message = Message.from_record(record)
        except (EmptyMessage, MalformedRecord) as exc:
            raise type(exc)(f"line {line_number}: {exc}", line=line_number) from None
        if message.id in seen:
            raise DuplicateId(
                f"line {line_number}: duplicate id {message.id!r}",
                line=line_number,
                message_id=message.id,
            )
        seen.add(message.id)
        messages.append(message)
    return messages


def save_corpus(records: Iterable[LabeledMessage], path: str | Path) -> int:
    """Write a labeled corpus as JSONL; returns the record count.

    Output is deterministic (sorted keys), so load -> save -> load
    round-trips to an identical corpus.
    """
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for labeled in records:
            handle.write(json.dumps(labeled.to_record(), sort_keys=True) + "\n")
            count += 1
    return count


def split_ordinal(
    corpus: Sequence[LabeledMessage],
) -> tuple[list[LabeledMessage], Counter]:
    """Split a corpus into ordinal records and per-sentinel removal counts."""
    kept: list[LabeledMessage] = []
    removed: Counter = Counter()
    for labeled in corpus:
        if labeled.label.is_ordinal:
            kept.append(labeled)
        else:
            removed[labeled.label] += 1
    return kept, removed


def filter_ordinal(corpus: Sequence[LabeledMessage]) -> list[LabeledMessage]:
    """Drop UNCLEAR and SUPPORTIVE_CARE records, preserving order.

    Removal counts per sentinel are logged; use ``split_ordinal`` to get
    them programmatically.
    """
    kept, removed = split_ordinal(corpus)
    for sentinel in SENTINEL_LABELS:
        if removed[sentinel]:
            logger.info("filtered %d %s records", removed[sentinel], sentinel.value)
    return kept


def labels_by_id(corpus: Iterable[LabeledMessage]) -> dict[str, UrgencyLabel]:
    return {labeled.id: labeled.label for labeled in corpus}


def by_level(corpus: Iterable[LabeledMessage]) -> dict[int, list[LabeledMessage]]:
    """Bucket ordinal records by numeric level; sentinels are skipped."""
    buckets: dict[int, list[LabeledMessage]] = {}
    for labeled in corpus:
        if labeled.label.is_ordinal:
            buckets.setdefault(labeled.level, []).append(labeled)
    return buckets


def fixture_corpus_path() -> Path:
    """Path of the bundled 30-message synthetic fixture (5 per level)."""
    return Path(
        str(resources.files("triagerank").joinpath("data/fixture_corpus.jsonl"))
    )


def load_fixture_corpus() -> list[LabeledMessage]:
    return load_corpus(fixture_corpus_path())
