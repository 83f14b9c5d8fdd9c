"""Domain types, dataset ingestion/persistence, and LF identifier preprocessing.

All record files are UTF-8 JSON lines, one record per line:

* dataset file:    ``{"id", "lf", "reference"?, "split"}``
* candidate file:  ``{"lf_id", "lf", "reference"?, "candidates": [{"text", "raw_count", "gen_logprob"}, ...]}``
* labels file:     ``{"lf_id", "labels": [0|1, ...]}``
* scores file:     ``{"lf_id", "metric", "scores": [float, ...]}``
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Any, Callable, Iterable, Iterator, Mapping


class DatasetError(ValueError):
    """A dataset or artifact file violates its schema or an invariant."""


class Split(str, Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


@dataclass(frozen=True)
class LogicalForm:
    """One LF record: identifier, LF text, and (optionally) its gold utterance."""

    id: str
    lf: str
    reference: str | None = None
    split: Split = Split.TRAIN

    def __post_init__(self) -> None:
        _require(bool(self.id), "LogicalForm.id must be non-empty")
        _require(bool(self.lf), "LogicalForm.lf must be non-empty")
        object.__setattr__(self, "split", Split(self.split))

    def require_reference(self) -> str:
        """Return the gold utterance, failing fast when it is absent."""
        if self.reference is None:
            raise DatasetError(f"LF {self.id!r} has no reference utterance")
        return self.reference


@dataclass(frozen=True)
class Candidate:
    """A generated utterance with its emission count and generator log-probability.

    ``raw_count`` is the number of times the generator emitted this exact text
    before deduplication; ``gen_logprob`` is the mean per-token log-probability
    the generator reported for it.
    """

    text: str
    raw_count: int = 1
    gen_logprob: float = 0.0

    def __post_init__(self) -> None:
        _require(bool(self.text), "Candidate.text must be non-empty")
        _require(int(self.raw_count) == self.raw_count and self.raw_count >= 1,
                 f"Candidate.raw_count must be a positive integer, got {self.raw_count!r}")


@dataclass(frozen=True)
class CandidateSet:
    """The n-best list for one LF: unique candidate texts, in generation order."""

    lf_id: str
    candidates: tuple[Candidate, ...]
    lf: str | None = None
    reference: str | None = None
    truncated: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "candidates", tuple(self.candidates))
        _require(len(self.candidates) >= 1, f"CandidateSet {self.lf_id!r} is empty")
        texts = [c.text for c in self.candidates]
        if len(set(texts)) != len(texts):
            dupes = sorted({t for t in texts if texts.count(t) > 1})
            raise ValueError(f"CandidateSet {self.lf_id!r} has duplicate candidate texts: {dupes}")

    def __len__(self) -> int:
        return len(self.candidates)

    @property
    def texts(self) -> tuple[str, ...]:
        return tuple(c.text for c in self.candidates)

    def require_lf(self) -> str:
        if self.lf is None:
            raise DatasetError(f"candidate set {self.lf_id!r} carries no LF text")
        return self.lf

    def require_reference(self) -> str:
        if self.reference is None:
            raise DatasetError(f"candidate set {self.lf_id!r} carries no reference utterance")
        return self.reference


@dataclass(frozen=True)
class QualityTable:
    """Per-candidate gold quality scores for one set, per metric and combined."""

    lf_id: str
    per_metric: Mapping[str, tuple[float, ...]]
    combined: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_metric",
                           {name: tuple(float(s) for s in vec) for name, vec in self.per_metric.items()})
        if self.combined is not None:
            object.__setattr__(self, "combined", tuple(float(s) for s in self.combined))
        lengths = {len(vec) for vec in self.per_metric.values()}
        if self.combined is not None:
            lengths.add(len(self.combined))
        _require(len(lengths) <= 1, f"QualityTable {self.lf_id!r} has misaligned score vectors")

    def size(self) -> int:
        if self.combined is not None:
            return len(self.combined)
        return len(next(iter(self.per_metric.values())))

    def require_combined(self) -> tuple[float, ...]:
        if self.combined is None:
            raise DatasetError(f"quality table {self.lf_id!r} has no combined score vector")
        return self.combined


@dataclass(frozen=True)
class LabeledSet:
    """Binary correct/incorrect human labels aligned with a candidate set."""

    lf_id: str
    labels: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", tuple(int(v) for v in self.labels))
        _require(len(self.labels) >= 1, f"LabeledSet {self.lf_id!r} is empty")
        _require(all(v in (0, 1) for v in self.labels),
                 f"LabeledSet {self.lf_id!r} labels must be 0 or 1")


# ---------------------------------------------------------------------------
# JSON-lines plumbing shared by every record file


def read_jsonl(path: str) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, record) pairs, reporting the line of any bad record."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: not valid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise DatasetError(f"{path}:{lineno}: record is not an object")
            yield lineno, record


def write_jsonl(records: Iterable[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def _pick(record: dict, key: str, path: str, lineno: int) -> Any:
    if key not in record:
        raise DatasetError(f"{path}:{lineno}: missing required field {key!r}")
    return record[key]


def _guard(path: str, lineno: int, build: Callable[[], Any]) -> Any:
    try:
        return build()
    except (ValueError, TypeError) as exc:
        raise DatasetError(f"{path}:{lineno}: {exc}") from exc


# ---------------------------------------------------------------------------
# Dataset files


def load_dataset(path: str, split: Split | str | None = None) -> list[LogicalForm]:
    """Load LF records from a dataset file, keeping only the requested split.

    Duplicate ids anywhere in the file are rejected, regardless of split.
    """
    wanted = None if split is None else Split(split)
    seen: dict[str, int] = {}
    out: list[LogicalForm] = []
    for lineno, record in read_jsonl(path):
        reference = record.get("reference")
        lf = _guard(path, lineno, lambda: LogicalForm(
            id=str(_pick(record, "id", path, lineno)),
            lf=str(_pick(record, "lf", path, lineno)),
            reference=None if reference is None else str(reference),
            split=_pick(record, "split", path, lineno),
        ))
        if lf.id in seen:
            raise DatasetError(f"{path}:{lineno}: duplicate id {lf.id!r} (first seen on line {seen[lf.id]})")
        seen[lf.id] = lineno
        if wanted is None or lf.split is wanted:
            out.append(lf)
    return out


def save_dataset(lfs: Iterable[LogicalForm], path: str) -> None:
    def to_record(lf: LogicalForm) -> dict:
        record = {"id": lf.id, "lf": lf.lf, "split": lf.split.value}
        if lf.reference is not None:
            record["reference"] = lf.reference
        return record

    write_jsonl((to_record(lf) for lf in lfs), path)


# ---------------------------------------------------------------------------
# Candidate files


def save_candidates(sets: Iterable[CandidateSet], path: str) -> None:
    def to_record(cs: CandidateSet) -> dict:
        record: dict[str, Any] = {
            "lf_id": cs.lf_id,
            "lf": cs.require_lf(),
            "candidates": [
                {"text": c.text, "raw_count": c.raw_count, "gen_logprob": c.gen_logprob}
                for c in cs.candidates
            ],
        }
        if cs.reference is not None:
            record["reference"] = cs.reference
        if cs.truncated:
            record["truncated"] = True
        return record

    write_jsonl((to_record(cs) for cs in sets), path)


def load_candidates(path: str) -> list[CandidateSet]:
    out = []
    for lineno, record in read_jsonl(path):
        raw = _pick(record, "candidates", path, lineno)
        if not isinstance(raw, list):
            raise DatasetError(f"{path}:{lineno}: 'candidates' must be a list")
        out.append(_guard(path, lineno, lambda: CandidateSet(
            lf_id=str(_pick(record, "lf_id", path, lineno)),
            lf=str(_pick(record, "lf", path, lineno)),
            reference=record.get("reference"),
            truncated=bool(record.get("truncated", False)),
            candidates=tuple(
                Candidate(
                    text=str(_pick(c, "text", path, lineno)),
                    raw_count=_pick(c, "raw_count", path, lineno),
                    gen_logprob=float(_pick(c, "gen_logprob", path, lineno)),
                )
                for c in raw
            ),
        )))
    return out


# ---------------------------------------------------------------------------
# Score and label files


def save_quality_tables(tables: Iterable[QualityTable], path: str) -> None:
    def to_records(qt: QualityTable) -> Iterator[dict]:
        for metric in sorted(qt.per_metric):
            yield {"lf_id": qt.lf_id, "metric": metric, "scores": list(qt.per_metric[metric])}
        if qt.combined is not None:
            yield {"lf_id": qt.lf_id, "metric": "combined", "scores": list(qt.combined)}

    write_jsonl((rec for qt in tables for rec in to_records(qt)), path)


def load_quality_tables(path: str) -> dict[str, QualityTable]:
    """Load a scores file into one QualityTable per lf_id.

    Records with metric name ``combined`` populate the combined vector.
    """
    per_lf: dict[str, dict[str, tuple[float, ...]]] = {}
    combined: dict[str, tuple[float, ...]] = {}
    for lineno, record in read_jsonl(path):
        lf_id = str(_pick(record, "lf_id", path, lineno))
        metric = str(_pick(record, "metric", path, lineno))
        scores = _pick(record, "scores", path, lineno)
        if not isinstance(scores, list) or not scores:
            raise DatasetError(f"{path}:{lineno}: 'scores' must be a non-empty list")
        vec = tuple(float(s) for s in scores)
        if metric == "combined":
            if lf_id in combined:
                raise DatasetError(f"{path}:{lineno}: duplicate combined scores for {lf_id!r}")
            combined[lf_id] = vec
        else:
            metrics = per_lf.setdefault(lf_id, {})
            if metric in metrics:
                raise DatasetError(f"{path}:{lineno}: duplicate metric {metric!r} for {lf_id!r}")
            metrics[metric] = vec
    out = {}
    for lf_id in sorted(set(per_lf) | set(combined)):
        out[lf_id] = _guard(path, 0, lambda: QualityTable(
            lf_id=lf_id, per_metric=per_lf.get(lf_id, {}), combined=combined.get(lf_id)))
    return out


def save_labeled_sets(sets: Iterable[LabeledSet], path: str) -> None:
    write_jsonl(({"lf_id": ls.lf_id, "labels": list(ls.labels)} for ls in sets), path)


def load_labeled_sets(path: str) -> list[LabeledSet]:
    out = []
    for lineno, record in read_jsonl(path):
        labels = _pick(record, "labels", path, lineno)
        if not isinstance(labels, list):
            raise DatasetError(f"{path}:{lineno}: 'labels' must be a list")
        out.append(_guard(path, lineno, lambda: LabeledSet(
            lf_id=str(_pick(record, "lf_id", path, lineno)), labels=labels)))
    return out


# ---------------------------------------------------------------------------
# Freebase identifier mapping


@lru_cache(maxsize=1)
def load_freebase_table() -> dict[str, str]:
    """Return the shipped Freebase-identifier-to-keyword table."""
    text = resources.files("genrerank").joinpath("data/freebase_map.json").read_text("utf-8")
    return json.loads(text)


@lru_cache(maxsize=8)
def _compile_table(keys: tuple[str, ...]) -> re.Pattern[str]:
    # Longest key first, so a short key never clobbers a longer key it prefixes.
    ordered = sorted(keys, key=len, reverse=True)
    return re.compile("|".join(re.escape(k) for k in ordered))


def map_freebase_ids(lf: str, table: Mapping[str, str] | None = None) -> str:
    """Replace every Freebase identifier occurrence with its keyword.

    Unknown identifiers pass through untouched. A single left-to-right scan is
    used, so replacement values are never themselves rescanned.
    """
    if table is None:
        table = load_freebase_table()
    if not table:
        return lf
    if any(not key for key in table):
        raise ValueError("identifier table keys must be non-empty")
    pattern = _compile_table(tuple(table))
    return pattern.sub(lambda m: table[m.group(0)], lf)


def lf_tokens(lf: str, table: Mapping[str, str] | None = None) -> list[str]:
    """Whitespace tokens of an LF after identifier mapping."""
    return map_freebase_ids(lf, table).split()
