"""Prediction records, evaluation datasets and their JSONL/CSV persistence.

A :class:`PredictionRecord` holds one example's labels together with the
S Monte Carlo probabilities ``p(y=1 | x, theta_i)`` produced by a model.
JSONL is the canonical on-disk format; CSV is a flat convenience mapping
with the samples joined by ``;``.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .labels import N_CLINICAL_LABELS, binarize_label

IN_DOMAIN = "in_domain"
SHIFTED = "shifted"
DOMAINS = (IN_DOMAIN, SHIFTED)
CSV_COLUMNS = ("id", "clinical_label", "binary_label", "domain", "samples")


class PredStoreError(ValueError):
    """Base class for ingestion and validation failures."""


class InvariantViolation(PredStoreError):
    def __init__(self, record_id: str, reason: str):
        self.record_id = record_id
        self.reason = reason
        super().__init__(f"record {record_id!r}: {reason}")


class DuplicateIdError(PredStoreError):
    def __init__(self, record_id: str, line: int | None = None):
        self.record_id = record_id
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"duplicate record id {record_id!r}{where}")


class ParseError(PredStoreError):
    def __init__(self, path: str, line: int, reason: str):
        self.path = path
        self.line = line
        self.reason = reason
        super().__init__(f"{path}:{line}: {reason}")


class EmptyDatasetError(PredStoreError):
    pass


@dataclass(frozen=True)
class PredictionRecord:
    id: str
    binary_label: int
    domain: str
    samples: tuple[float, ...]
    clinical_label: int | None = None

    def __post_init__(self):
        rid = self.id
        if not isinstance(rid, str) or not rid:
            raise InvariantViolation(str(rid), "id must be a non-empty string")
        if self.binary_label not in (0, 1) or isinstance(self.binary_label, bool):
            raise InvariantViolation(rid, f"binary_label must be 0 or 1, got {self.binary_label!r}")
        if self.domain not in DOMAINS:
            raise InvariantViolation(rid, f"domain must be one of {DOMAINS}, got {self.domain!r}")
        samples = tuple(float(s) for s in self.samples)
        if not samples:
            raise InvariantViolation(rid, "at least one sample is required")
        for s in samples:
            if not (0.0 <= s <= 1.0):  # also rejects NaN
                raise InvariantViolation(rid, f"sample {s!r} outside [0, 1]")
        object.__setattr__(self, "samples", samples)
        if self.clinical_label is not None:
            try:
                expected = binarize_label(self.clinical_label)
            except (TypeError, ValueError) as exc:
                raise InvariantViolation(rid, str(exc)) from None
            if expected != self.binary_label:
                raise InvariantViolation(
                    rid,
                    f"binary_label {self.binary_label} inconsistent with "
                    f"clinical_label {self.clinical_label}",
                )

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "clinical_label": self.clinical_label,
            "binary_label": self.binary_label,
            "domain": self.domain,
            "samples": list(self.samples),
        }


@dataclass(frozen=True)
class EvalDataset:
    records: tuple[PredictionRecord, ...]
    name: str = ""

    def __post_init__(self):
        records = tuple(self.records)
        seen = set()
        for r in records:
            if r.id in seen:
                raise DuplicateIdError(r.id)
            seen.add(r.id)
        object.__setattr__(self, "records", records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PredictionRecord]:
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def by_id(self) -> dict[str, PredictionRecord]:
        return {r.id: r for r in self.records}


@dataclass(frozen=True)
class DatasetSummary:
    n_total: int
    n_positive: int
    label_counts: dict[int, int] = field(default_factory=dict)
    n_unlabelled: int = 0

    @property
    def prevalence(self) -> float:
        return float(self.prevalence_exact)

    @property
    def prevalence_exact(self) -> Fraction:
        return Fraction(self.n_positive, self.n_total)

    def class_probabilities(self) -> dict[int, float]:
        """Empirical clinical-label distribution over the labelled records."""
        n = sum(self.label_counts.values())
        if n == 0:
            raise PredStoreError("no clinical labels to derive class probabilities from")
        return {k: c / n for k, c in sorted(self.label_counts.items())}


def summarize(d: EvalDataset | Sequence[PredictionRecord]) -> DatasetSummary:
    records = list(d)
    if not records:
        raise EmptyDatasetError("cannot summarize an empty dataset")
    n_pos = sum(r.binary_label for r in records)
    counts = Counter(r.clinical_label for r in records if r.clinical_label is not None)
    label_counts = {k: counts.get(k, 0) for k in range(N_CLINICAL_LABELS)}
    n_unlabelled = sum(1 for r in records if r.clinical_label is None)
    return DatasetSummary(len(records), n_pos, label_counts, n_unlabelled)


# -- parsing -----------------------------------------------------------------

def _record_from_mapping(obj: dict, path: str, line: int) -> PredictionRecord:
    if not isinstance(obj, dict):
        raise ParseError(path, line, "expected a JSON object")
    missing = [k for k in ("id", "binary_label", "domain", "samples") if k not in obj]
    if missing:
        raise ParseError(path, line, f"missing field(s): {', '.join(missing)}")
    samples = obj["samples"]
    if not isinstance(samples, list) or not all(
        isinstance(s, (int, float)) and not isinstance(s, bool) for s in samples
    ):
        raise ParseError(path, line, "samples must be a list of numbers")
    return PredictionRecord(
        id=obj["id"],
        binary_label=obj["binary_label"],
        domain=obj["domain"],
        samples=tuple(samples),
        clinical_label=obj.get("clinical_label"),
    )


def _iter_jsonl(text: str, path: str) -> Iterator[tuple[int, PredictionRecord]]:
    for lineno, raw in enumerate(text.split("\n"), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(path, lineno, f"invalid JSON: {exc.msg}") from None
        yield lineno, _record_from_mapping(obj, path, lineno)


def _parse_int(text: str, what: str, path: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(path, line, f"{what} {text!r} is not an integer") from None


def _iter_csv(text: str, path: str) -> Iterator[tuple[int, PredictionRecord]]:
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    if header is None:
        return
    if tuple(h.strip() for h in header) != CSV_COLUMNS:
        raise ParseError(path, 1, f"expected header {','.join(CSV_COLUMNS)}")
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(CSV_COLUMNS):
            raise ParseError(path, lineno, f"expected {len(CSV_COLUMNS)} columns, got {len(row)}")
        rid, clinical, binary, domain, samples = row
        try:
            values = tuple(float(s) for s in samples.split(";") if s.strip())
        except ValueError:
            raise ParseError(path, lineno, "samples must be ';'-separated numbers") from None
        yield lineno, PredictionRecord(
            id=rid,
            binary_label=_parse_int(binary, "binary_label", path, lineno),
            domain=domain,
            samples=values,
            clinical_label=_parse_int(clinical, "clinical_label", path, lineno)
            if clinical.strip() else None,
        )


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in ("jsonl", "csv"):
            raise ValueError(f"unknown format {fmt!r}")
        return fmt
    return "csv" if path.suffix.lower() == ".csv" else "jsonl"


def load(path, format: str | None = None, name: str | None = None) -> EvalDataset:
    """Read a dataset, enforcing every record invariant.

    ``format`` defaults to the file extension (``.csv`` or JSONL otherwise).
    Errors carry the offending line number or record id.
    """
    path = Path(path)
    fmt = _infer_format(path, format)
    text = path.read_text(encoding="utf-8")
    rows = _iter_csv(text, str(path)) if fmt == "csv" else _iter_jsonl(text, str(path))
    records: list[PredictionRecord] = []
    seen: set[str] = set()
    for lineno, rec in rows:
        if rec.id in seen:
            raise DuplicateIdError(rec.id, lineno)
        seen.add(rec.id)
        records.append(rec)
    return EvalDataset(tuple(records), name if name is not None else path.stem)


def dumps_jsonl(records: Iterable[PredictionRecord]) -> str:
    return "".join(json.dumps(r.to_json_dict()) + "\n" for r in records)


def dumps_csv(records: Iterable[PredictionRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([
            r.id,
            "" if r.clinical_label is None else r.clinical_label,
            r.binary_label,
            r.domain,
            ";".join(repr(s) for s in r.samples),
        ])
    return buf.getvalue()


def save(d: EvalDataset | Iterable[PredictionRecord], path, format: str | None = None) -> Path:
    path = Path(path)
    fmt = _infer_format(path, format)
    text = dumps_csv(d) if fmt == "csv" else dumps_jsonl(d)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
