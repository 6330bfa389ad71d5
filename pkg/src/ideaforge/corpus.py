"""Document ingestion, deduplication, and year slicing.

Input formats: JSONL (one record per line, keys id/title/abstract/year,
optional "extra" object) and Scopus-style CSV exports (RFC 4180).
Ingestion never drops a line silently: every rejected line lands in the
IngestReport with a reason.
"""

from __future__ import annotations

import csv
import json
import re
import unicodedata
from dataclasses import dataclass, field

from .errors import DataError

YEAR_MIN_VALID = 1800
YEAR_MAX_VALID = 2200

# Scopus exports use this placeholder instead of an empty field.
EMPTY_ABSTRACT_SENTINELS = {"", "[no abstract available]"}

DEFAULT_SCOPUS_COLUMNS = {
    "Title": "title",
    "Abstract": "abstract",
    "Year": "year",
    "EID": "id",
}


def is_empty_abstract(text: str) -> bool:
    return text.strip().lower() in EMPTY_ABSTRACT_SENTINELS


@dataclass
class Document:
    id: str
    title: str
    abstract: str
    year: int
    extra: dict[str, str] | None = None

    def __post_init__(self):
        if not self.id:
            raise DataError("document id must be non-empty")
        if not (YEAR_MIN_VALID <= self.year <= YEAR_MAX_VALID):
            raise DataError(
                f"document {self.id!r}: year {self.year} outside [{YEAR_MIN_VALID}, {YEAR_MAX_VALID}]"
            )

    def text(self, use_title: bool = False) -> str:
        """Modelled text: the abstract, optionally with the title prepended."""
        if use_title and self.title:
            return self.title + "\n" + self.abstract
        return self.abstract

    def field_count(self) -> int:
        """Number of informative fields (used by the dedupe survivor rule)."""
        n = 0
        if self.title.strip():
            n += 1
        if not is_empty_abstract(self.abstract):
            n += 1
        if self.extra:
            n += sum(1 for v in self.extra.values() if v.strip())
        return n


@dataclass
class Corpus:
    documents: list[Document]
    source_descriptor: str = ""

    def __post_init__(self):
        seen: set[str] = set()
        for doc in self.documents:
            if doc.id in seen:
                raise DataError(f"duplicate document id {doc.id!r} in corpus")
            seen.add(doc.id)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)


@dataclass
class IngestReport:
    total_lines: int = 0
    accepted: int = 0
    rejected: list[dict] = field(default_factory=list)
    empty_abstract_ids: list[str] = field(default_factory=list)

    def reject(self, lineno: int, reason: str):
        self.rejected.append({"line": lineno, "reason": reason})

    def to_dict(self) -> dict:
        return {
            "total_lines": self.total_lines,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "empty_abstract_ids": self.empty_abstract_ids,
        }


@dataclass
class DedupeReport:
    merges: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"merges": self.merges}


@dataclass
class SliceIndex:
    """One slice per consecutive year in [year_min, year_max]; empty years kept."""

    years: list[int]
    slices: list[list[int]]  # document indices into the corpus, per year
    year_min: int
    year_max: int
    excluded: int  # documents outside the year range

    def __post_init__(self):
        if self.years != list(range(self.year_min, self.year_max + 1)):
            raise DataError("slice years must be consecutive and span [year_min, year_max]")

    def __len__(self) -> int:
        return len(self.years)

    def sizes(self) -> list[int]:
        return [len(s) for s in self.slices]


def _coerce_year(value) -> int:
    # bool is an int subclass; reject it explicitly
    if isinstance(value, bool):
        raise ValueError("year not an integer")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if value.is_integer():
            return int(value)
        raise ValueError("year not an integer")
    if isinstance(value, str):
        try:
            return int(value.strip())
        except ValueError:
            raise ValueError("year not an integer") from None
    raise ValueError("year not an integer")


def _coerce_extra(value) -> dict[str, str] | None:
    if value is None:
        return None
    if not isinstance(value, dict):
        raise ValueError("extra must be an object")
    out = {str(k): str(v) for k, v in value.items()}
    return out or None


def _build_document(record: dict, lineno: int, report: IngestReport) -> Document | None:
    """Validate one raw record; returns None (and a report entry) on rejection."""
    if "year" not in record or record["year"] is None:
        report.reject(lineno, "year missing")
        return None
    try:
        year = _coerce_year(record["year"])
    except ValueError as exc:
        report.reject(lineno, str(exc))
        return None
    if not (YEAR_MIN_VALID <= year <= YEAR_MAX_VALID):
        report.reject(lineno, f"year {year} out of range [{YEAR_MIN_VALID}, {YEAR_MAX_VALID}]")
        return None

    doc_id = record.get("id")
    if doc_id is None:
        doc_id = f"doc-{lineno}"
    else:
        doc_id = str(doc_id)
        if not doc_id:
            report.reject(lineno, "id empty")
            return None

    try:
        extra = _coerce_extra(record.get("extra"))
    except ValueError as exc:
        report.reject(lineno, str(exc))
        return None

    title = str(record.get("title") or "")
    abstract = str(record.get("abstract") or "")
    return Document(id=doc_id, title=title, abstract=abstract, year=year, extra=extra)


def ingest_jsonl(path, source_descriptor: str = "") -> tuple[Corpus, IngestReport]:
    """Read a JSONL file into a Corpus; invalid lines go to the report.

    Missing ids are autogenerated as "doc-<lineno>" (1-based). Blank lines
    are skipped without a report entry.
    """
    report = IngestReport()
    documents: list[Document] = []
    seen_ids: set[str] = set()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        report.total_lines += 1
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            report.reject(lineno, f"invalid JSON: {exc.msg}")
            continue
        if not isinstance(record, dict):
            report.reject(lineno, "record is not an object")
            continue
        doc = _build_document(record, lineno, report)
        if doc is None:
            continue
        if doc.id in seen_ids:
            report.reject(lineno, f"duplicate id {doc.id!r}")
            continue
        seen_ids.add(doc.id)
        if is_empty_abstract(doc.abstract):
            report.empty_abstract_ids.append(doc.id)
        documents.append(doc)
        report.accepted += 1

    return Corpus(documents, source_descriptor or str(path)), report


def ingest_scopus_csv(path, column_map: dict[str, str] | None = None,
                      source_descriptor: str = "") -> tuple[Corpus, IngestReport]:
    """Read a Scopus-style CSV export (RFC 4180, header row required).

    column_map maps CSV header names onto the record fields
    {title, abstract, year, id}; defaults follow the Scopus export layout
    (Title/Abstract/Year/EID). Unmapped columns are ignored. Rows whose id
    cell is blank get "doc-<rowno>". Empty or placeholder abstracts
    ("[No abstract available]") keep the document but flag it.
    """
    column_map = dict(column_map or DEFAULT_SCOPUS_COLUMNS)
    report = IngestReport()
    documents: list[Document] = []
    seen_ids: set[str] = set()

    try:
        fh = open(path, "r", encoding="utf-8-sig", newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty CSV, no header row")
        missing = [col for col in column_map if col not in reader.fieldnames]
        if missing:
            raise DataError(f"{path}: missing mapped column(s): {', '.join(sorted(missing))}")

        for rowno, row in enumerate(reader, start=2):  # header is line 1
            report.total_lines += 1
            record: dict = {}
            for col, fieldname in column_map.items():
                record[fieldname] = row.get(col)
            if not (record.get("id") or "").strip():
                record["id"] = f"doc-{rowno}"
            doc = _build_document(record, rowno, report)
            if doc is None:
                continue
            if doc.id in seen_ids:
                report.reject(rowno, f"duplicate id {doc.id!r}")
                continue
            seen_ids.add(doc.id)
            if is_empty_abstract(doc.abstract):
                report.empty_abstract_ids.append(doc.id)
            documents.append(doc)
            report.accepted += 1

    return Corpus(documents, source_descriptor or str(path)), report


def serialize_jsonl(corpus: Corpus, path) -> None:
    """Write a corpus back out as canonical JSONL (sorted keys, one doc per line)."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus:
            record = {
                "id": doc.id,
                "title": doc.title,
                "abstract": doc.abstract,
                "year": doc.year,
            }
            if doc.extra:
                record["extra"] = doc.extra
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")


_PUNCT_RE = re.compile(r"[^\w\s]", re.UNICODE)
_WS_RE = re.compile(r"\s+")


def normalize_title(title: str) -> str:
    """Dedupe key: lowercase, punctuation stripped, whitespace collapsed."""
    text = unicodedata.normalize("NFKC", title).lower()
    text = _PUNCT_RE.sub(" ", text)
    return _WS_RE.sub(" ", text).strip()


def dedupe(corpus: Corpus) -> tuple[Corpus, DedupeReport]:
    """Merge documents whose normalized titles collide.

    Survivor: the record with the most non-empty fields, ties broken by
    earlier ingestion order. Documents with an empty normalized title are
    never merged. Output order follows the survivors' original positions.
    """
    report = DedupeReport()
    groups: dict[str, list[int]] = {}
    for idx, doc in enumerate(corpus.documents):
        key = normalize_title(doc.title)
        if not key:
            continue
        groups.setdefault(key, []).append(idx)

    removed: set[int] = set()
    for key, indices in groups.items():
        if len(indices) < 2:
            continue
        survivor = max(indices, key=lambda i: (corpus.documents[i].field_count(), -i))
        for idx in indices:
            if idx == survivor:
                continue
            removed.add(idx)
            report.merges.append({
                "survivor_id": corpus.documents[survivor].id,
                "removed_id": corpus.documents[idx].id,
                "title_key": key,
            })

    report.merges.sort(key=lambda m: (m["title_key"], m["removed_id"]))
    kept = [doc for idx, doc in enumerate(corpus.documents) if idx not in removed]
    return Corpus(kept, corpus.source_descriptor), report


def slice_by_year(corpus: Corpus, year_min: int, year_max: int) -> SliceIndex:
    """Partition document indices into one slice per year; out-of-range counted."""
    if year_min > year_max:
        raise DataError(f"year_min {year_min} > year_max {year_max}")
    years = list(range(year_min, year_max + 1))
    slices: list[list[int]] = [[] for _ in years]
    excluded = 0
    for idx, doc in enumerate(corpus.documents):
        if year_min <= doc.year <= year_max:
            slices[doc.year - year_min].append(idx)
        else:
            excluded += 1
    return SliceIndex(years=years, slices=slices, year_min=year_min,
                      year_max=year_max, excluded=excluded)
