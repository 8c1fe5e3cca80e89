"""Readers and writers for the on-disk formats.

Tabular files are UTF-8 comma-separated text with a mandatory header row;
``\\n`` and ``\\r\\n`` line endings are both accepted and writers emit
``\\n``. Optional columns may be left out of the header entirely or left
empty on a given row. Dates are ``YYYY-MM-DD``. Scores are written with
``repr`` so a parse/write cycle reproduces every float bit for bit.

Score file::

    sample_id,label,score[,category][,first_seen]

Manifest file::

    sample_id,first_seen,label[,label_date][,category][,score]

Category statistics file::

    category,class,n,detected

Weight profile (JSON)::

    {"name": "enterprise", "benign": {"common": 0.9, "shareware": 0.1},
     "malware": {"commodity": 1.0}}

Every parse failure raises a subclass of :class:`IngestError` carrying the
1-based line number and offending field.
"""

from __future__ import annotations

import contextlib
import csv
import io
import json
import math
import os
import re
from datetime import date
from pathlib import Path
from typing import IO, Iterator, Sequence, Union

from .binom_core import DomainError
from .category_agg import BENIGN, MALWARE, CategoryStats, WeightProfile
from .roc_eval import ScoredSample
from .timedelay_sim import ManifestEntry

__all__ = [
    "CountError",
    "DateError",
    "DuplicateIdError",
    "HeaderError",
    "IngestError",
    "LabelError",
    "MalformedRowError",
    "ProfileError",
    "ScoreError",
    "format_date",
    "iter_manifest",
    "iter_scores",
    "iter_stats",
    "parse_date",
    "parse_manifest",
    "parse_profile",
    "parse_scores",
    "parse_stats",
    "write_manifest",
    "write_profile",
    "write_scores",
    "write_stats",
]

Source = Union[str, os.PathLike, IO[str]]

SCORE_COLUMNS = ("sample_id", "label", "score")
SCORE_OPTIONAL = ("category", "first_seen")
MANIFEST_COLUMNS = ("sample_id", "first_seen", "label")
MANIFEST_OPTIONAL = ("label_date", "category", "score")
STATS_COLUMNS = ("category", "class", "n", "detected")

_DATE_RE = re.compile(r"\d{4}-\d{2}-\d{2}")


class IngestError(DomainError):
    """Base class for file-format errors."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = f"line {line}: " if line is not None else ""
        what = f"{field}: " if field else ""
        super().__init__(f"{where}{what}{message}")
        self.line = line
        self.field = field


class HeaderError(IngestError):
    pass


class MalformedRowError(IngestError):
    pass


class LabelError(IngestError):
    pass


class ScoreError(IngestError):
    pass


class DateError(IngestError):
    pass


class DuplicateIdError(IngestError):
    pass


class CountError(IngestError):
    pass


class ProfileError(IngestError):
    pass


def parse_date(text: str) -> date:
    """Strict ``YYYY-MM-DD``; raises ValueError otherwise."""
    if not _DATE_RE.fullmatch(text):
        raise ValueError(f"expected YYYY-MM-DD, got {text!r}")
    return date.fromisoformat(text)


def format_date(d: date) -> str:
    return d.isoformat()


@contextlib.contextmanager
def _reader(source: Source) -> Iterator[IO[str]]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8-sig", newline="") as fh:
            yield fh
    else:
        yield source


@contextlib.contextmanager
def _writer(dest: Source | None) -> Iterator[IO[str]]:
    if dest is None:
        yield io.StringIO()
    elif isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            yield fh
    else:
        yield dest


def _header(reader, required: tuple[str, ...], optional: tuple[str, ...]) -> list[str]:
    try:
        header = next(reader)
    except StopIteration:
        raise HeaderError("file is empty; expected a header row", line=1) from None
    header = [h.strip() for h in header]
    expected = ",".join(required) + "".join(f"[,{o}]" for o in optional)
    if tuple(header[: len(required)]) != required:
        raise HeaderError(f"expected header {expected}, got {','.join(header)}", line=1)
    rest = header[len(required) :]
    pos = 0
    for name in rest:
        try:
            pos = optional.index(name, pos) + 1
        except ValueError:
            raise HeaderError(
                f"unexpected or out-of-order column {name!r}; expected {expected}", line=1
            ) from None
    return header


def _rows(reader, width: int) -> Iterator[tuple[int, list[str]]]:
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != width:
            raise MalformedRowError(f"expected {width} fields, got {len(row)}", line=line)
        yield line, row


def _id(value: str, line: int, seen: set[str]) -> str:
    if not value:
        raise MalformedRowError("empty value", line=line, field="sample_id")
    if value in seen:
        raise DuplicateIdError(f"duplicate id {value!r}", line=line, field="sample_id")
    seen.add(value)
    return value


def _label(value: str, line: int) -> int:
    if value not in ("0", "1"):
        raise LabelError(f"label must be 0 or 1, got {value!r}", line=line, field="label")
    return int(value)


def _score(value: str, line: int, negate: bool) -> float:
    try:
        s = float(value)
    except ValueError:
        raise ScoreError(f"not a number: {value!r}", line=line, field="score") from None
    if not math.isfinite(s):
        raise ScoreError(f"score must be finite, got {value!r}", line=line, field="score")
    return -s if negate else s


def _date(value: str, line: int, field: str) -> date:
    try:
        return parse_date(value)
    except ValueError:
        raise DateError(f"expected YYYY-MM-DD, got {value!r}", line=line, field=field) from None


def iter_scores(source: Source, negate: bool = False) -> Iterator[ScoredSample]:
    """Stream a score file row by row.

    ``negate=True`` flips the sign of every score, for detectors whose
    output is lower for more suspicious files.
    """
    with _reader(source) as fh:
        reader = csv.reader(fh)
        header = _header(reader, SCORE_COLUMNS, SCORE_OPTIONAL)
        i_cat = header.index("category") if "category" in header else None
        i_seen = header.index("first_seen") if "first_seen" in header else None
        seen: set[str] = set()
        for line, row in _rows(reader, len(header)):
            sid = _id(row[0], line, seen)
            label = _label(row[1], line)
            score = _score(row[2], line, negate)
            cat = row[i_cat] or None if i_cat is not None else None
            first = None
            if i_seen is not None and row[i_seen]:
                first = _date(row[i_seen], line, "first_seen")
            yield ScoredSample(sid, label, score, cat, first)


def parse_scores(source: Source, negate: bool = False) -> list[ScoredSample]:
    return list(iter_scores(source, negate))


def write_scores(samples: Sequence[ScoredSample], dest: Source | None = None) -> str | None:
    """Write a score file; with ``dest=None`` return the text instead."""
    has_cat = any(s.category is not None for s in samples)
    has_seen = any(s.first_seen is not None for s in samples)
    header = list(SCORE_COLUMNS)
    if has_cat:
        header.append("category")
    if has_seen:
        header.append("first_seen")
    with _writer(dest) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for s in samples:
            row = [s.sample_id, s.label, repr(float(s.score))]
            if has_cat:
                row.append(s.category or "")
            if has_seen:
                row.append(format_date(s.first_seen) if s.first_seen else "")
            w.writerow(row)
        if dest is None:
            return fh.getvalue()
    return None


def iter_manifest(source: Source, negate: bool = False) -> Iterator[ManifestEntry]:
    with _reader(source) as fh:
        reader = csv.reader(fh)
        header = _header(reader, MANIFEST_COLUMNS, MANIFEST_OPTIONAL)
        idx = {name: header.index(name) for name in MANIFEST_OPTIONAL if name in header}
        seen: set[str] = set()
        for line, row in _rows(reader, len(header)):
            sid = _id(row[0], line, seen)
            first = _date(row[1], line, "first_seen")
            label = _label(row[2], line)
            label_date = cat = score = None
            if "label_date" in idx and row[idx["label_date"]]:
                label_date = _date(row[idx["label_date"]], line, "label_date")
                if label_date < first:
                    raise DateError(
                        f"{format_date(label_date)} precedes first_seen {format_date(first)}",
                        line=line,
                        field="label_date",
                    )
            if "category" in idx:
                cat = row[idx["category"]] or None
            if "score" in idx and row[idx["score"]]:
                score = _score(row[idx["score"]], line, negate)
            yield ManifestEntry(sid, first, label, label_date, cat, score)


def parse_manifest(source: Source, negate: bool = False) -> list[ManifestEntry]:
    return list(iter_manifest(source, negate))


def write_manifest(entries: Sequence[ManifestEntry], dest: Source | None = None) -> str | None:
    present = [
        name
        for name, attr in zip(MANIFEST_OPTIONAL, ("label_date", "category", "score"))
        if any(getattr(e, attr) is not None for e in entries)
    ]
    with _writer(dest) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(MANIFEST_COLUMNS) + present)
        for e in entries:
            row = [e.sample_id, format_date(e.first_seen), e.label]
            for name in present:
                v = getattr(e, name)
                if v is None:
                    row.append("")
                elif name == "label_date":
                    row.append(format_date(v))
                elif name == "score":
                    row.append(repr(float(v)))
                else:
                    row.append(v)
            w.writerow(row)
        if dest is None:
            return fh.getvalue()
    return None


def _count(value: str, line: int, field: str) -> int:
    if not value.isdigit():
        raise CountError(f"expected a nonnegative integer, got {value!r}", line=line, field=field)
    return int(value)


def iter_stats(source: Source) -> Iterator[CategoryStats]:
    with _reader(source) as fh:
        reader = csv.reader(fh)
        _header(reader, STATS_COLUMNS, ())
        seen: set[str] = set()
        for line, row in _rows(reader, len(STATS_COLUMNS)):
            cat, cls = row[0], row[1]
            if not cat:
                raise MalformedRowError("empty value", line=line, field="category")
            if cls not in (BENIGN, MALWARE):
                raise LabelError(
                    f"class must be {BENIGN!r} or {MALWARE!r}, got {cls!r}", line=line, field="class"
                )
            key = f"{cls}/{cat}"
            if key in seen:
                raise DuplicateIdError(f"duplicate {cls} category {cat!r}", line=line, field="category")
            seen.add(key)
            n = _count(row[2], line, "n")
            detected = _count(row[3], line, "detected")
            if n < 1:
                raise CountError("n must be >= 1", line=line, field="n")
            if detected > n:
                raise CountError(f"detected {detected} exceeds n {n}", line=line, field="detected")
            yield CategoryStats(cat, cls, n, detected)


def parse_stats(source: Source) -> list[CategoryStats]:
    return list(iter_stats(source))


def write_stats(stats: Sequence[CategoryStats], dest: Source | None = None) -> str | None:
    with _writer(dest) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATS_COLUMNS)
        for s in stats:
            w.writerow([s.category, s.cls, s.n, s.detected])
        if dest is None:
            return fh.getvalue()
    return None


_PROFILE_KEYS = {"name", "benign", "malware"}


def _no_duplicate_keys(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ProfileError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _weights(doc: dict, key: str) -> dict[str, float]:
    if key not in doc:
        raise ProfileError(f"missing key {key!r}", field=key)
    raw = doc[key]
    if not isinstance(raw, dict):
        raise ProfileError("expected an object mapping category to weight", field=key)
    out = {}
    for cat, w in raw.items():
        if isinstance(w, bool) or not isinstance(w, (int, float)):
            raise ProfileError(f"weight for {cat!r} is not a number: {w!r}", field=key)
        out[cat] = float(w)
    return out


def parse_profile(source: Source, normalize: bool = False) -> WeightProfile:
    """Read a weight profile.

    Without ``normalize`` each weight map must already sum to one and a
    :class:`evalplan.category_agg.NormalizationError` reports the sum found.
    With it, each map is rescaled. A missing ``name`` defaults to the file
    stem.
    """
    default_name = "profile"
    if isinstance(source, (str, os.PathLike)):
        default_name = Path(source).stem
    with _reader(source) as fh:
        try:
            doc = json.load(fh, object_pairs_hook=_no_duplicate_keys)
        except json.JSONDecodeError as exc:
            raise ProfileError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ProfileError("top level must be an object")
    unknown = sorted(set(doc) - _PROFILE_KEYS)
    if unknown:
        raise ProfileError(f"unknown keys {unknown}; allowed: {sorted(_PROFILE_KEYS)}")
    name = doc.get("name", default_name)
    if not isinstance(name, str) or not name:
        raise ProfileError("must be a nonempty string", field="name")
    benign = _weights(doc, "benign")
    malware = _weights(doc, "malware")
    if normalize:
        return WeightProfile.normalized(name, benign, malware)
    return WeightProfile(name, benign, malware)


def write_profile(profile: WeightProfile, dest: Source | None = None) -> str | None:
    doc = {
        "name": profile.name,
        "benign": profile.benign_weights,
        "malware": profile.malware_weights,
    }
    text = json.dumps(doc, indent=2) + "\n"
    if dest is None:
        return text
    with _writer(dest) as fh:
        fh.write(text)
    return None
