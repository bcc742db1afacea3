"""Comment ingestion: parsing, keyword pre-filter, monthly bucketing and subsampling."""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import InputError

log = logging.getLogger(__name__)

# Filter keywords for anti-vax comments (Hungarian stems, lowercased).
ANTIVAX_KEYWORDS = (
    "olt", "vakcina", "ad", "kap", "orosz", "kína", "astra", "pfizer",
    "moderna", "szputnyik", "sem", "nem", "%", "megbízható", "hatásos", "veszélyes",
)

# '%' survives tokenization because it is itself a filter keyword.
_TOKEN_RE = re.compile(r"%|[^\W_]+")
_BAD_BYTES_RE = re.compile("[\udc80-\udcff]")


class Label(str, Enum):
    ANTIVAX = "AntiVax"
    OTHER = "Other"

    @property
    def display(self) -> str:
        return "Anti-vaxxer" if self is Label.ANTIVAX else "Non anti-vaxxer, neutral"

    @classmethod
    def parse(cls, value: str) -> "Label":
        # display names parse too: "Non anti-vaxxer, neutral" -> "nonantivaxxerneutral"
        key = re.sub(r"[\s_,-]", "", value.lower())
        if key in ("antivax", "antivaxxer", "1", "true", "yes"):
            return cls.ANTIVAX
        if key in ("other", "0", "false", "no", "nonantivax", "nonantivaxxer", "neutral", "nonantivaxxerneutral"):
            return cls.OTHER
        raise InputError(f"unknown label {value!r}")


@dataclass(frozen=True, order=True)
class MonthKey:
    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")

    @classmethod
    def of(cls, ts: datetime) -> "MonthKey":
        return cls(ts.year, ts.month)

    @classmethod
    def parse(cls, text: str) -> "MonthKey":
        m = re.fullmatch(r"\s*(\d{4})-(\d{1,2})\s*", text)
        if not m:
            raise InputError(f"expected YYYY-MM, got {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    def next(self) -> "MonthKey":
        if self.month == 12:
            return MonthKey(self.year + 1, 1)
        return MonthKey(self.year, self.month + 1)

    def start(self) -> datetime:
        return datetime(self.year, self.month, 1, tzinfo=timezone.utc)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def month_range(start: MonthKey, end: MonthKey) -> list[MonthKey]:
    """Inclusive list of months from start to end."""
    out = []
    cur = start
    while cur <= end:
        out.append(cur)
        cur = cur.next()
    return out


@dataclass(frozen=True)
class CommentRecord:
    id: str
    timestamp: datetime
    text: str
    tokens: tuple[str, ...]
    label: Label | None = None
    predicted_prob: float | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise InputError("comment id must be non-empty")
        if self.predicted_prob is not None and not 0.0 <= self.predicted_prob <= 1.0:
            raise InputError(f"predicted_prob out of [0,1] for {self.id}: {self.predicted_prob}")

    @property
    def month(self) -> MonthKey:
        return MonthKey(self.timestamp.year, self.timestamp.month)


@dataclass(frozen=True)
class KeywordList:
    keywords: frozenset[str]

    def __init__(self, keywords: Iterable[str]):
        kws = frozenset(k.strip().lower() for k in keywords if k.strip())
        if not kws:
            raise InputError("keyword list is empty")
        object.__setattr__(self, "keywords", kws)

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "KeywordList":
        kept = []
        for line in lines:
            line = line.strip()
            if line and not line.startswith("#"):
                kept.append(line)
        return cls(kept)

    @classmethod
    def load(cls, path) -> "KeywordList":
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)


@dataclass(frozen=True)
class FieldMapping:
    id: str = "id"
    timestamp: str = "timestamp"
    text: str = "text"
    tokens: str | None = None
    label: str | None = None
    prob: str | None = None


@dataclass
class ParseResult:
    records: list[CommentRecord] = field(default_factory=list)
    skipped: list[tuple[int, str]] = field(default_factory=list)

    @property
    def skip_count(self) -> int:
        return len(self.skipped)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def parse_timestamp(value, epoch: bool = False) -> datetime:
    if epoch or isinstance(value, (int, float)):
        return datetime.fromtimestamp(float(value), tz=timezone.utc)
    s = str(value).strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    ts = datetime.fromisoformat(s)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _rows(stream: IO[bytes] | IO[str], fmt: str, mapping: FieldMapping) -> Iterator[tuple[int, dict | None, str]]:
    raw = stream.read()
    # undecodable bytes become lone surrogates and the row is skipped later
    text = raw.decode("utf-8", errors="surrogateescape") if isinstance(raw, bytes) else raw
    if text.startswith("\ufeff"):
        text = text[1:]
    required = [mapping.id, mapping.timestamp, mapping.text]
    if fmt == "csv":
        reader = csv.DictReader(io.StringIO(text, newline=""))
        if reader.fieldnames is None:
            return
        for col in required:
            if col not in reader.fieldnames:
                raise InputError(f"missing column {col!r} in CSV header")
        for lineno, row in enumerate(reader, start=2):
            yield lineno, row, ""
    elif fmt == "jsonl":
        checked = False
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                yield lineno, None, f"bad json: {exc.msg}"
                continue
            if not isinstance(obj, dict):
                yield lineno, None, "row is not an object"
                continue
            if not checked:
                for col in required:
                    if col not in obj:
                        raise InputError(f"missing field {col!r} in first JSONL row")
                checked = True
            yield lineno, obj, ""
    else:
        raise InputError(f"unknown format {fmt!r}")


def parse_comments(
    stream: IO[bytes] | IO[str],
    fmt: str = "jsonl",
    mapping: FieldMapping | None = None,
    epoch: bool = False,
) -> ParseResult:
    """Parse a JSONL or CSV comment stream.

    Rows with undecodable timestamps or bodies are skipped and listed in
    ``ParseResult.skipped``; a header lacking a mapped column raises InputError.
    """
    mapping = mapping or FieldMapping()
    result = ParseResult()
    for lineno, row, err in _rows(stream, fmt, mapping):
        if row is None:
            result.skipped.append((lineno, err))
            continue
        if any(isinstance(v, str) and _BAD_BYTES_RE.search(v) for v in row.values()):
            result.skipped.append((lineno, "invalid utf-8"))
            continue
        try:
            ts = parse_timestamp(row[mapping.timestamp], epoch=epoch)
            text = row.get(mapping.text) or ""
            if mapping.tokens and row.get(mapping.tokens) not in (None, ""):
                tok = row[mapping.tokens]
                if isinstance(tok, str):
                    tok = json.loads(tok) if tok.lstrip().startswith("[") else tok.split()
                tokens = tuple(str(t).lower() for t in tok)
            else:
                tokens = tuple(tokenize(text))
            label = None
            if mapping.label and row.get(mapping.label) not in (None, ""):
                label = Label.parse(str(row[mapping.label]))
            prob = None
            if mapping.prob and row.get(mapping.prob) not in (None, ""):
                prob = float(row[mapping.prob])
            result.records.append(
                CommentRecord(str(row[mapping.id]), ts, text, tokens, label, prob)
            )
        except (KeyError, ValueError, TypeError, OverflowError) as exc:
            result.skipped.append((lineno, f"{type(exc).__name__}: {exc}"))
    for lineno, reason in result.skipped:
        log.warning("skipped row %d: %s", lineno, reason)
    seen: set[str] = set()
    for rec in result.records:
        if rec.id in seen:
            raise InputError(f"duplicate comment id {rec.id!r}")
        seen.add(rec.id)
    return result


def read_comments(path, fmt: str | None = None, mapping: FieldMapping | None = None, epoch: bool = False) -> ParseResult:
    fmt = fmt or ("csv" if str(path).lower().endswith(".csv") else "jsonl")
    with open(path, "rb") as fh:
        return parse_comments(fh, fmt, mapping, epoch)


def comment_to_json(rec: CommentRecord) -> str:
    obj = {
        "id": rec.id,
        "timestamp": rec.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
        "text": rec.text,
        "tokens": list(rec.tokens),
    }
    if rec.label is not None:
        obj["label"] = rec.label.value
    if rec.predicted_prob is not None:
        obj["prob"] = rec.predicted_prob
    return json.dumps(obj, ensure_ascii=False)


def write_jsonl(records: Iterable[CommentRecord], fh: IO[str]) -> None:
    for rec in records:
        fh.write(comment_to_json(rec))
        fh.write("\n")


@dataclass(frozen=True)
class FilterStats:
    retained: int
    removed: int

    @property
    def removed_fraction(self) -> float:
        total = self.retained + self.removed
        return self.removed / total if total else 0.0

    def to_dict(self) -> dict:
        return {"retained": self.retained, "removed": self.removed, "removed_fraction": self.removed_fraction}


def matches_keywords(tokens: Sequence[str], keywords: KeywordList, exact: bool = False) -> bool:
    if exact:
        return not keywords.keywords.isdisjoint(tokens)
    prefixes = tuple(keywords.keywords)
    return any(t.startswith(prefixes) for t in tokens)


def keyword_filter(
    comments: Iterable[CommentRecord], keywords: KeywordList, exact: bool = False
) -> tuple[list[CommentRecord], FilterStats]:
    """Keep comments with at least one token that starts with (or, if exact, equals) a keyword."""
    kept, removed = [], 0
    for c in comments:
        if matches_keywords(c.tokens, keywords, exact):
            kept.append(c)
        else:
            removed += 1
    return kept, FilterStats(len(kept), removed)


def bucket_by_month(comments: Iterable[CommentRecord]) -> dict[MonthKey, list[CommentRecord]]:
    buckets: dict[MonthKey, list[CommentRecord]] = defaultdict(list)
    for c in comments:
        buckets[c.month].append(c)
    return {k: buckets[k] for k in sorted(buckets)}


def monthly_sample(
    buckets: Mapping[MonthKey, Sequence[CommentRecord]], n: int, seed: int
) -> dict[MonthKey, list[CommentRecord]]:
    """Downsample each month to at most ``n`` comments, uniformly without replacement.

    Every month draws from its own generator seeded by (seed, year, month), so
    the result for one month does not depend on which other months are present.
    """
    if n < 1:
        raise InputError("monthly sample size must be >= 1")
    out = {}
    for key in sorted(buckets):
        items = list(buckets[key])
        if len(items) <= n:
            out[key] = items
            continue
        rng = np.random.default_rng([seed, key.year, key.month])
        idx = np.sort(rng.choice(len(items), size=n, replace=False))
        out[key] = [items[i] for i in idx]
    return out
