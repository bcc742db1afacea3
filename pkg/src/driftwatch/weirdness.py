"""Word- and comment-level weirdness against a baseline period, plus the monthly drift indicator.

A word's weirdness in a month is its relative frequency in that month divided
by its relative frequency in the baseline period. A value of 1 means the word
is used exactly as often as in the baseline.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import chain
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError
from .ingest import CommentRecord, MonthKey

OOV_POLICIES = ("skip", "treat_as_one")


@dataclass
class FrequencyTable:
    counts: dict[str, int]
    total: int
    period: str = ""

    def __post_init__(self) -> None:
        if self.total != sum(self.counts.values()):
            raise ValueError("total does not match summed counts")

    def __len__(self) -> int:
        return len(self.counts)

    def get(self, word: str) -> int:
        return self.counts.get(word, 0)


def _count(token_lists: Iterable[Sequence[str]], stopwords: frozenset[str] | None) -> Counter:
    counter = Counter(chain.from_iterable(token_lists))
    if stopwords:
        for w in stopwords & counter.keys():
            del counter[w]
    return counter


def _table(counter: Mapping[str, int], period: str, min_count: int) -> FrequencyTable:
    counts = {w: c for w, c in counter.items() if c >= max(min_count, 1)}
    return FrequencyTable(counts, sum(counts.values()), period)


def build_frequency_table(
    comments: Iterable[CommentRecord] | Iterable[Sequence[str]],
    period: str = "",
    min_count: int = 1,
    stopwords: Iterable[str] | None = None,
) -> FrequencyTable:
    """Count tokens over comments; words below ``min_count`` are dropped and the total recomputed."""
    token_lists = (c.tokens if isinstance(c, CommentRecord) else c for c in comments)
    stop = frozenset(stopwords) if stopwords else None
    return _table(_count(token_lists, stop), period, min_count)


def merge_tables(tables: Iterable[FrequencyTable], period: str = "", min_count: int = 1) -> FrequencyTable:
    """Order-independent merge of sharded tables."""
    total: Counter = Counter()
    for t in tables:
        total.update(t.counts)
    return _table(total, period, min_count)


def baseline_ratio(baseline: FrequencyTable, word: str) -> float:
    if baseline.total <= 0:
        raise InputError("empty baseline")
    return baseline.get(word) / baseline.total


def _ratio(c_month: int, t_month: int, c_base: int, t_base: int, epsilon: float, v: int) -> float:
    num = (c_month + epsilon) / (t_month + epsilon * v)
    if c_base == 0 and epsilon == 0:
        return math.inf
    return num / ((c_base + epsilon) / (t_base + epsilon * v))


def word_weirdness(baseline: FrequencyTable, month: FrequencyTable, word: str, epsilon: float = 0.5) -> float:
    """Smoothed ratio of the word's month share to its baseline share.

    With ``epsilon == 0`` this is the raw ratio; a word unseen in the baseline
    then gets ``math.inf``.
    """
    if baseline.total <= 0:
        raise InputError("empty baseline")
    if month.total <= 0:
        raise InputError(f"empty month table {month.period}")
    if epsilon < 0:
        raise InputError("epsilon must be non-negative")
    cb, cm = baseline.get(word), month.get(word)
    if epsilon == 0 and cb == 0 and cm == 0:
        raise InputError(f"unknown word {word!r}")
    v = len(baseline.counts.keys() | month.counts.keys())
    return _ratio(cm, month.total, cb, baseline.total, epsilon, v)


def _population_std(values: Sequence[float]) -> float:
    if len(values) < 2:
        raise InputError("degenerate vocabulary")
    arr = np.fromiter(values, dtype=float, count=len(values))
    return float(arr.std())


@dataclass
class WeirdnessModel:
    baseline: FrequencyTable
    monthly: dict[MonthKey, FrequencyTable]
    smoothing_epsilon: float
    min_baseline_count: int
    vocabulary: tuple[str, ...]
    word_weirdness: dict[MonthKey, dict[str, float]] = field(default_factory=dict)
    drift_indicator: dict[MonthKey, float] = field(default_factory=dict)

    @property
    def months(self) -> list[MonthKey]:
        return sorted(self.word_weirdness)

    def trajectory(self, word: str) -> dict[MonthKey, float | None]:
        return {m: self.word_weirdness[m].get(word) for m in self.months}


def drift_indicator(model: WeirdnessModel, month: MonthKey) -> float:
    """Population standard deviation of the month's word weirdness over the model vocabulary."""
    if month not in model.word_weirdness:
        raise InputError(f"month {month} not in model")
    return _population_std(list(model.word_weirdness[month].values()))


def model_from_tables(
    baseline: FrequencyTable,
    monthly: Mapping[MonthKey, FrequencyTable],
    epsilon: float = 0.5,
    min_baseline_count: int = 5,
) -> WeirdnessModel:
    if baseline.total <= 0:
        raise InputError("empty baseline")
    if not monthly:
        raise InputError("no months to score")
    if epsilon < 0:
        raise InputError("epsilon must be non-negative")
    vocab = tuple(sorted(w for w, c in baseline.counts.items() if c >= min_baseline_count))
    model = WeirdnessModel(baseline, dict(monthly), epsilon, min_baseline_count, vocab)
    base_keys = baseline.counts.keys()
    for key in sorted(monthly):
        table = monthly[key]
        if table.total <= 0:
            raise InputError(f"empty month table {key}")
        v = len(base_keys | table.counts.keys())
        tm, tb = table.total, baseline.total
        model.word_weirdness[key] = {
            w: _ratio(table.get(w), tm, baseline.counts[w], tb, epsilon, v) for w in vocab
        }
        model.drift_indicator[key] = drift_indicator(model, key)
    return model


def compute_model(
    baseline_comments: Iterable[CommentRecord],
    monthly_comments: Mapping[MonthKey, Iterable[CommentRecord]],
    epsilon: float = 0.5,
    min_baseline_count: int = 5,
    stopwords: Iterable[str] | None = None,
) -> WeirdnessModel:
    """Build baseline and monthly tables, then word weirdness and drift for every month.

    The model vocabulary is every word seen at least ``min_baseline_count``
    times in the baseline.
    """
    stop = frozenset(stopwords) if stopwords else None
    baseline = build_frequency_table(baseline_comments, "baseline", stopwords=stop)
    monthly = {
        key: build_frequency_table(monthly_comments[key], str(key), stopwords=stop)
        for key in sorted(monthly_comments)
    }
    return model_from_tables(baseline, monthly, epsilon, min_baseline_count)


def comment_weirdness(
    tokens: Sequence[str],
    month_weirdness: Mapping[str, float],
    oov_policy: str = "skip",
    unique: bool = False,
) -> float | None:
    """Mean weirdness of a comment's tokens; None when no token can be scored.

    Repeated tokens count once per occurrence unless ``unique`` is set.
    Out-of-vocabulary tokens are skipped or scored as 1.0 per ``oov_policy``.
    """
    if oov_policy not in OOV_POLICIES:
        raise InputError(f"unknown oov policy {oov_policy!r}")
    if unique:
        tokens = list(dict.fromkeys(tokens))
    total, n = 0.0, 0
    for t in tokens:
        w = month_weirdness.get(t)
        if w is None:
            if oov_policy == "skip":
                continue
            w = 1.0
        total += w
        n += 1
    if n == 0:
        return None
    return total / n


def score_comments(
    model: WeirdnessModel,
    comments: Iterable[CommentRecord],
    oov_policy: str = "skip",
    unique: bool = False,
) -> dict[str, float | None]:
    """Comment weirdness keyed by id, each comment scored against its own month."""
    out: dict[str, float | None] = {}
    for c in comments:
        wmap = model.word_weirdness.get(c.month)
        out[c.id] = None if wmap is None else comment_weirdness(c.tokens, wmap, oov_policy, unique)
    return out


def write_frequency_table(table: FrequencyTable, fh: IO[str]) -> None:
    fh.write(f"# period={table.period} total={table.total}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["word", "count"])
    for word in sorted(table.counts, key=lambda k: (-table.counts[k], k)):
        w.writerow([word, table.counts[word]])


def read_frequency_table(fh: IO[str]) -> FrequencyTable:
    header = fh.readline()
    if not header.startswith("#"):
        raise InputError("frequency table lacks '# period=... total=...' header")
    meta = dict(part.split("=", 1) for part in header[1:].split() if "=" in part)
    reader = csv.DictReader(fh)
    counts = {row["word"]: int(row["count"]) for row in reader}
    table = FrequencyTable(counts, sum(counts.values()), meta.get("period", ""))
    if "total" in meta and int(meta["total"]) != table.total:
        raise InputError("header total disagrees with counts")
    return table


def write_word_weirdness(model: WeirdnessModel, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["month", "word", "weirdness"])
    for key in model.months:
        for word, value in model.word_weirdness[key].items():
            w.writerow([str(key), word, repr(value)])


def write_drift_summary(model: WeirdnessModel, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["month", "vocab_size", "drift_indicator"])
    for key in model.months:
        w.writerow([str(key), len(model.word_weirdness[key]), repr(model.drift_indicator[key])])
