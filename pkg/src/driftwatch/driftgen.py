"""Synthetic timestamped corpora with analytically known per-month token distributions.

Tokens are drawn i.i.d. from a categorical distribution per period, so the
expected weirdness of word ``w`` in month ``m`` is exactly ``p_m(w) / p_base(w)``.
With ``exact_counts`` each period instead contains its expected token counts
(largest-remainder rounding) in random order, which makes the empirical
weirdness equal the analytic value whenever the counts divide evenly.
"""

from __future__ import annotations

import calendar
import json
from dataclasses import dataclass, field
from datetime import timedelta
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError
from .ingest import CommentRecord, MonthKey


@dataclass
class DriftSpec:
    vocabulary: list[str]
    monthly_multipliers: dict[MonthKey, dict[str, float]]
    baseline_probs: list[float] | None = None  # uniform when None
    baseline_months: list[MonthKey] = field(default_factory=list)
    comments_per_month: int = 1000
    tokens_per_comment: int | tuple[int, int] = 10
    seed: int = 0
    exact_counts: bool = False

    def __post_init__(self) -> None:
        if len(set(self.vocabulary)) != len(self.vocabulary) or not self.vocabulary:
            raise InputError("vocabulary must be non-empty and unique")
        if self.baseline_probs is None:
            self.baseline_probs = [1.0 / len(self.vocabulary)] * len(self.vocabulary)
        if len(self.baseline_probs) != len(self.vocabulary):
            raise InputError("baseline_probs length differs from vocabulary")
        if any(p <= 0 for p in self.baseline_probs):
            raise InputError("baseline_probs must be strictly positive")
        if abs(sum(self.baseline_probs) - 1.0) > 1e-12:
            raise InputError("baseline_probs must sum to 1")
        if not self.monthly_multipliers:
            raise InputError("at least one month is required")
        vocab = set(self.vocabulary)
        for key, mults in self.monthly_multipliers.items():
            for w, m in mults.items():
                if w not in vocab:
                    raise InputError(f"multiplier for unknown word {w!r} in {key}")
                if not m > 0:
                    raise InputError(f"multiplier must be > 0: {w!r} in {key}")
        if not self.baseline_months:
            first = min(self.monthly_multipliers)
            prev = MonthKey(first.year - 1, 12) if first.month == 1 else MonthKey(first.year, first.month - 1)
            self.baseline_months = [prev]
        if set(self.baseline_months) & set(self.monthly_multipliers):
            raise InputError("baseline months overlap monitored months")
        if self.comments_per_month < 0:
            raise InputError("comments_per_month must be >= 0")
        lo, hi = self.token_range
        if lo < 0 or hi < lo:
            raise InputError("bad tokens_per_comment")

    @property
    def token_range(self) -> tuple[int, int]:
        t = self.tokens_per_comment
        return (t, t) if isinstance(t, int) else (int(t[0]), int(t[1]))

    @property
    def months(self) -> list[MonthKey]:
        return sorted(self.monthly_multipliers)

    def month_probs(self, month: MonthKey) -> np.ndarray:
        base = np.asarray(self.baseline_probs, dtype=float)
        mults = self.monthly_multipliers[month]
        raw = base * np.array([mults.get(w, 1.0) for w in self.vocabulary])
        return raw / raw.sum()

    @classmethod
    def from_dict(cls, obj: Mapping) -> "DriftSpec":
        tpc = obj.get("tokens_per_comment", 10)
        return cls(
            vocabulary=list(obj["vocabulary"]),
            monthly_multipliers={
                MonthKey.parse(k): {w: float(m) for w, m in v.items()}
                for k, v in obj["monthly_multipliers"].items()
            },
            baseline_probs=obj.get("baseline_probs"),
            baseline_months=[MonthKey.parse(m) for m in obj.get("baseline_months", [])],
            comments_per_month=int(obj.get("comments_per_month", 1000)),
            tokens_per_comment=tpc if isinstance(tpc, int) else tuple(tpc),
            seed=int(obj.get("seed", 0)),
            exact_counts=bool(obj.get("exact_counts", False)),
        )

    def to_dict(self) -> dict:
        tpc = self.tokens_per_comment
        return {
            "vocabulary": self.vocabulary,
            "baseline_probs": self.baseline_probs,
            "baseline_months": [str(m) for m in self.baseline_months],
            "monthly_multipliers": {str(k): v for k, v in sorted(self.monthly_multipliers.items())},
            "comments_per_month": self.comments_per_month,
            "tokens_per_comment": tpc if isinstance(tpc, int) else list(tpc),
            "seed": self.seed,
            "exact_counts": self.exact_counts,
        }

    @classmethod
    def load(cls, path) -> "DriftSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def expected_weirdness(spec: DriftSpec) -> dict[MonthKey, dict[str, float]]:
    base = np.asarray(spec.baseline_probs, dtype=float)
    out = {}
    for key in spec.months:
        ratio = spec.month_probs(key) / base
        out[key] = dict(zip(spec.vocabulary, ratio.tolist()))
    return out


def expected_drift_indicator(spec: DriftSpec, month: MonthKey) -> float:
    if month not in spec.monthly_multipliers:
        raise InputError(f"month {month} not in spec")
    ratio = spec.month_probs(month) / np.asarray(spec.baseline_probs, dtype=float)
    return float(ratio.std())


def allocate_counts(probs: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder split of ``total`` tokens by ``probs``; ties go to the lower index."""
    raw = probs * total
    counts = np.floor(raw).astype(np.int64)
    short = total - int(counts.sum())
    if short:
        order = np.lexsort((np.arange(len(probs)), -(raw - counts)))
        counts[order[:short]] += 1
    return counts


def _draw_month(spec: DriftSpec, key: MonthKey, probs: np.ndarray, prefix: str) -> list[CommentRecord]:
    rng = np.random.default_rng([spec.seed, key.year, key.month])
    n = spec.comments_per_month
    lo, hi = spec.token_range
    vocab = np.array(spec.vocabulary, dtype=object)
    lengths = np.full(n, lo) if lo == hi else rng.integers(lo, hi + 1, size=n)
    total = int(lengths.sum())
    if spec.exact_counts:
        # the period's token counts realise probs exactly (up to rounding); only order is random
        ids = np.repeat(np.arange(len(vocab)), allocate_counts(probs, total))
        rng.shuffle(ids)
    else:
        ids = rng.choice(len(vocab), size=total, p=probs)
    flat = vocab[ids].tolist()
    bounds = np.concatenate([[0], np.cumsum(lengths)]).tolist()
    token_lists = [flat[bounds[i]:bounds[i + 1]] for i in range(n)]
    seconds = calendar.monthrange(key.year, key.month)[1] * 86400
    offsets = np.sort(rng.integers(0, seconds, size=n)).tolist()
    start = key.start()
    return [
        CommentRecord(f"{prefix}{key}-{i:07d}", start + timedelta(seconds=offsets[i]), " ".join(toks), tuple(toks))
        for i, toks in enumerate(token_lists)
    ]


def generate_corpus(
    spec: DriftSpec,
) -> tuple[list[CommentRecord], dict[MonthKey, list[CommentRecord]], dict[MonthKey, dict[str, float]]]:
    """Return (baseline comments, monitored comments by month, expected weirdness by month).

    Each month draws from its own generator seeded by (seed, year, month).
    """
    base = np.asarray(spec.baseline_probs, dtype=float)
    base = base / base.sum()
    baseline = []
    for key in sorted(spec.baseline_months):
        baseline.extend(_draw_month(spec, key, base, "b"))
    months = {key: _draw_month(spec, key, spec.month_probs(key), "m") for key in spec.months}
    return baseline, months, expected_weirdness(spec)


def linear_schedule(
    start: MonthKey, n_months: int, slope: float, rising: Sequence[str]
) -> dict[MonthKey, dict[str, float]]:
    """Multipliers 1 + slope * k for the ``rising`` words in month k (k = 1..n_months)."""
    out = {}
    key = start
    for k in range(1, n_months + 1):
        out[key] = {w: 1.0 + slope * k for w in rising}
        key = key.next()
    return out
