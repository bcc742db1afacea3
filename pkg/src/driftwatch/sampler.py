"""Re-annotation sampling: uniform and weight-proportional draws without replacement.

Both samplers use numpy's PCG64 generator (``numpy.random.default_rng``), so
a given seed reproduces the same sample for a fixed numpy version.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import InputError

log = logging.getLogger(__name__)


@dataclass
class SamplePool:
    """Candidate comments with optional weights (None marks an undefined weight)."""

    items: list[tuple[str, float | None]]
    seed: int = 0
    excluded: list[str] = field(default_factory=list, init=False)

    def __post_init__(self) -> None:
        seen = set()
        for item_id, _ in self.items:
            if item_id in seen:
                raise InputError(f"duplicate id in pool: {item_id!r}")
            seen.add(item_id)

    @property
    def ids(self) -> list[str]:
        return [i for i, _ in self.items]

    def eligible(self) -> list[tuple[str, float]]:
        """Items usable for a weighted draw; undefined weights land in ``excluded``."""
        out, self.excluded = [], []
        for item_id, w in self.items:
            if w is None or (isinstance(w, float) and math.isnan(w)):
                self.excluded.append(item_id)
                continue
            if not math.isfinite(w) or w <= 0:
                raise InputError(f"weight for {item_id!r} must be finite and > 0, got {w}")
            out.append((item_id, float(w)))
        return out


def random_sample(pool: SamplePool, n: int, seed: int | None = None) -> list[str]:
    if n < 0:
        raise InputError("sample size must be >= 0")
    ids = pool.ids
    k = min(n, len(ids))
    if k == 0:
        return []
    rng = np.random.default_rng(pool.seed if seed is None else seed)
    return [ids[i] for i in rng.choice(len(ids), size=k, replace=False)]


def weighted_sample(pool: SamplePool, n: int, seed: int | None = None, exponent: float = 1.0) -> list[str]:
    """Draw ``n`` ids with probability proportional to weight, without replacement.

    Each item gets the key ``u ** (1 / w)`` with ``u ~ U(0, 1)``; the ``n``
    largest keys win. Keys are compared as ``log(u) / w`` which orders the same
    way without underflowing. Ties are broken by id. ``exponent`` raises every
    weight to a power before drawing.
    """
    if n < 0:
        raise InputError("sample size must be >= 0")
    items = pool.eligible()
    if pool.excluded:
        log.warning("%d pool items have undefined weight and were excluded", len(pool.excluded))
    if not items:
        raise InputError("no eligible items")
    k = min(n, len(items))
    if k == 0:
        return []
    rng = np.random.default_rng(pool.seed if seed is None else seed)
    weights = np.array([w for _, w in items], dtype=float) ** exponent
    u = rng.random(len(items))
    # random() can return exactly 0.0; log(0) = -inf would still rank last
    with np.errstate(divide="ignore"):
        keys = np.log(u) / weights
    ids = [i for i, _ in items]
    order = sorted(range(len(items)), key=lambda j: (-keys[j], ids[j]))
    return [ids[j] for j in order[:k]]


@dataclass(frozen=True)
class Overlap:
    count: int
    ids: list[str]

    def to_dict(self) -> dict:
        return {"count": self.count, "ids": self.ids}


def overlap_report(a: Iterable[str], b: Iterable[str]) -> Overlap:
    common = sorted(set(a) & set(b))
    return Overlap(len(common), common)


def read_pool(fh: IO[str], seed: int = 0, require_weights: bool = False) -> SamplePool:
    """Read an ``id,weight`` CSV. A ``weirdness`` column is accepted in place of ``weight``.

    Blank or ``nan`` weights are undefined. With ``require_weights`` a missing
    weight column is an InputError.
    """
    reader = csv.DictReader(fh)
    cols = reader.fieldnames or []
    if "id" not in cols:
        raise InputError("missing column 'id' in pool file")
    wcol = "weight" if "weight" in cols else ("weirdness" if "weirdness" in cols else None)
    if wcol is None and require_weights:
        raise InputError("pool file has no 'weight' (or 'weirdness') column")
    items = []
    for row in reader:
        raw = (row.get(wcol) or "").strip() if wcol else ""
        w = None
        if raw and raw.lower() != "nan":
            try:
                w = float(raw)
            except ValueError as exc:
                raise InputError(f"bad weight {raw!r} for {row['id']!r}") from exc
        items.append((row["id"], w))
    return SamplePool(items, seed)


def write_ids(ids: Sequence[str], fh: IO[str]) -> None:
    for i in ids:
        fh.write(f"{i}\n")


def write_overlap(overlap: Overlap, fh: IO[str]) -> None:
    json.dump(overlap.to_dict(), fh, indent=2)
    fh.write("\n")
