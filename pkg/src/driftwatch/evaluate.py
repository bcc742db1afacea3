"""Annotation agreement, adjudication, confidence, confusion metrics and weirdness-sliced reports."""

from __future__ import annotations

import csv
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Hashable, Iterable, Mapping, Sequence

from .errors import InputError
from .ingest import Label

CLASSES = (Label.ANTIVAX, Label.OTHER)
DEFAULT_LOW = 0.9
DEFAULT_HIGH = 1.2


def adjudicate(a1: Label, a2: Label, supervisor: Label | None = None) -> Label:
    if a1 == a2:
        return a1
    if supervisor is None:
        raise InputError("unadjudicated disagreement")
    return supervisor


@dataclass(frozen=True)
class AnnotationRecord:
    annotator1: Label
    annotator2: Label
    supervisor: Label | None = None
    final: Label = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "final", adjudicate(self.annotator1, self.annotator2, self.supervisor))


def cohens_kappa(a: Sequence[Hashable], b: Sequence[Hashable]) -> float:
    """Cohen's kappa, (p_o - p_e) / (1 - p_e), with chance agreement from the two marginals."""
    if len(a) != len(b):
        raise InputError(f"label sequences differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise InputError("kappa needs at least one item")
    n = len(a)
    p_o = sum(x == y for x, y in zip(a, b)) / n
    ca, cb = Counter(a), Counter(b)
    p_e = sum(ca[k] * cb[k] for k in ca.keys() | cb.keys()) / (n * n)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def confidence(prob: float) -> float:
    """Distance of the positive-class probability from 0.5, in [0, 0.5]."""
    if not 0.0 <= prob <= 1.0 or math.isnan(prob):
        raise InputError(f"probability out of [0,1]: {prob}")
    return abs(0.5 - prob)


def predict_labels(probs: Iterable[float], threshold: float = 0.5) -> list[Label]:
    return [Label.ANTIVAX if p >= threshold else Label.OTHER for p in probs]


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    classes: tuple
    confusion: list[list[int]]  # rows gold, columns predicted
    accuracy: float
    per_class: dict
    macro: ClassMetrics
    weighted: ClassMetrics
    mean_confidence: float | None = None
    slice: str = "all"

    @property
    def n(self) -> int:
        return sum(map(sum, self.confusion))


def _safe_div(num: float, den: float, what: str) -> float:
    if den == 0:
        warnings.warn(f"{what} undefined (zero denominator); reported as 0", RuntimeWarning, stacklevel=3)
        return 0.0
    return num / den


def confusion_metrics(
    gold: Sequence[Hashable],
    predicted: Sequence[Hashable],
    classes: Sequence[Hashable] = CLASSES,
    probs: Sequence[float] | None = None,
    slice_label: str = "all",
) -> EvalReport:
    if len(gold) != len(predicted):
        raise InputError(f"gold and predicted differ in length: {len(gold)} vs {len(predicted)}")
    if not gold:
        raise InputError("cannot evaluate an empty set")
    index = {c: i for i, c in enumerate(classes)}
    k = len(classes)
    cm = [[0] * k for _ in range(k)]
    for g, p in zip(gold, predicted):
        try:
            cm[index[g]][index[p]] += 1
        except KeyError as exc:
            raise InputError(f"label {exc.args[0]!r} not in classes {list(classes)}") from None
    n = len(gold)
    per_class = {}
    for i, c in enumerate(classes):
        tp = cm[i][i]
        fp = sum(cm[r][i] for r in range(k)) - tp
        fn = sum(cm[i]) - tp
        prec = _safe_div(tp, tp + fp, f"precision for {c}")
        rec = _safe_div(tp, tp + fn, f"recall for {c}")
        f1 = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
        per_class[c] = ClassMetrics(prec, rec, f1, tp + fn)
    rows = list(per_class.values())
    macro = ClassMetrics(
        sum(m.precision for m in rows) / k, sum(m.recall for m in rows) / k, sum(m.f1 for m in rows) / k, n
    )
    weighted = ClassMetrics(
        sum(m.precision * m.support for m in rows) / n,
        sum(m.recall * m.support for m in rows) / n,
        sum(m.f1 * m.support for m in rows) / n,
        n,
    )
    mean_conf = None
    if probs is not None:
        if len(probs) != n:
            raise InputError("probs and labels differ in length")
        mean_conf = sum(confidence(p) for p in probs) / n
    accuracy = sum(cm[i][i] for i in range(k)) / n
    return EvalReport(tuple(classes), cm, accuracy, per_class, macro, weighted, mean_conf, slice_label)


def slice_by_weirdness(
    weirdness: Mapping[str, float | None], op: str, threshold: float
) -> tuple[list[str], list[str]]:
    """Ids whose weirdness is strictly below (``lt``) or above (``gt``) the threshold.

    Returns ``(selected, undefined)``; ids with undefined weirdness are in no slice.
    """
    if op not in ("lt", "gt"):
        raise InputError(f"op must be 'lt' or 'gt', got {op!r}")
    selected, undefined = [], []
    for i, w in weirdness.items():
        if w is None:
            undefined.append(i)
        elif (w < threshold) if op == "lt" else (w > threshold):
            selected.append(i)
    return selected, undefined


def middle_band(weirdness: Mapping[str, float | None], low: float, high: float) -> list[str]:
    """Ids with low <= weirdness <= high."""
    return [i for i, w in weirdness.items() if w is not None and low <= w <= high]


@dataclass(frozen=True)
class ConfidenceRow:
    low: float
    all: float
    high: float
    middle: float
    counts: tuple[int, int, int, int]  # low, all, high, middle


@dataclass
class ConfidenceTable:
    rows: dict[str, ConfidenceRow]
    low_threshold: float = DEFAULT_LOW
    high_threshold: float = DEFAULT_HIGH


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else math.nan


def check_aligned(reference: Iterable[str], models: Mapping[str, Mapping[str, float]]) -> None:
    ref = set(reference)
    for name, preds in models.items():
        missing = sorted(ref - preds.keys())
        extra = sorted(preds.keys() - ref)
        if missing or extra:
            raise InputError(
                f"model {name!r} id mismatch; missing: {missing[:10]}; unexpected: {extra[:10]}"
            )


def confidence_table(
    models: Mapping[str, Mapping[str, float]],
    weirdness: Mapping[str, float | None],
    low: float = DEFAULT_LOW,
    high: float = DEFAULT_HIGH,
) -> ConfidenceTable:
    """Mean confidence per model over the weird<low, all and weird>high slices.

    Every model must predict the same id set. Ids without a weirdness value
    count towards "all" only.
    """
    if not models:
        raise InputError("no models given")
    first = next(iter(models.values()))
    check_aligned(first.keys(), models)
    ids = sorted(first)
    w = {i: weirdness.get(i) for i in ids}
    low_ids, _ = slice_by_weirdness(w, "lt", low)
    high_ids, _ = slice_by_weirdness(w, "gt", high)
    mid_ids = middle_band(w, low, high)
    rows = {}
    for name, preds in models.items():
        conf = {i: confidence(preds[i]) for i in ids}
        rows[name] = ConfidenceRow(
            low=_mean([conf[i] for i in low_ids]),
            all=_mean(list(conf.values())),
            high=_mean([conf[i] for i in high_ids]),
            middle=_mean([conf[i] for i in mid_ids]),
            counts=(len(low_ids), len(ids), len(high_ids), len(mid_ids)),
        )
    return ConfidenceTable(rows, low, high)


def _fmt(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "n/a"
    return f"{x:.2f}"


def render_confidence_table(table: ConfidenceTable) -> str:
    headers = [
        "",
        f"Weird<{table.low_threshold:g}",
        "All test data",
        f"Weird>{table.high_threshold:g}",
        f"{table.low_threshold:g}<=Weird<={table.high_threshold:g}",
    ]
    body = [[name, _fmt(r.low), _fmt(r.all), _fmt(r.high), _fmt(r.middle)] for name, r in table.rows.items()]
    widths = [max(len(row[c]) for row in [headers] + body) for c in range(len(headers))]
    lines = []
    for row in [headers] + body:
        cells = [row[0].ljust(widths[0])] + [row[c].rjust(widths[c]) for c in range(1, len(row))]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def _class_name(c) -> str:
    return c.display if isinstance(c, Label) else str(c)


def render_reports(sections: Sequence[tuple[str, EvalReport]]) -> str:
    """Aligned text in the layout Model / Class / Accuracy / f1-score / Precision / Recall.

    Numbers are four characters wide separated by two spaces, so a row reads
    e.g. ``0.60  0.50  0.59  0.44``. Accuracy appears on the first class row only.
    """
    rows = []
    for model, rep in sections:
        label = model if rep.slice == "all" else f"{model} [{rep.slice}]"
        for j, c in enumerate(rep.classes):
            m = rep.per_class[c]
            acc = _fmt(rep.accuracy) if j == 0 else ""
            rows.append((label if j == 0 else "", _class_name(c), acc.ljust(4), _fmt(m.f1), _fmt(m.precision), _fmt(m.recall)))
    w0 = max([len("Model")] + [len(r[0]) for r in rows])
    w1 = max([len("Class")] + [len(r[1]) for r in rows])
    lines = ["  ".join(["Model".ljust(w0), "Class".ljust(w1), "Acc.", "F1  ", "Prec", "Rec"])]
    for r in rows:
        lines.append("  ".join([r[0].ljust(w0), r[1].ljust(w1), *r[2:]]).rstrip())
    return "\n".join(lines) + "\n"


REPORT_FIELDS = ["model", "slice", "n", "class", "accuracy", "precision", "recall", "f1", "support", "mean_confidence"]


def write_reports_csv(sections: Sequence[tuple[str, EvalReport]], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for model, rep in sections:
        mc = "" if rep.mean_confidence is None else repr(rep.mean_confidence)
        named = [(_class_name(c), rep.per_class[c]) for c in rep.classes]
        named += [("macro", rep.macro), ("weighted", rep.weighted)]
        for cname, m in named:
            w.writerow([model, rep.slice, rep.n, cname, repr(rep.accuracy), repr(m.precision),
                        repr(m.recall), repr(m.f1), m.support, mc])


def write_confidence_csv(table: ConfidenceTable, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["model", "weird_low", "all", "weird_high", "middle", "n_low", "n_all", "n_high", "n_middle"])
    for name, r in table.rows.items():
        w.writerow([name, repr(r.low), repr(r.all), repr(r.high), repr(r.middle), *r.counts])


def read_predictions(fh: IO[str]) -> dict[str, float]:
    reader = csv.DictReader(fh)
    for col in ("id", "prob"):
        if col not in (reader.fieldnames or []):
            raise InputError(f"missing column {col!r} in prediction file")
    out = {}
    for row in reader:
        try:
            p = float(row["prob"])
        except ValueError as exc:
            raise InputError(f"bad probability {row['prob']!r} for {row['id']!r}") from exc
        confidence(p)
        out[row["id"]] = p
    return out


def read_gold(fh: IO[str]) -> dict[str, Label]:
    """Gold labels from ``id,annotator1,annotator2[,supervisor]`` or ``id,label`` CSV."""
    reader = csv.DictReader(fh)
    cols = reader.fieldnames or []
    if "id" not in cols:
        raise InputError("missing column 'id' in gold file")
    double = "annotator1" in cols and "annotator2" in cols
    if not double and "label" not in cols:
        raise InputError("gold file needs annotator1/annotator2 columns or a label column")
    out = {}
    for row in reader:
        if double:
            sup = (row.get("supervisor") or "").strip()
            rec = AnnotationRecord(
                Label.parse(row["annotator1"]), Label.parse(row["annotator2"]), Label.parse(sup) if sup else None
            )
            out[row["id"]] = rec.final
        else:
            out[row["id"]] = Label.parse(row["label"])
    return out


def read_annotations(fh: IO[str]) -> dict[str, AnnotationRecord]:
    reader = csv.DictReader(fh)
    for col in ("id", "annotator1", "annotator2"):
        if col not in (reader.fieldnames or []):
            raise InputError(f"missing column {col!r} in annotation file")
    out = {}
    for row in reader:
        sup = (row.get("supervisor") or "").strip()
        out[row["id"]] = AnnotationRecord(
            Label.parse(row["annotator1"]), Label.parse(row["annotator2"]), Label.parse(sup) if sup else None
        )
    return out
