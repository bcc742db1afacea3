"""Acceptance criteria, one test per criterion.

Each test carries a ``criterion`` marker; conftest prints a pass/fail line per
criterion at the end of the run.
"""

from __future__ import annotations

import csv
import io
import json
import subprocess
import sys
import time
import xml.etree.ElementTree as ET
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from driftwatch.driftgen import DriftSpec, expected_weirdness, generate_corpus
from driftwatch.evaluate import cohens_kappa, confusion_metrics
from driftwatch.ingest import KeywordList, Label, MonthKey, ANTIVAX_KEYWORDS, keyword_filter, parse_comments
from driftwatch.sampler import SamplePool, weighted_sample
from driftwatch.weirdness import compute_model

from conftest import run_cli, write_spec

A, O = Label.ANTIVAX, Label.OTHER
SVG_NS = "{http://www.w3.org/2000/svg}"


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def months_after(start: MonthKey, n: int) -> list[MonthKey]:
    out = [start]
    while len(out) < n:
        out.append(out[-1].next())
    return out


@pytest.mark.criterion(1, "weirdness identity")
def test_weirdness_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    vocab = [f"szo{i}" for i in range(40)]
    probs = rng.dirichlet(np.full(40, 3.0))
    probs[-1] = 1.0 - probs[:-1].sum()
    months = months_after(MonthKey(2021, 2), 4)
    spec = DriftSpec(vocab, {m: {w: 1.0 for w in vocab[:5]} for m in months},
                     baseline_probs=probs.tolist(), comments_per_month=5000, tokens_per_comment=10,
                     seed=3, exact_counts=True)
    assert all(abs(v - 1.0) <= 1e-12 for ww in expected_weirdness(spec).values() for v in ww.values())
    baseline, monthly, _ = generate_corpus(spec)
    for eps in (0.5, 0.0):
        model = compute_model(baseline, monthly, epsilon=eps)
        assert model.vocabulary
        for m in months:
            assert all(abs(v - 1.0) <= 1e-12 for v in model.word_weirdness[m].values())
            assert abs(model.drift_indicator[m]) <= 1e-12
    assert time.perf_counter() - t0 < 5


def random_spec(rng: np.random.Generator, seed: int) -> DriftSpec:
    k = int(rng.integers(3, 13))
    vocab = [f"v{i}" for i in range(k)]
    # keep every baseline probability well away from zero so the baseline covers the vocabulary
    probs = 0.5 * rng.dirichlet(np.full(k, 2.0)) + 0.5 / k
    probs[-1] = 1.0 - probs[:-1].sum()
    months = months_after(MonthKey(2021, 1), int(rng.integers(1, 4)))
    sched = {m: {w: float(rng.uniform(0.2, 5.0)) for w in vocab if rng.random() < 0.5} for m in months}
    return DriftSpec(vocab, sched, baseline_probs=probs.tolist(), comments_per_month=int(rng.integers(300, 1500)),
                     tokens_per_comment=(1, 12), seed=seed)


@pytest.mark.criterion(2, "weirdness conservation")
def test_weirdness_conservation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    for seed in range(100):
        spec = random_spec(rng, seed)
        baseline, monthly, _ = generate_corpus(spec)
        model = compute_model(baseline, monthly, epsilon=0.0, min_baseline_count=1)
        tb = model.baseline.total
        for m, table in model.monthly.items():
            assert set(table.counts) <= set(model.baseline.counts), "precondition: month vocab within baseline"
            total = sum(c / tb * model.word_weirdness[m][w] for w, c in model.baseline.counts.items())
            assert abs(total - 1.0) <= 1e-9
    assert time.perf_counter() - t0 < 30


@pytest.mark.criterion(3, "analytic convergence")
def test_analytic_convergence():
    t0 = time.perf_counter()
    feb = MonthKey(2021, 2)
    spec = DriftSpec(["a", "b"], {feb: {"a": 3.0}}, comments_per_month=40_000, tokens_per_comment=10, seed=7)
    baseline, monthly, _ = generate_corpus(spec)
    model = compute_model(baseline, monthly, epsilon=0.0, min_baseline_count=1)
    ww = model.word_weirdness[feb]
    assert abs(ww["a"] - 1.5) <= 0.05
    assert abs(ww["b"] - 0.5) <= 0.05
    assert time.perf_counter() - t0 < 10


@pytest.mark.criterion(4, "drift spike end-to-end")
def test_drift_spike_end_to_end(tmp_path, capsys):
    t0 = time.perf_counter()
    vocab = [f"w{i}" for i in range(30)]
    months = months_after(MonthKey(2021, 3), 6)
    sched = {str(m): {"w0": 1.0 + 0.1 * i, "w1": 1.1} for i, m in enumerate(months)}
    sched[str(months[3])] = {"w0": 4.0, "w1": 3.0, "w2": 0.3}
    spec = write_spec(tmp_path / "spec.json", vocabulary=vocab, monthly_multipliers=sched,
                      comments_per_month=4000, tokens_per_comment=[5, 15], seed=9)
    code, sim, err = run_cli(["simulate", "--spec", spec, "--out", tmp_path / "runs"], capsys)
    assert code == 0, err
    code, run, err = run_cli(["stats", "-i", sim / "corpus.jsonl", "--baseline-start", "2021-02",
                              "--baseline-end", "2021-02", "--out", tmp_path / "runs"], capsys)
    assert code == 0, err
    rows = [r for r in read_csv(run / "drift.csv") if r["month"] != "2021-02"]
    labels = [r["month"] for r in rows]
    assert labels == [str(m) for m in months]
    drift = [float(r["drift_indicator"]) for r in rows]
    assert labels[drift.index(max(drift))] == str(months[3])

    # the chart agrees: the highest point (smallest y) sits at the spike month
    root = ET.fromstring((run / "drift.svg").read_bytes())
    (line,) = list(root.iter(f"{SVG_NS}polyline"))
    ys = [float(p.split(",")[1]) for p in line.get("points").split()]
    all_labels = [r["month"] for r in read_csv(run / "drift.csv")]
    assert len(ys) == len(all_labels)
    assert all_labels[ys.index(min(ys))] == str(months[3])
    assert time.perf_counter() - t0 < 30


@pytest.mark.criterion(5, "weighted sampling correctness")
def test_weighted_sampling_frequencies():
    t0 = time.perf_counter()
    pool = SamplePool([("a", 1.0), ("b", 2.0), ("c", 7.0)])
    draws = 100_000
    counts = {"a": 0, "b": 0, "c": 0}
    for seed in range(draws):
        (pick,) = weighted_sample(pool, 1, seed=seed)
        counts[pick] += 1
    for key, p in (("a", 0.1), ("b", 0.2), ("c", 0.7)):
        assert abs(counts[key] / draws - p) <= 0.01
    assert time.perf_counter() - t0 < 20


@pytest.mark.criterion(6, "two-sample workflow")
def test_two_sample_workflow(tmp_path, capsys):
    rng = np.random.default_rng(6)
    pool = tmp_path / "pool.csv"
    with open(pool, "w", encoding="utf-8") as fh:
        fh.write("id,weirdness\n")
        for i, w in enumerate(rng.lognormal(0.0, 0.4, 4500)):
            fh.write(f"c{i:05d},{float(w)!r}\n")

    def run(out):
        code, d, err = run_cli(["sample", "--pool", pool, "-n", "1500", "--seed", "17", "--out", out], capsys)
        assert code == 0, err
        return d

    first = run(tmp_path / "a")
    files = sorted(p.name for p in first.iterdir())
    assert {"sample_random.txt", "sample_weirdness.txt", "overlap.json"} <= set(files)
    snapshot = {name: (first / name).read_bytes() for name in files}
    rand = (first / "sample_random.txt").read_text().split()
    weird = (first / "sample_weirdness.txt").read_text().split()
    assert len(rand) == len(set(rand)) == 1500
    assert len(weird) == len(set(weird)) == 1500
    ov = json.loads((first / "overlap.json").read_text())
    assert ov["count"] == len(set(rand) & set(weird)) == len(ov["ids"])

    again = run(tmp_path / "a")
    elsewhere = run(tmp_path / "b")
    assert again == first
    for d in (again, elsewhere):
        assert sorted(p.name for p in d.iterdir()) == files
        assert {name: (d / name).read_bytes() for name in files} == snapshot


def confusion_fixture(tp, fp, fn, tn):
    gold = [A] * tp + [O] * fp + [A] * fn + [O] * tn
    pred = [A] * tp + [A] * fp + [O] * fn + [O] * tn
    return gold, pred


@pytest.mark.criterion(7, "metric exactness")
def test_metric_exactness():
    rep = confusion_metrics(*confusion_fixture(50, 20, 30, 100))
    a, o = rep.per_class[A], rep.per_class[O]
    # hand oracle
    assert abs(a.precision - 50 / 70) <= 1e-12
    assert abs(a.recall - 50 / 80) <= 1e-12
    assert abs(a.f1 - 2 * 50 / (2 * 50 + 20 + 30)) <= 1e-12
    assert abs(o.precision - 100 / 130) <= 1e-12
    assert abs(o.recall - 100 / 120) <= 1e-12
    assert abs(o.f1 - 2 * 100 / (2 * 100 + 30 + 20)) <= 1e-12
    assert abs(rep.accuracy - 150 / 200) <= 1e-12

    rng = np.random.default_rng(7)
    gold = [A if x else O for x in rng.random(1000) < 0.3]
    pred = [A if x else O for x in rng.random(1000) < 0.45]
    rep = confusion_metrics(gold, pred)
    weighted = sum(gold.count(c) / len(gold) * rep.per_class[c].recall for c in (A, O))
    assert abs(rep.accuracy - weighted) <= 1e-12
    assert abs(rep.accuracy - rep.weighted.recall) <= 1e-12


def write_eval_inputs(d: Path, gold: dict, probs: dict, weird: dict | None = None) -> list:
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "gold.csv", "w", encoding="utf-8") as fh:
        fh.write("id,label\n")
        fh.writelines(f"{i},{lab.value}\n" for i, lab in gold.items())
    with open(d / "base.csv", "w", encoding="utf-8") as fh:
        fh.write("id,prob\n")
        fh.writelines(f"{i},{p!r}\n" for i, p in probs.items())
    args = ["evaluate", "--gold", d / "gold.csv", "--predictions", f"Base model={d / 'base.csv'}", "--out", d / "o"]
    if weird is not None:
        with open(d / "weird.csv", "w", encoding="utf-8") as fh:
            fh.write("id,month,weirdness\n")
            fh.writelines(f"{i},2021-11,{w!r}\n" for i, w in weird.items())
        args += ["--weirdness", d / "weird.csv"]
    return args


@pytest.mark.criterion(8, "report table rendering")
def test_report_table_rendering(tmp_path, capsys):
    # 84 test items: TP 17, FP 12, FN 22, TN 33
    gold, pred = confusion_fixture(17, 12, 22, 33)
    ids = [f"t{i:02d}" for i in range(84)]
    probs = {i: (0.8 if p is A else 0.2) for i, p in zip(ids, pred)}
    code, run, err = run_cli(write_eval_inputs(tmp_path / "s3", dict(zip(ids, gold)), probs), capsys)
    assert code == 0, err
    report = (run / "report.txt").read_text(encoding="utf-8")
    row = next(line for line in report.splitlines() if "Anti-vaxxer" in line and "Non" not in line)
    assert row.rstrip().endswith("0.60  0.50  0.59  0.44")

    # confidence = |0.5 - p|: low-weirdness slice 0.39, all 0.18, high-weirdness slice 0.16
    weird, probs = {}, {}
    for i in range(100):
        weird[f"l{i}"], probs[f"l{i}"] = 0.5, 0.89
    for i in range(200):
        weird[f"h{i}"], probs[f"h{i}"] = 1.5, 0.34
    for i in range(200):
        weird[f"m{i}"], probs[f"m{i}"] = 1.0, 0.595
    gold = {i: A for i in probs}
    code, run, err = run_cli(write_eval_inputs(tmp_path / "t1", gold, probs, weird), capsys)
    assert code == 0, err
    header, line = (run / "confidence.txt").read_text(encoding="utf-8").splitlines()
    assert header.index("Weird<0.9") < header.index("All test data") < header.index("Weird>1.2")
    assert line.startswith("Base model")
    assert line.split()[-4:-1] == ["0.39", "0.18", "0.16"]


@pytest.mark.criterion(9, "kappa oracle")
def test_kappa_oracle():
    assert cohens_kappa(list("XXYY"), list("XYXY")) == pytest.approx(0.0, abs=1e-12)
    seq = list("XYYXXYXXXY")
    assert cohens_kappa(seq, seq) == 1.0
    # 2x2 table: both X 20, X/Y 5, Y/X 10, both Y 15
    a = ["X"] * 20 + ["X"] * 5 + ["Y"] * 10 + ["Y"] * 15
    b = ["X"] * 20 + ["Y"] * 5 + ["X"] * 10 + ["Y"] * 15
    n = Fraction(50)
    po = (20 + 15) / n
    pe = (25 / n) * (30 / n) + (25 / n) * (20 / n)
    oracle = (po - pe) / (1 - pe)
    assert oracle == Fraction(2, 5)
    assert abs(cohens_kappa(a, b) - float(oracle)) <= 1e-12


THROUGHPUT_SCRIPT = r"""
import json, resource, time
from datetime import datetime, timezone
import numpy as np
from driftwatch.ingest import CommentRecord, bucket_by_month
from driftwatch.weirdness import compute_model, score_comments

N, MONTHS = 1_000_000, 10
rng = np.random.default_rng(0)
vocab = [f"w{i}" for i in range(5000)]
p = 1.0 / np.arange(1, 5001)
p /= p.sum()
lengths = rng.integers(5, 16, N)
flat = rng.choice(len(vocab), size=int(lengths.sum()), p=p)
stamps = [datetime(2021, m + 1, 15, tzinfo=timezone.utc) for m in range(MONTHS)]
comments = []
for i, ids in enumerate(np.split(flat, np.cumsum(lengths)[:-1])):
    comments.append(CommentRecord(f"c{i}", stamps[i % MONTHS], "", tuple(vocab[j] for j in ids.tolist())))
t0 = time.perf_counter()
months = bucket_by_month(comments)
model = compute_model(months[min(months)], months)
scores = score_comments(model, comments)
elapsed = time.perf_counter() - t0
print(json.dumps({"elapsed": elapsed, "comments": len(comments), "tokens": int(lengths.sum()),
                  "scored": sum(v is not None for v in scores.values()),
                  "maxrss_kb": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss}))
"""


@pytest.mark.slow
@pytest.mark.criterion(10, "throughput")
def test_throughput():
    proc = subprocess.run([sys.executable, "-c", THROUGHPUT_SCRIPT], capture_output=True, text=True, timeout=600)
    assert proc.returncode == 0, proc.stderr
    stats = json.loads(proc.stdout.strip().splitlines()[-1])
    print(f"throughput: {stats}")
    assert stats["comments"] == 1_000_000
    assert 9.5e6 <= stats["tokens"] <= 10.5e6
    assert stats["scored"] == 1_000_000
    assert stats["elapsed"] < 60
    # ru_maxrss is in kilobytes on Linux
    assert stats["maxrss_kb"] * 1024 < 2 * 1024**3


@pytest.mark.criterion(11, "keyword filter proportion")
def test_keyword_filter_proportion():
    rng = np.random.default_rng(11)
    plain = ["szia", "holnap", "reggel", "időjárás", "foci", "meccs", "tegnap", "jó", "szép", "lesz"]
    keyworded = ["oltás", "vakcinaellenes", "pfizer", "nem", "100%", "kínai", "astrazeneca", "oltópont"]
    n, free = 4000, 1100
    rows = []
    for i in range(n):
        words = list(rng.choice(plain, size=int(rng.integers(1, 8))))
        if i >= free:
            words.insert(int(rng.integers(0, len(words) + 1)), str(rng.choice(keyworded)))
        rows.append(json.dumps({"id": f"k{i}", "timestamp": "2021-03-04T05:06:07Z", "text": " ".join(words)},
                               ensure_ascii=False))
    parsed = parse_comments(io.StringIO("\n".join(rows)), "jsonl")
    assert parsed.skip_count == 0 and len(parsed.records) == n
    kept, stats = keyword_filter(parsed.records, KeywordList(ANTIVAX_KEYWORDS))
    assert stats.retained + stats.removed == n
    assert abs(stats.removed_fraction - 0.275) <= 1e-12
    assert all(int(c.id[1:]) >= free for c in kept)
