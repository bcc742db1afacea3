from __future__ import annotations

import io
import statistics

import numpy as np
import pytest

from driftwatch.driftgen import (
    DriftSpec,
    expected_drift_indicator,
    expected_weirdness,
    generate_corpus,
    linear_schedule,
)
from driftwatch.errors import InputError
from driftwatch.ingest import MonthKey, parse_comments, write_jsonl
from driftwatch.weirdness import compute_model

JAN, FEB = MonthKey(2021, 1), MonthKey(2021, 2)


def test_identity_spec_has_unit_expected_weirdness():
    spec = DriftSpec(list("abcd"), {FEB: {}, MonthKey(2021, 3): {"a": 1.0}})
    for month, ww in expected_weirdness(spec).items():
        assert all(v == pytest.approx(1.0, abs=1e-15) for v in ww.values())
        assert expected_drift_indicator(spec, month) == pytest.approx(0.0, abs=1e-15)


def test_two_word_renormalization():
    spec = DriftSpec(["x", "y"], {FEB: {"x": 3.0}})
    # (0.5 * 3, 0.5 * 1) renormalized to (0.75, 0.25); divided by 0.5 each
    ww = expected_weirdness(spec)[FEB]
    assert ww["x"] == pytest.approx(1.5, abs=1e-15)
    assert ww["y"] == pytest.approx(0.5, abs=1e-15)
    assert expected_drift_indicator(spec, FEB) == pytest.approx(0.5, abs=1e-15)


def test_linear_schedule_drift_strictly_increasing():
    vocab = [f"w{i}" for i in range(10)]
    sched = linear_schedule(FEB, 6, 0.4, ["w0", "w1"])
    spec = DriftSpec(vocab, sched)
    got = [expected_drift_indicator(spec, m) for m in spec.months]
    # hand oracle: two words at weight 1 + 0.4k, eight at 1, all over a uniform baseline
    oracle = []
    for k in range(1, 7):
        m = 1 + 0.4 * k
        z = (2 * m + 8) / 10
        oracle.append(statistics.pstdev([m / z] * 2 + [1 / z] * 8))
    assert got == pytest.approx(oracle, abs=1e-12)
    assert all(b > a for a, b in zip(got, got[1:]))


def test_expected_drift_unknown_month():
    spec = DriftSpec(["x", "y"], {FEB: {}})
    with pytest.raises(InputError):
        expected_drift_indicator(spec, MonthKey(2030, 1))


def test_generation_is_deterministic_and_seed_sensitive():
    spec = DriftSpec(list("abcde"), {FEB: {"a": 2.0}}, comments_per_month=200, tokens_per_comment=(0, 6), seed=5)
    b1, m1, _ = generate_corpus(spec)
    b2, m2, _ = generate_corpus(spec)
    assert b1 == b2 and m1 == m2
    spec.seed = 6
    b3, m3, _ = generate_corpus(spec)
    assert [c.tokens for c in m3[FEB]] != [c.tokens for c in m1[FEB]]


def test_generated_shape():
    spec = DriftSpec(list("abc"), {FEB: {}, MonthKey(2021, 3): {}}, comments_per_month=300, tokens_per_comment=(2, 4))
    baseline, months, _ = generate_corpus(spec)
    assert spec.baseline_months == [JAN]
    assert len(baseline) == 300 and all(c.month == JAN for c in baseline)
    for key, comments in months.items():
        assert len(comments) == 300
        assert all(c.month == key for c in comments)
        assert all(2 <= len(c.tokens) <= 4 for c in comments)
    ids = [c.id for c in baseline] + [c.id for cs in months.values() for c in cs]
    assert len(ids) == len(set(ids))


def test_empirical_weirdness_converges_on_larger_vocabulary():
    rng = np.random.default_rng(1)
    vocab = [f"w{i}" for i in range(20)]
    probs = rng.dirichlet(np.full(20, 5.0))
    probs = (probs / probs.sum()).tolist()
    probs[-1] = 1.0 - sum(probs[:-1])
    mults = {w: float(m) for w, m in zip(vocab, rng.uniform(0.5, 2.0, 20))}
    spec = DriftSpec(vocab, {FEB: mults}, baseline_probs=probs, comments_per_month=40_000, seed=2)
    baseline, months, expected = generate_corpus(spec)
    model = compute_model(baseline, months, epsilon=0.0, min_baseline_count=1)
    dev = max(abs(model.word_weirdness[FEB][w] - expected[FEB][w]) for w in vocab)
    assert dev < 0.05


def test_jsonl_round_trip():
    spec = DriftSpec(["oltás", "nem", "%"], {FEB: {"%": 2.0}}, comments_per_month=50, tokens_per_comment=(0, 5))
    baseline, months, _ = generate_corpus(spec)
    records = baseline + months[FEB]
    buf = io.StringIO()
    write_jsonl(records, buf)
    parsed = parse_comments(io.StringIO(buf.getvalue()), "jsonl")
    assert parsed.skip_count == 0
    assert parsed.records == records


def test_spec_json_round_trip_and_validation():
    spec = DriftSpec(["a", "b"], {FEB: {"a": 2.0}}, baseline_probs=[0.25, 0.75], tokens_per_comment=(1, 3), seed=4)
    again = DriftSpec.from_dict(spec.to_dict())
    assert again == spec
    with pytest.raises(InputError):
        DriftSpec(["a", "b"], {FEB: {"a": 0.0}})
    with pytest.raises(InputError):
        DriftSpec(["a", "b"], {FEB: {"z": 2.0}})
    with pytest.raises(InputError):
        DriftSpec(["a", "b"], {FEB: {}}, baseline_probs=[0.5, 0.6])
    with pytest.raises(InputError):
        DriftSpec(["a", "b"], {FEB: {}}, baseline_months=[FEB])
    with pytest.raises(InputError):
        DriftSpec(["a", "a"], {FEB: {}})


def test_allocate_counts_largest_remainder():
    from driftwatch.driftgen import allocate_counts

    assert allocate_counts(np.array([0.5, 0.25, 0.25]), 8).tolist() == [4, 2, 2]
    # 10 * (1/3, 1/3, 1/3) = 3.33 each: the spare token goes to the first word
    assert allocate_counts(np.full(3, 1 / 3), 10).tolist() == [4, 3, 3]
    assert allocate_counts(np.array([0.7, 0.2, 0.1]), 0).tolist() == [0, 0, 0]


def test_exact_counts_mode_realises_expected_weirdness():
    spec = DriftSpec(["x", "y", "z", "w"], {FEB: {"x": 3.0}, MonthKey(2021, 3): {}},
                     baseline_probs=[0.25, 0.25, 0.25, 0.25], comments_per_month=600, tokens_per_comment=10,
                     exact_counts=True)
    baseline, months, expected = generate_corpus(spec)
    model = compute_model(baseline, months, epsilon=0.0, min_baseline_count=1)
    for key in spec.months:
        for w in spec.vocabulary:
            assert model.word_weirdness[key][w] == pytest.approx(expected[key][w], abs=1e-12)
    assert model.drift_indicator[MonthKey(2021, 3)] == 0.0
