"""Command-line entry point: ``driftwatch <subcommand> [options]``.

Every run writes into ``<out>/<subcommand>-<hash>/`` where the hash covers the
resolved configuration and the input file checksums, so re-running with the
same config and inputs reproduces the same directory byte for byte. A
``manifest.json`` records the config, its hash and input/output checksums.

Exit codes: 0 success, 1 internal failure, 2 input or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import driftgen, evaluate, ingest, sampler, svg, weirdness
from .errors import InputError
from .ingest import FieldMapping, KeywordList, MonthKey

log = logging.getLogger("driftwatch")


@dataclass
class RunConfig:
    inputs: list[str] = field(default_factory=list)
    format: str | None = None
    epoch: bool = False
    id_field: str = "id"
    time_field: str = "timestamp"
    text_field: str = "text"
    tokens_field: str | None = "tokens"
    baseline_start: str | None = None
    baseline_end: str | None = None
    monthly_sample: int = 40000
    epsilon: float = 0.5
    min_count: int = 5
    threshold_low: float = 0.9
    threshold_high: float = 1.2
    seed: int = 0
    out: str = "runs"
    stopwords: str | None = None
    oov_policy: str = "skip"
    unique_types: bool = False

    def validate(self) -> None:
        if self.monthly_sample < 1:
            raise InputError("--monthly-sample must be >= 1")
        if self.epsilon < 0:
            raise InputError("--epsilon must be >= 0")
        if self.threshold_low > self.threshold_high:
            raise InputError("--threshold-low must not exceed --threshold-high")
        if self.baseline_start and self.baseline_end:
            if MonthKey.parse(self.baseline_end) < MonthKey.parse(self.baseline_start):
                raise InputError("baseline end precedes baseline start")
        if self.oov_policy not in weirdness.OOV_POLICIES:
            raise InputError(f"--oov-policy must be one of {weirdness.OOV_POLICIES}")


CONFIG_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Output directory for one invocation plus its manifest."""

    def __init__(self, command: str, config: RunConfig, params: dict, input_files: list[str]):
        self.command = command
        resolved = {k: v for k, v in dataclasses.asdict(config).items() if k != "out"}
        resolved.update(params)
        self.config = resolved
        self.inputs = {p: _sha256(p) for p in input_files}
        blob = json.dumps({"command": command, "config": resolved, "inputs": self.inputs}, sort_keys=True)
        self.config_hash = hashlib.sha256(blob.encode()).hexdigest()
        self.dir = Path(config.out) / f"{command}-{self.config_hash[:12]}"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []

    def open(self, name: str):
        path = self.dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(name)
        return open(path, "w", encoding="utf-8", newline="")

    def finish(self, extra: dict | None = None) -> Path:
        manifest = {
            "command": self.command,
            "config": self.config,
            "config_hash": self.config_hash,
            "inputs": self.inputs,
            "outputs": {name: _sha256(self.dir / name) for name in sorted(self.outputs)},
        }
        if extra:
            manifest.update(extra)
        with open(self.dir / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, ensure_ascii=False)
            fh.write("\n")
        print(self.dir)
        return self.dir


def _load_corpus(cfg: RunConfig) -> list[ingest.CommentRecord]:
    if not cfg.inputs:
        raise InputError("no input files given (--input)")
    mapping = FieldMapping(cfg.id_field, cfg.time_field, cfg.text_field, cfg.tokens_field)
    records, seen = [], set()
    for path in cfg.inputs:
        result = ingest.read_comments(path, cfg.format, mapping, cfg.epoch)
        if result.skip_count:
            log.warning("%s: skipped %d unparseable rows", path, result.skip_count)
        for r in result.records:
            if r.id in seen:
                raise InputError(f"duplicate comment id {r.id!r} across inputs")
            seen.add(r.id)
        records.extend(result.records)
    return records


def _stopwords(cfg: RunConfig) -> frozenset[str] | None:
    if not cfg.stopwords:
        return None
    with open(cfg.stopwords, encoding="utf-8") as fh:
        return frozenset(l.strip().lower() for l in fh if l.strip() and not l.startswith("#"))


def _build_model(cfg: RunConfig, records) -> weirdness.WeirdnessModel:
    buckets = ingest.bucket_by_month(records)
    if not buckets:
        raise InputError("input contains no comments")
    months = list(buckets)
    start = MonthKey.parse(cfg.baseline_start) if cfg.baseline_start else months[0]
    end = MonthKey.parse(cfg.baseline_end) if cfg.baseline_end else start
    sampled = ingest.monthly_sample(buckets, cfg.monthly_sample, cfg.seed)
    baseline = [c for m, cs in sampled.items() if start <= m <= end for c in cs]
    if not baseline or not any(c.tokens for c in baseline):
        raise InputError(f"empty baseline: no tokens between {start} and {end}")
    stop = _stopwords(cfg)
    base_table = weirdness.build_frequency_table(baseline, "baseline", stopwords=stop)
    tables = {}
    for m, cs in sampled.items():
        t = weirdness.build_frequency_table(cs, str(m), stopwords=stop)
        if t.total == 0:
            log.warning("month %s has no tokens; skipped", m)
            continue
        tables[m] = t
    return weirdness.model_from_tables(base_table, tables, cfg.epsilon, cfg.min_count)


def _write_tables(run: Run, model: weirdness.WeirdnessModel) -> None:
    with run.open("frequencies/baseline.csv") as fh:
        weirdness.write_frequency_table(model.baseline, fh)
    for m, t in sorted(model.monthly.items()):
        with run.open(f"frequencies/{m}.csv") as fh:
            weirdness.write_frequency_table(t, fh)


def cmd_stats(cfg: RunConfig, args) -> int:
    records = _load_corpus(cfg)
    model = _build_model(cfg, records)
    run = Run("stats", cfg, {"words": args.word}, cfg.inputs)
    _write_tables(run, model)
    with run.open("drift.csv") as fh:
        weirdness.write_drift_summary(model, fh)
    labels = [str(m) for m in model.months]
    with run.open("drift.svg") as fh:
        fh.write(svg.line_chart(labels, {"drift indicator": [model.drift_indicator[m] for m in model.months]},
                                title="Monthly standard deviation of word weirdness", y_label="std-dev"))
    if args.word:
        series = {}
        for word in args.word:
            word = word.lower()
            traj = model.trajectory(word)
            if all(v is None for v in traj.values()):
                log.warning("word %r is not in the model vocabulary", word)
            series[word] = [traj[m] for m in model.months]
            safe = re.sub(r"[^\w%-]", "_", word)
            with run.open(f"trajectory_{safe}.csv") as fh:
                fh.write("month,weirdness\n")
                for m in model.months:
                    v = traj[m]
                    fh.write(f"{m},{'' if v is None else repr(v)}\n")
        with run.open("trajectory.svg") as fh:
            fh.write(svg.line_chart(labels, series, title="Word weirdness by month", y_label="weirdness"))
    run.finish({"months": labels, "vocab_size": len(model.vocabulary)})
    return 0


def cmd_weirdness(cfg: RunConfig, args) -> int:
    records = _load_corpus(cfg)
    model = _build_model(cfg, records)
    targets = records
    inputs = list(cfg.inputs)
    if args.score_input:
        scored_cfg = dataclasses.replace(cfg, inputs=args.score_input)
        targets = _load_corpus(scored_cfg)
        inputs += args.score_input
    run = Run("weirdness", cfg, {"score_input": args.score_input}, inputs)
    with run.open("word_weirdness.csv") as fh:
        weirdness.write_word_weirdness(model, fh)
    with run.open("drift.csv") as fh:
        weirdness.write_drift_summary(model, fh)
    scores = weirdness.score_comments(model, targets, cfg.oov_policy, cfg.unique_types)
    undefined = 0
    with run.open("comment_weirdness.csv") as fh:
        fh.write("id,month,weirdness\n")
        for c in sorted(targets, key=lambda c: (c.timestamp, c.id)):
            v = scores[c.id]
            undefined += v is None
            fh.write(f"{_csv_cell(c.id)},{c.month},{'' if v is None else repr(v)}\n")
    run.finish({"scored": len(targets), "undefined": undefined})
    return 0


def _csv_cell(text: str) -> str:
    if any(ch in text for ch in ',"\n\r'):
        return '"' + text.replace('"', '""') + '"'
    return text


def cmd_sample(cfg: RunConfig, args) -> int:
    need_weights = args.strategy in ("weirdness", "both")
    with open(args.pool, encoding="utf-8", newline="") as fh:
        pool = sampler.read_pool(fh, cfg.seed, require_weights=need_weights)
    if args.n < 0:
        raise InputError("-n must be >= 0")
    samples = {}
    if args.strategy in ("random", "both"):
        samples["random"] = sampler.random_sample(pool, args.n, cfg.seed)
    if need_weights:
        samples["weirdness"] = sampler.weighted_sample(pool, args.n, cfg.seed, args.weight_exponent)
    run = Run("sample", cfg, {"pool": args.pool, "strategy": args.strategy, "n": args.n,
                              "weight_exponent": args.weight_exponent}, [args.pool])
    for name, ids in samples.items():
        with run.open(f"sample_{name}.txt") as fh:
            sampler.write_ids(ids, fh)
    extra = {"pool_size": len(pool.items), "excluded_undefined_weight": len(pool.excluded)}
    if len(samples) == 2:
        ov = sampler.overlap_report(samples["random"], samples["weirdness"])
        with run.open("overlap.json") as fh:
            sampler.write_overlap(ov, fh)
        extra["overlap"] = ov.count
    if pool.excluded:
        with run.open("excluded.txt") as fh:
            sampler.write_ids(pool.excluded, fh)
    run.finish(extra)
    return 0


def _read_weirdness_file(path: str) -> dict[str, float | None]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if "id" not in (reader.fieldnames or []) or "weirdness" not in (reader.fieldnames or []):
            raise InputError(f"{path}: expected columns id,weirdness")
        out = {}
        for row in reader:
            raw = (row["weirdness"] or "").strip()
            out[row["id"]] = float(raw) if raw and raw.lower() != "nan" else None
        return out


def cmd_evaluate(cfg: RunConfig, args) -> int:
    with open(args.gold, encoding="utf-8", newline="") as fh:
        gold = evaluate.read_gold(fh)
    models: dict[str, dict[str, float]] = {}
    paths = []
    for spec in args.predictions:
        name, _, path = spec.rpartition("=")
        name = name or Path(path).stem
        if name in models:
            raise InputError(f"duplicate model name {name!r}")
        with open(path, encoding="utf-8", newline="") as fh:
            models[name] = evaluate.read_predictions(fh)
        paths.append(path)
    models = {k: models[k] for k in sorted(models)}
    evaluate.check_aligned(gold.keys(), models)
    w = _read_weirdness_file(args.weirdness) if args.weirdness else {}
    ids = sorted(gold)
    low, high = cfg.threshold_low, cfg.threshold_high
    slices = [("all", ids)]
    if args.weirdness:
        wsub = {i: w.get(i) for i in ids}
        slices.append((f"weird<{low:g}", sorted(evaluate.slice_by_weirdness(wsub, "lt", low)[0])))
        slices.append((f"weird>{high:g}", sorted(evaluate.slice_by_weirdness(wsub, "gt", high)[0])))
    sections = []
    for name, preds in models.items():
        for label, subset in slices:
            if not subset:
                log.warning("slice %s is empty; no report for %s", label, name)
                continue
            probs = [preds[i] for i in subset]
            rep = evaluate.confusion_metrics(
                [gold[i] for i in subset], evaluate.predict_labels(probs, args.decision_threshold),
                probs=probs, slice_label=label,
            )
            sections.append((name, rep))
    table = evaluate.confidence_table(models, w, low, high)
    run = Run("evaluate", cfg, {"gold": args.gold, "predictions": args.predictions, "weirdness": args.weirdness,
                                "decision_threshold": args.decision_threshold},
              [args.gold, *paths] + ([args.weirdness] if args.weirdness else []))
    with run.open("report.csv") as fh:
        evaluate.write_reports_csv(sections, fh)
    with run.open("report.txt") as fh:
        fh.write(evaluate.render_reports(sections))
    with run.open("confidence.csv") as fh:
        evaluate.write_confidence_csv(table, fh)
    with run.open("confidence.txt") as fh:
        fh.write(evaluate.render_confidence_table(table))
    run.finish({"models": list(models), "n": len(ids)})
    return 0


def cmd_simulate(cfg: RunConfig, args) -> int:
    spec = driftgen.DriftSpec.load(args.spec)
    if args.spec_seed is not None:
        spec.seed = args.spec_seed
    baseline, months, expected = driftgen.generate_corpus(spec)
    run = Run("simulate", cfg, {"spec": args.spec, "spec_seed": spec.seed}, [args.spec])
    with run.open("corpus.jsonl") as fh:
        ingest.write_jsonl(baseline, fh)
        for m in sorted(months):
            ingest.write_jsonl(months[m], fh)
    with run.open("expected_weirdness.csv") as fh:
        fh.write("month,word,weirdness\n")
        for m in sorted(expected):
            for word, v in expected[m].items():
                fh.write(f"{m},{_csv_cell(word)},{v!r}\n")
    with run.open("expected_drift.csv") as fh:
        fh.write("month,drift_indicator\n")
        for m in spec.months:
            fh.write(f"{m},{driftgen.expected_drift_indicator(spec, m)!r}\n")
    run.finish({"baseline_months": [str(m) for m in spec.baseline_months]})
    return 0


def cmd_filter(cfg: RunConfig, args) -> int:
    records = _load_corpus(cfg)
    if args.keywords:
        keywords = KeywordList.load(args.keywords)
    else:
        keywords = KeywordList(ingest.ANTIVAX_KEYWORDS)
    kept, stats = ingest.keyword_filter(records, keywords, exact=args.exact_match)
    inputs = list(cfg.inputs) + ([args.keywords] if args.keywords else [])
    run = Run("filter", cfg, {"keywords": args.keywords, "exact_match": args.exact_match}, inputs)
    with run.open("retained.jsonl") as fh:
        ingest.write_jsonl(kept, fh)
    with run.open("filter_stats.json") as fh:
        json.dump(stats.to_dict(), fh, indent=2)
        fh.write("\n")
    run.finish(stats.to_dict())
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    # unset flags stay absent from the namespace so they do not override the config file
    S = argparse.SUPPRESS
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--input", "-i", dest="inputs", action="append", default=S, help="comment file (repeatable)")
    p.add_argument("--format", choices=["jsonl", "csv"], default=S)
    p.add_argument("--epoch", action="store_true", default=S, help="timestamps are epoch seconds")
    p.add_argument("--id-field", default=S)
    p.add_argument("--time-field", default=S)
    p.add_argument("--text-field", default=S)
    p.add_argument("--tokens-field", default=S, help="column with pre-tokenized/lemmatized tokens")
    p.add_argument("--baseline-start", default=S, metavar="YYYY-MM")
    p.add_argument("--baseline-end", default=S, metavar="YYYY-MM")
    p.add_argument("--monthly-sample", type=int, default=S, metavar="N")
    p.add_argument("--epsilon", type=float, default=S)
    p.add_argument("--min-count", type=int, default=S, help="minimum baseline count for the model vocabulary")
    p.add_argument("--threshold-low", type=float, default=S)
    p.add_argument("--threshold-high", type=float, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--out", default=S, metavar="DIR")
    p.add_argument("--stopwords", default=S, metavar="FILE")
    p.add_argument("--oov-policy", choices=list(weirdness.OOV_POLICIES), default=S)
    p.add_argument("--unique-types", action="store_true", default=S, help="average over distinct words per comment")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driftwatch", description="Weirdness-based drift monitoring, re-annotation sampling and evaluation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="frequency tables, monthly drift indicator CSV and SVG chart")
    _add_common(p)
    p.add_argument("--word", action="append", default=[], help="also write this word's monthly weirdness")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("weirdness", help="word and comment weirdness")
    _add_common(p)
    p.add_argument("--score-input", action="append", default=[], help="score these comments instead of --input")
    p.set_defaults(func=cmd_weirdness)

    p = sub.add_parser("sample", help="random and/or weirdness-weighted re-annotation samples")
    _add_common(p)
    p.add_argument("--pool", required=True, help="CSV with id,weight (or id,weirdness)")
    p.add_argument("--strategy", choices=["random", "weirdness", "both"], default="both")
    p.add_argument("-n", type=int, default=1500)
    p.add_argument("--weight-exponent", type=float, default=1.0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("evaluate", help="per-model metric reports and confidence table")
    _add_common(p)
    p.add_argument("--gold", required=True, help="CSV id,annotator1,annotator2,supervisor (or id,label)")
    p.add_argument("--predictions", "-p", nargs="+", required=True, metavar="[NAME=]FILE",
                   help="CSV id,prob per model")
    p.add_argument("--weirdness", help="CSV id,weirdness for slicing")
    p.add_argument("--decision-threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="generate a synthetic drifting corpus from a JSON spec")
    _add_common(p)
    p.add_argument("--spec", required=True)
    p.add_argument("--spec-seed", type=int, help="override the spec's seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("filter", help="keyword pre-filter")
    _add_common(p)
    p.add_argument("--keywords", help="keyword file, one per line; default: built-in list")
    p.add_argument("--exact-match", action="store_true", help="match whole tokens instead of prefixes")
    p.set_defaults(func=cmd_filter)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
        unknown = set(data) - CONFIG_FIELDS
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    for name in CONFIG_FIELDS:
        if name in vars(args):
            values[name] = getattr(args, name)
    if isinstance(values.get("inputs"), str):
        values["inputs"] = [values["inputs"]]
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return args.func(cfg, args)
    except (InputError, FileNotFoundError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        print(f"driftwatch: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("internal failure")
        print(f"driftwatch: internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
