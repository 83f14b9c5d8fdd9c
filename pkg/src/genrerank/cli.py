"""Command-line entry point wiring the library into reproducible runs.

Exit codes: 0 success, 1 usage or configuration problem, 2 data problem,
3 external-service failure. Errors go to stderr; results and report tables
go to stdout.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import os
import re
import sys
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

import genrerank
from genrerank import core, evaluation, genclient, reranker, scoring, selection
from genrerank.core import DatasetError
from genrerank.genclient import GeneratorError
from genrerank.scoring import ScorerProtocolError


class ConfigError(Exception):
    """Bad usage or configuration; maps to exit code 1."""


# ---------------------------------------------------------------------------
# Config files


_VAR = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


def _interpolate(value, path: str):
    if isinstance(value, str):
        def repl(match: re.Match) -> str:
            name = match.group(1)
            if name not in os.environ:
                raise ConfigError(f"{path}: environment variable {name!r} is not set")
            return os.environ[name]

        return _VAR.sub(repl, value)
    if isinstance(value, dict):
        return {k: _interpolate(v, f"{path}.{k}") for k, v in value.items()}
    if isinstance(value, list):
        return [_interpolate(v, f"{path}[{i}]") for i, v in enumerate(value)]
    return value


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return _interpolate(raw, "config")


_STAGES = ("generate", "score", "train", "select", "evaluate")


def validate_config(config: Mapping) -> list[str]:
    """All schema problems at once, each tagged with its field path."""
    errors: list[str] = []

    def check(cond: bool, message: str) -> None:
        if not cond:
            errors.append(message)

    check(isinstance(config.get("seed", 0), int), "seed: must be an integer")
    known = {"seed", "workers", "out_dir", *_STAGES}
    for key in config:
        check(key in known, f"{key}: unknown section (expected one of {sorted(known)})")

    gen = config.get("generate", {})
    if not isinstance(gen, dict):
        errors.append("generate: must be an object")
        gen = {}
    check(isinstance(gen.get("dataset", ""), str) and gen.get("dataset", "x"),
          "generate.dataset: must be a non-empty path")
    temp = gen.get("temperature", 0.7)
    check(isinstance(temp, (int, float)) and 0.0 <= temp <= 2.0,
          "generate.temperature: must be in [0, 2]")
    n = gen.get("n", 8)
    check(isinstance(n, int) and n >= 1, "generate.n: must be a positive integer")
    endpoint = gen.get("endpoint", "mock")
    check(isinstance(endpoint, str) and endpoint, "generate.endpoint: must be a URL or 'mock'")
    if endpoint == "mock":
        check(isinstance(gen.get("pools", "builtin"), str),
              "generate.pools: must be a path or 'builtin' for the mock endpoint")
    else:
        check("pools" not in gen, "generate.pools: only meaningful with the mock endpoint")

    sco = config.get("score", {})
    if not isinstance(sco, dict):
        errors.append("score: must be an object")
        sco = {}
    metrics = sco.get("metrics", ["bleu", "toy-parser"])
    check(isinstance(metrics, list) and metrics and all(isinstance(m, str) for m in metrics),
          "score.metrics: must be a non-empty list of metric names")
    scope = sco.get("scope", "set")
    check(scope in ("set", "corpus"), "score.scope: must be 'set' or 'corpus'")

    tr = config.get("train", {})
    if not isinstance(tr, dict):
        errors.append("train: must be an object")
        tr = {}
    opt = tr.get("optimizer", "adaptive-moment")
    check(opt in ("sgd", "adaptive-moment"),
          "train.optimizer: must be 'sgd' or 'adaptive-moment'")
    for field, low in (("epochs", 1), ("patience", 1), ("hash_dim", 2)):
        val = tr.get(field)
        if val is not None:
            check(isinstance(val, int) and val >= low, f"train.{field}: must be an integer >= {low}")
    gamma = tr.get("gamma", 0.1)
    check(isinstance(gamma, (int, float)) and gamma >= 0, "train.gamma: must be >= 0")
    wm = tr.get("weight_mode", "uniform")
    check(wm in ("uniform", "set-size"), "train.weight_mode: must be 'uniform' or 'set-size'")

    sel = config.get("select", {})
    if not isinstance(sel, dict):
        errors.append("select: must be an object")
        sel = {}
    strategies = sel.get("strategies", ["reranker"])
    check(isinstance(strategies, list) and strategies, "select.strategies: must be a non-empty list")
    for s in strategies if isinstance(strategies, list) else []:
        check(s in selection.STRATEGIES,
              f"select.strategies: unknown strategy {s!r} (allowed: {', '.join(selection.STRATEGIES)})")
    lam = sel.get("lambda", "tuned")
    check(lam == "tuned" or (isinstance(lam, (int, float)) and 0.0 <= lam <= 1.0),
          "select.lambda: must be 'tuned' or a number in [0, 1]")

    ev = config.get("evaluate", {})
    if not isinstance(ev, dict):
        errors.append("evaluate: must be an object")
        ev = {}
    baseline = ev.get("baseline", "generator")
    check(baseline in selection.STRATEGIES, "evaluate.baseline: must name a strategy")
    resamples = ev.get("resamples", 10_000)
    check(isinstance(resamples, int) and resamples >= 1,
          "evaluate.resamples: must be a positive integer")
    return errors


# ---------------------------------------------------------------------------
# Manifests


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_path: str, params: Mapping, inputs: Sequence[str],
                   outputs: Sequence[str], seed: int) -> str:
    manifest = {
        "tool": "genrerank",
        "version": genrerank.__version__,
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "seed": seed,
        "params": dict(params),
        "inputs": {p: _sha256(p) for p in inputs},
        "outputs": {p: _sha256(p) for p in outputs},
    }
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    return out_path


def _manifest_for(stage: str, out_file: str, params: Mapping, inputs: Sequence[str],
                  outputs: Sequence[str], seed: int) -> None:
    write_manifest(out_file + ".manifest.json",
                   {"stage": stage, **params}, inputs, outputs, seed)


# ---------------------------------------------------------------------------
# Shared helpers


def _load_pools(spec: str) -> dict:
    if spec == "builtin":
        return genclient.load_mock_fixture().pools
    with open(spec, encoding="utf-8") as fh:
        pools = json.load(fh)
    if not isinstance(pools, dict):
        raise DatasetError(f"{spec}: pools file must map LF text to candidate lists")
    return {lf: [tuple(c) if isinstance(c, list) else c for c in pool]
            for lf, pool in pools.items()}


def _parse_metrics(arg: str) -> list[str]:
    metrics = [m.strip() for m in arg.split(",") if m.strip()]
    if not metrics:
        raise ConfigError("no metrics given")
    return metrics


def _parse_sizes(arg: str) -> list[int]:
    try:
        sizes = [int(x) for x in arg.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad size list {arg!r}: {exc}") from exc
    if not sizes or any(s < 2 for s in sizes):
        raise ConfigError(f"size list {arg!r} must contain integers >= 2")
    return sizes


def _parse_grid(arg: str) -> tuple[float, ...]:
    parts = arg.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must look like start:stop:step, got {arg!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad grid {arg!r}: {exc}") from exc
    if step <= 0 or stop < start:
        raise ConfigError(f"bad grid {arg!r}: need step > 0 and stop >= start")
    values = []
    k = 0
    while True:
        v = round(start + k * step, 10)
        if v > stop + 1e-12:
            break
        values.append(min(v, stop))
        k += 1
    return tuple(values)


def _tables_by_id(path: str) -> dict[str, core.QualityTable]:
    return core.load_quality_tables(path)


def _gold_pairs(sets: Sequence[core.CandidateSet], tables: Mapping[str, core.QualityTable],
                min_size: int = 2) -> list[tuple[core.CandidateSet, tuple[float, ...]]]:
    pairs = []
    for cs in sets:
        if len(cs) < min_size:
            continue
        if cs.lf_id not in tables:
            raise DatasetError(f"no quality table for candidate set {cs.lf_id!r}")
        combined = tables[cs.lf_id].require_combined()
        if len(combined) != len(cs):
            raise DatasetError(f"set {cs.lf_id!r}: quality length {len(combined)} != {len(cs)}")
        pairs.append((cs, combined))
    if not pairs:
        raise DatasetError("no candidate sets with at least 2 candidates and quality scores")
    return pairs


def _split_pairs(pairs: list, dev_fraction: float, seed: int) -> tuple[list, list]:
    order = np.random.default_rng(seed).permutation(len(pairs)).tolist()
    n_dev = max(1, int(round(len(pairs) * dev_fraction)))
    if n_dev >= len(pairs):
        raise DatasetError(f"{len(pairs)} sets are too few to carve a dev split")
    dev_ids = set(order[:n_dev])
    train = [p for k, p in enumerate(pairs) if k not in dev_ids]
    dev = [p for k, p in enumerate(pairs) if k in dev_ids]
    return train, dev


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_generate(args) -> int:
    dataset = core.load_dataset(args.dataset, split=args.split)
    if not dataset:
        raise DatasetError(f"{args.dataset}: no LFs in split {args.split!r}")
    cfg = genclient.GeneratorConfig(endpoint=args.endpoint, temperature=args.temperature,
                                    target_n=args.n, seed=args.seed,
                                    max_attempts=args.max_attempts)
    if args.endpoint == "mock":
        client = genclient.MockGeneratorClient(_load_pools(args.pools), seed=args.seed)
    else:
        client = genclient.HttpGeneratorClient(args.endpoint,
                                               auth_token=os.environ.get("GENRERANK_API_TOKEN"))
    template = None
    exemplars: list[core.LogicalForm] = []
    if args.exemplars:
        template = genclient.PromptTemplate.paired(args.dataset_name, num_exemplars=args.exemplars)
        exemplars = core.load_dataset(args.dataset, split=core.Split.TRAIN)
    sets = genclient.generate_corpus(dataset, cfg, client, exemplar_pool=exemplars,
                                     template=template, workers=args.workers)
    core.save_candidates(sets, args.out)
    _manifest_for("generate", args.out,
                  {"split": args.split, "n": args.n, "temperature": args.temperature,
                   "endpoint": args.endpoint}, [args.dataset], [args.out], args.seed)
    print(f"wrote {len(sets)} candidate sets to {args.out}")
    return 0


def _cmd_budget_build(args) -> int:
    dataset = core.load_dataset(args.dataset, split=args.split)
    cfg = genclient.BudgetBuilderConfig(samples_per_lf=args.samples, min_unique=args.min_unique,
                                        wall_clock_budget=args.budget)
    gen_cfg = genclient.GeneratorConfig(endpoint=args.endpoint, temperature=args.temperature,
                                        seed=args.seed)
    if args.endpoint == "mock":
        client = genclient.MockGeneratorClient(_load_pools(args.pools), seed=args.seed)
    else:
        client = genclient.HttpGeneratorClient(args.endpoint,
                                               auth_token=os.environ.get("GENRERANK_API_TOKEN"))
    sets = genclient.build_variable_dataset(dataset, cfg, client, gen_cfg=gen_cfg,
                                            workers=args.workers)
    core.save_candidates(sets, args.out)
    _manifest_for("budget-build", args.out,
                  {"samples": args.samples, "min_unique": args.min_unique},
                  [args.dataset], [args.out], args.seed)
    print(f"wrote {len(sets)} sets to {args.out} "
          f"(mean size {genclient.mean_set_size(sets):.2f}, "
          f"dropped {len(dataset) - len(sets)} of {len(dataset)} LFs)")
    return 0


def _cmd_score(args) -> int:
    sets = core.load_candidates(args.candidates)
    metrics = _parse_metrics(args.metrics)
    tables: dict[str, dict[str, tuple[float, ...]]] = {cs.lf_id: {} for cs in sets}
    for metric in metrics:
        spec = scoring.make_scorer(metric)
        with scoring.open_scorer(spec) as scorer_client:
            per_set = scoring.score_sets(sets, spec, client=scorer_client)
        for lf_id, values in per_set.items():
            tables[lf_id][spec.name] = values
    quality = {cs.lf_id: core.QualityTable(lf_id=cs.lf_id, per_metric=tables[cs.lf_id])
               for cs in sets}
    combined = scoring.combine_quality(quality, scope=args.scope)
    core.save_quality_tables(combined.values(), args.out)
    _manifest_for("score", args.out, {"metrics": metrics, "scope": args.scope},
                  [args.candidates], [args.out], args.seed)
    print(f"scored {len(sets)} sets with {len(metrics)} metrics -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    sets = core.load_candidates(args.candidates)
    tables = _tables_by_id(args.quality)
    pairs = _gold_pairs(sets, tables)
    if args.dev_candidates:
        dev_sets = core.load_candidates(args.dev_candidates)
        dev_tables = _tables_by_id(args.dev_quality or args.quality)
        train_pairs, dev_pairs = pairs, _gold_pairs(dev_sets, dev_tables)
    else:
        train_pairs, dev_pairs = _split_pairs(pairs, args.dev_fraction, args.seed)
    feature_cfg = reranker.FeatureConfig(hash_dim=args.hash_dim)
    train_cfg = reranker.TrainConfig(max_epochs=args.epochs, patience=args.patience,
                                     learning_rate=args.lr, optimizer=args.optimizer,
                                     seed=args.seed, two_phase=not args.no_two_phase)
    model = reranker.train(train_pairs, dev_pairs, feature_config=feature_cfg,
                           config=train_cfg, gamma=args.gamma, weight_mode=args.weight_mode)
    reranker.save_model(model, args.out)
    _manifest_for("train", args.out,
                  {"optimizer": args.optimizer, "gamma": args.gamma,
                   "weight_mode": args.weight_mode, "epochs": args.epochs},
                  [args.candidates, args.quality], [args.out], args.seed)
    meta = model.train_meta
    print(f"trained on {len(train_pairs)} sets ({len(dev_pairs)} dev): "
          f"best dev loss {meta['best_dev_loss']:.6f} at epoch {meta['best_epoch']} "
          f"({meta['epochs_run']} run) -> {args.out}")
    return 0


def _cmd_select(args) -> int:
    sets = core.load_candidates(args.candidates)
    model = reranker.load_model(args.model) if args.model else None
    quality = _tables_by_id(args.quality) if args.quality else None
    lam = args.lam
    if args.strategy == "combined" and lam is None:
        raise ConfigError("--lambda is required for the combined strategy")
    results = selection.select_corpus(sets, args.strategy, model=model, lam=lam,
                                      quality=quality, seed=args.seed,
                                      standardize=args.standardize)
    selection.save_selections(results, args.out)
    inputs = [p for p in (args.candidates, args.model, args.quality) if p]
    _manifest_for("select", args.out, {"strategy": args.strategy, "lambda": lam},
                  inputs, [args.out], args.seed)
    print(f"selected from {len(results)} sets with {args.strategy} -> {args.out}")
    return 0


def _cmd_tune_lambda(args) -> int:
    sets = core.load_candidates(args.dev)
    model = reranker.load_model(args.model)
    quality = _tables_by_id(args.quality)
    cfg = selection.LambdaConfig(grid=_parse_grid(args.grid), standardize=args.standardize)
    usable = [cs for cs in sets if cs.lf_id in quality]
    curve = selection.tune_lambda(usable, model, quality, cfg)
    if args.out:
        core.write_jsonl([{"lambda": l, "mean_combined_q": v} for l, v in curve.curve], args.out)
        _manifest_for("tune-lambda", args.out, {"grid": args.grid},
                      [args.dev, args.model, args.quality], [args.out], args.seed)
    print(f"best lambda: {curve.best}")
    for lam, value in curve.curve:
        print(f"  {lam:.2f}  {value:.6f}")
    return 0


def _cmd_eval_alignment(args) -> int:
    tables = list(core.load_quality_tables(args.scores).values())
    labels = {ls.lf_id: ls for ls in core.load_labeled_sets(args.labels)}
    metric_names = sorted({m for t in tables for m in t.per_metric})
    if any(t.combined is not None for t in tables):
        metric_names.append("combined")
    reports = []
    for metric in metric_names:
        scored = []
        for t in tables:
            if t.lf_id not in labels:
                continue
            vec = t.combined if metric == "combined" else t.per_metric.get(metric)
            if vec is None:
                continue
            lab = labels[t.lf_id].labels
            if len(lab) != len(vec):
                raise DatasetError(f"set {t.lf_id!r}: {len(lab)} labels vs {len(vec)} scores")
            scored.append((vec, lab))
        if not scored:
            raise DatasetError(f"no labeled sets matched metric {metric!r}")
        reports.append(evaluation.alignment_report(metric, scored, per_set=args.per_set))
    print(evaluation.format_alignment_table(reports))
    if args.out:
        core.write_jsonl([vars(r) for r in reports], args.out)
    return 0


def _cmd_eval_pipeline(args) -> int:
    selections = selection.load_selections(args.selections)
    tables = _tables_by_id(args.quality)
    baselines = {}
    for spec in args.baseline or []:
        name, _, path = spec.partition("=")
        if not path:
            raise ConfigError(f"--baseline must look like name=selections.jsonl, got {spec!r}")
        baselines[name] = selection.load_selections(path)
    report = evaluation.evaluate_pipeline(selections, tables, baselines=baselines,
                                          n_resamples=args.resamples, seed=args.seed)
    print(evaluation.format_pipeline_table([report]))
    if args.out:
        payload = {"strategy": report.strategy, "sets": report.sets,
                   "per_metric_means": dict(report.per_metric_means),
                   "significance": dict(report.significance),
                   "significance_test": f"paired bootstrap, {args.resamples} resamples, seed {args.seed}"}
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _cmd_sweep(args) -> int:
    sets = core.load_candidates(args.candidates)
    tables = _tables_by_id(args.quality)
    corpus = []
    for cs in sets:
        if cs.lf_id not in tables:
            raise DatasetError(f"no quality table for set {cs.lf_id!r}")
        corpus.append((cs, tables[cs.lf_id]))
    cfg = evaluation.SweepConfig(seed=args.seed,
                                 feature_config=reranker.FeatureConfig(hash_dim=args.hash_dim),
                                 train_config=reranker.TrainConfig(max_epochs=args.epochs,
                                                                   seed=args.seed))
    grid = evaluation.nbest_sweep(_parse_sizes(args.train_sizes), _parse_sizes(args.test_sizes),
                                  corpus, cfg)
    evaluation.save_sweep_grid(grid, args.out)
    _manifest_for("sweep", args.out,
                  {"train_sizes": args.train_sizes, "test_sizes": args.test_sizes},
                  [args.candidates, args.quality], [args.out], args.seed)
    print(f"{'train':>6} {'test':>6} {'mean combined-Q':>16}")
    for (tr, te), v in sorted(grid.items()):
        print(f"{tr:>6} {te:>6} {v:>16.4f}")
    return 0


def _cmd_annotate(args) -> int:
    sets = core.load_candidates(args.candidates)
    evaluation.annotate(sets, args.out)
    return 0


def _cmd_run(args) -> int:
    if not args.config:
        raise ConfigError("run needs --config")
    config = load_config(args.config)
    problems = validate_config(config)
    if problems:
        raise ConfigError("invalid config:\n  " + "\n  ".join(problems))
    return run_pipeline(config, out_dir=args.out_dir, seed_override=args.seed_given)


def run_pipeline(config: Mapping, out_dir: str | None = None,
                 seed_override: int | None = None) -> int:
    """generate -> score -> train (+ tune lambda) -> select -> evaluate.

    Each stage writes a plain file and is skipped when its output already
    exists, so interrupted runs resume; delete artifacts to force a stage.
    """
    seed = seed_override if seed_override is not None else int(config.get("seed", 0))
    out = Path(out_dir or config.get("out_dir", "run-artifacts"))
    out.mkdir(parents=True, exist_ok=True)
    gen = dict(config.get("generate", {}))
    sco = dict(config.get("score", {}))
    tr = dict(config.get("train", {}))
    sel = dict(config.get("select", {}))
    ev = dict(config.get("evaluate", {}))

    def note(msg: str) -> None:
        print(msg, file=sys.stderr)

    candidates_file = str(out / "candidates.jsonl")
    if Path(candidates_file).exists():
        note(f"[generate] reusing {candidates_file}")
    else:
        ns = argparse.Namespace(
            dataset=gen.get("dataset"), split=gen.get("split", "train"),
            n=gen.get("n", 8), temperature=gen.get("temperature", 0.7),
            endpoint=gen.get("endpoint", "mock"), pools=gen.get("pools", "builtin"),
            exemplars=gen.get("exemplars", 0), dataset_name=gen.get("dataset_name", "dataset"),
            max_attempts=gen.get("max_attempts"), workers=int(config.get("workers", 1)),
            seed=seed, out=candidates_file)
        if ns.dataset is None:
            fixture = genclient.load_mock_fixture()
            ns.dataset = str(out / "dataset.jsonl")
            if not Path(ns.dataset).exists():
                core.save_dataset(fixture.dataset, ns.dataset)
        _cmd_generate(ns)

    quality_file = str(out / "quality.jsonl")
    if Path(quality_file).exists():
        note(f"[score] reusing {quality_file}")
    else:
        _cmd_score(argparse.Namespace(
            candidates=candidates_file, metrics=",".join(sco.get("metrics", ["bleu", "toy-parser"])),
            scope=sco.get("scope", "set"), seed=seed, out=quality_file))

    model_file = str(out / "model.json")
    if Path(model_file).exists():
        note(f"[train] reusing {model_file}")
    else:
        _cmd_train(argparse.Namespace(
            candidates=candidates_file, quality=quality_file,
            dev_candidates=None, dev_quality=None, dev_fraction=tr.get("dev_fraction", 0.2),
            hash_dim=tr.get("hash_dim", 2 ** 18), epochs=tr.get("epochs", 100),
            patience=tr.get("patience", 10), lr=tr.get("learning_rate", 1e-4),
            optimizer=tr.get("optimizer", "adaptive-moment"), gamma=tr.get("gamma", 0.1),
            weight_mode=tr.get("weight_mode", "uniform"),
            no_two_phase=not tr.get("two_phase", True), seed=seed, out=model_file))

    lam = sel.get("lambda", "tuned")
    strategies = sel.get("strategies", ["reranker"])
    if lam == "tuned" and "combined" in strategies:
        sets = core.load_candidates(candidates_file)
        tables = _tables_by_id(quality_file)
        model = reranker.load_model(model_file)
        usable = [cs for cs in sets if cs.lf_id in tables and len(cs) >= 2]
        lam = selection.tune_lambda(usable, model, tables).best
        note(f"[tune-lambda] best lambda {lam}")
    selection_files = {}
    for strategy in strategies:
        sel_file = str(out / f"selections-{strategy}.jsonl")
        selection_files[strategy] = sel_file
        if Path(sel_file).exists():
            note(f"[select] reusing {sel_file}")
            continue
        _cmd_select(argparse.Namespace(
            candidates=candidates_file, strategy=strategy, model=model_file,
            quality=quality_file, lam=None if lam == "tuned" else float(lam),
            standardize=bool(sel.get("standardize", False)), seed=seed, out=sel_file))

    baseline = ev.get("baseline", "generator")
    primary = strategies[0]
    baseline_args = []
    if baseline in selection_files and baseline != primary:
        baseline_args = [f"{baseline}={selection_files[baseline]}"]
    report_file = str(out / "report.json")
    _cmd_eval_pipeline(argparse.Namespace(
        selections=selection_files[primary], quality=quality_file, baseline=baseline_args,
        resamples=ev.get("resamples", 10_000), seed=seed, out=report_file))

    write_manifest(str(out / "run.manifest.json"),
                   {"stage": "run", "config": dict(config)},
                   [], [candidates_file, quality_file, model_file, *selection_files.values()],
                   seed)
    note(f"[run] artifacts in {out}")
    return 0


# ---------------------------------------------------------------------------
# Parser


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1, not argparse's default 2
        raise ConfigError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--workers", type=int, default=1, help="parallel workers (default 1)")
    p.add_argument("--config", default=None, help="JSON config file; ${VAR} pulls from the environment")


def build_parser() -> _Parser:
    parser = _Parser(prog="genrerank",
                     description="Generate, score, rerank, and evaluate n-best candidate sets.")
    parser.add_argument("--version", action="version", version=genrerank.__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample candidate sets from a generator")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="train", choices=[s.value for s in core.Split])
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--temperature", type=float, default=0.7)
    p.add_argument("--endpoint", default="mock")
    p.add_argument("--pools", default="builtin", help="mock candidate pools JSON, or 'builtin'")
    p.add_argument("--exemplars", type=int, default=0, help="few-shot exemplar count (0 = bare prompt)")
    p.add_argument("--dataset-name", default="dataset", help="banner name in the prompt header")
    p.add_argument("--max-attempts", type=int, default=None)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("budget-build", help="fixed-budget variable-size candidate sets")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="train", choices=[s.value for s in core.Split])
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--min-unique", type=int, default=2)
    p.add_argument("--budget", type=float, default=None, help="wall-clock budget in seconds")
    p.add_argument("--temperature", type=float, default=0.7)
    p.add_argument("--endpoint", default="mock")
    p.add_argument("--pools", default="builtin")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_budget_build)

    p = sub.add_parser("score", help="score candidates with metrics and build combined Q")
    p.add_argument("--candidates", required=True)
    p.add_argument("--metrics", default="bleu,toy-parser",
                   help="comma list: bleu, toy-parser, or ext:<command or URL>")
    p.add_argument("--scope", default="set", choices=["set", "corpus"])
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("train", help="fit the reranker on scored candidate sets")
    p.add_argument("--candidates", required=True)
    p.add_argument("--quality", required=True)
    p.add_argument("--dev-candidates", default=None)
    p.add_argument("--dev-quality", default=None)
    p.add_argument("--dev-fraction", type=float, default=0.2)
    p.add_argument("--hash-dim", type=int, default=2 ** 18)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--optimizer", default="adaptive-moment", choices=["sgd", "adaptive-moment"])
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--weight-mode", default="uniform", choices=["uniform", "set-size"])
    p.add_argument("--no-two-phase", action="store_true")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("select", help="pick one candidate per set with a strategy")
    p.add_argument("--candidates", required=True)
    p.add_argument("--strategy", required=True, choices=list(selection.STRATEGIES))
    p.add_argument("--model", default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--quality", default=None)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("tune-lambda", help="grid-search the blend weight on a dev split")
    p.add_argument("--dev", required=True, help="dev candidates JSONL")
    p.add_argument("--model", required=True)
    p.add_argument("--quality", required=True)
    p.add_argument("--grid", default="0:1:0.05")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_tune_lambda)

    p = sub.add_parser("eval-alignment", help="top-1 and ranking accuracy against labels")
    p.add_argument("--scores", required=True, help="quality tables JSONL")
    p.add_argument("--labels", required=True)
    p.add_argument("--per-set", action="store_true", help="average ranking accuracy per set")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_eval_alignment)

    p = sub.add_parser("eval-pipeline", help="mean selected quality with significance")
    p.add_argument("--selections", required=True)
    p.add_argument("--quality", required=True)
    p.add_argument("--baseline", action="append", default=[], metavar="NAME=FILE")
    p.add_argument("--resamples", type=int, default=10_000)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_eval_pipeline)

    p = sub.add_parser("sweep", help="n-best size grid: train and evaluate per cell")
    p.add_argument("--candidates", required=True)
    p.add_argument("--quality", required=True)
    p.add_argument("--train-sizes", required=True, help="comma list, e.g. 2,4,8")
    p.add_argument("--test-sizes", required=True)
    p.add_argument("--hash-dim", type=int, default=2 ** 16)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("annotate", help="label candidates interactively in the terminal")
    p.add_argument("--candidates", required=True)
    p.add_argument("--out", required=True, help="label store JSONL, appended incrementally")
    _add_common(p)
    p.set_defaults(func=_cmd_annotate)

    p = sub.add_parser("run", help="full pipeline from a config file")
    p.add_argument("--out-dir", default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.seed_given = args.seed if "--seed" in argv else None
        if args.command == "run" and args.config is None:
            raise ConfigError("run needs --config")
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DatasetError, OSError, json.JSONDecodeError, ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (GeneratorError, ScorerProtocolError) as exc:
        print(f"service error: {exc}", file=sys.stderr)
        return 3
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    raise SystemExit(main())
