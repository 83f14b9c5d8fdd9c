"""Alignment accuracies, pipeline evaluation with bootstrap significance,
the n-best-size sweep, and the terminal annotation session."""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, replace
from typing import IO, Mapping, Sequence

import numpy as np

from genrerank.core import (
    CandidateSet,
    LabeledSet,
    QualityTable,
    load_labeled_sets,
    write_jsonl,
)
from genrerank.reranker import FeatureConfig, TrainConfig, train
from genrerank.scoring import combine_quality
from genrerank.selection import SelectionResult, select_reranker


@dataclass(frozen=True)
class AlignmentReport:
    metric: str
    top1_accuracy: float
    ranking_accuracy: float
    sets_used: int
    sets_excluded: int


def _check_scored_set(scores: Sequence[float], labels: Sequence[int]) -> None:
    if len(scores) != len(labels):
        raise ValueError(f"scores ({len(scores)}) and labels ({len(labels)}) differ in length")
    if any(l not in (0, 1) for l in labels):
        raise ValueError("labels must be 0 or 1")


def _is_mixed(labels: Sequence[int]) -> bool:
    return 0 in labels and 1 in labels


def top1_accuracy(scored_sets: Sequence[tuple[Sequence[float], Sequence[int]]]) -> tuple[float, int, int]:
    """Fraction of mixed-label sets whose top-scored candidate is labeled 1.

    Single-class sets are excluded and reported in the counts. When several
    candidates tie at the top score, the set counts as a hit only if every
    tied candidate is labeled 1.
    """
    used = 0
    excluded = 0
    hits = 0
    for scores, labels in scored_sets:
        _check_scored_set(scores, labels)
        if not _is_mixed(labels):
            excluded += 1
            continue
        used += 1
        arr = np.asarray(scores, dtype=np.float64)
        top = arr.max()
        tied = np.flatnonzero(arr == top)
        if all(labels[i] == 1 for i in tied):
            hits += 1
    if used == 0:
        raise ValueError("every set was single-class; top-1 accuracy is undefined")
    return hits / used, used, excluded


def ranking_accuracy(scored_sets: Sequence[tuple[Sequence[float], Sequence[int]]],
                     per_set: bool = False) -> tuple[float, int, int]:
    """Fraction of (correct, incorrect) pairs ordered correctly; ties 0.5.

    Pairs pool across mixed-label sets by default; ``per_set`` averages each
    set's own pair fraction instead.
    """
    used = 0
    excluded = 0
    pair_total = 0
    credit = 0.0
    per_set_fracs = []
    for scores, labels in scored_sets:
        _check_scored_set(scores, labels)
        if not _is_mixed(labels):
            excluded += 1
            continue
        used += 1
        arr = np.asarray(scores, dtype=np.float64)
        lab = np.asarray(labels)
        pos = arr[lab == 1]
        neg = arr[lab == 0]
        wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
        pairs = pos.size * neg.size
        pair_total += pairs
        credit += wins
        per_set_fracs.append(wins / pairs)
    if used == 0:
        raise ValueError("every set was single-class; ranking accuracy is undefined")
    value = float(np.mean(per_set_fracs)) if per_set else credit / pair_total
    return value, used, excluded


def alignment_report(metric: str,
                     scored_sets: Sequence[tuple[Sequence[float], Sequence[int]]],
                     per_set: bool = False) -> AlignmentReport:
    top1, used, excluded = top1_accuracy(scored_sets)
    ranking, _, _ = ranking_accuracy(scored_sets, per_set=per_set)
    return AlignmentReport(metric=metric, top1_accuracy=top1, ranking_accuracy=ranking,
                           sets_used=used, sets_excluded=excluded)


# ---------------------------------------------------------------------------
# Pipeline evaluation


@dataclass(frozen=True)
class PipelineReport:
    strategy: str
    per_metric_means: Mapping[str, float]
    significance: Mapping[str, float]
    sets: int


def paired_bootstrap_pvalue(deltas: Sequence[float], n_resamples: int = 10_000,
                            seed: int = 0) -> float:
    """One-sided paired bootstrap: P(resampled mean delta <= 0).

    Add-one smoothed so identical systems give exactly 1.0 rather than an
    accidental 0.
    """
    arr = np.asarray(deltas, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("no paired differences")
    rng = np.random.default_rng(seed)
    picks = rng.integers(arr.size, size=(n_resamples, arr.size))
    means = arr[picks].mean(axis=1)
    return (1 + int((means <= 0.0).sum())) / (1 + n_resamples)


def _chosen_scores(selections: Sequence[SelectionResult],
                   tables: Mapping[str, QualityTable],
                   metric: str) -> np.ndarray:
    out = np.empty(len(selections))
    for k, sel in enumerate(selections):
        if sel.lf_id not in tables:
            raise ValueError(f"no quality table for set {sel.lf_id!r}")
        table = tables[sel.lf_id]
        scores = (table.require_combined() if metric == "combined"
                  else table.per_metric.get(metric))
        if scores is None:
            raise ValueError(f"set {sel.lf_id!r} has no scores for metric {metric!r}")
        if not (0 <= sel.chosen_index < len(scores)):
            raise ValueError(f"set {sel.lf_id!r}: chosen index {sel.chosen_index} out of range")
        out[k] = scores[sel.chosen_index]
    return out


def evaluate_pipeline(selections: Sequence[SelectionResult],
                      tables: Mapping[str, QualityTable],
                      metrics: Sequence[str] | None = None,
                      baselines: Mapping[str, Sequence[SelectionResult]] | None = None,
                      n_resamples: int = 10_000,
                      seed: int = 0) -> PipelineReport:
    """Mean chosen-candidate score per metric, with paired-bootstrap p-values
    against each named baseline's selections (on the combined metric)."""
    if not selections:
        raise ValueError("no selections")
    if metrics is None:
        first = tables.get(selections[0].lf_id)
        if first is None:
            raise ValueError(f"no quality table for set {selections[0].lf_id!r}")
        metrics = sorted(first.per_metric) + ["combined"]
    means = {m: float(_chosen_scores(selections, tables, m).mean()) for m in metrics}
    significance: dict[str, float] = {}
    if baselines:
        ours = _chosen_scores(selections, tables, "combined")
        for name, base_sel in baselines.items():
            if len(base_sel) != len(selections):
                raise ValueError(f"baseline {name!r} has {len(base_sel)} selections, expected {len(selections)}")
            theirs = _chosen_scores(base_sel, tables, "combined")
            significance[name] = paired_bootstrap_pvalue(ours - theirs,
                                                         n_resamples=n_resamples, seed=seed)
    return PipelineReport(strategy=selections[0].strategy, per_metric_means=means,
                          significance=significance, sets=len(selections))


# ---------------------------------------------------------------------------
# n-best size sweep


@dataclass(frozen=True)
class SweepConfig:
    seed: int = 0
    dev_fraction: float = 0.2
    feature_config: FeatureConfig | None = None
    train_config: TrainConfig | None = None
    gamma: float = 0.1

    def __post_init__(self) -> None:
        if not (0.0 < self.dev_fraction < 1.0):
            raise ValueError("dev_fraction must be in (0, 1)")


def _subsample_set(cs: CandidateSet, table: QualityTable, size: int,
                   rng: np.random.Generator) -> tuple[CandidateSet, dict[str, tuple[float, ...]]]:
    if size > len(cs):
        raise ValueError(f"set {cs.lf_id!r} has {len(cs)} candidates, cannot subsample {size}")
    keep = sorted(rng.choice(len(cs), size=size, replace=False).tolist())
    sub = replace(cs, candidates=tuple(cs.candidates[i] for i in keep))
    per_metric = {m: tuple(v[i] for i in keep) for m, v in table.per_metric.items()}
    return sub, per_metric


def nbest_sweep(train_sizes: Sequence[int], test_sizes: Sequence[int],
                corpus: Sequence[tuple[CandidateSet, QualityTable]],
                cfg: SweepConfig | None = None) -> dict[tuple[int, int], float]:
    """Grid of mean combined-Q of reranker selections, one cell per
    (train n-best size, test n-best size) pair.

    Every cell subsamples candidate lists with its own seeded stream, rebuilds
    combined Q on the subsets (set-level normalization is size-dependent),
    trains a fresh reranker, and evaluates on the held-out sets.
    """
    cfg = cfg or SweepConfig()
    if not corpus:
        raise ValueError("empty corpus")
    needed = max(max(train_sizes), max(test_sizes))
    short = [cs.lf_id for cs, _ in corpus if len(cs) < needed]
    if short:
        raise ValueError(f"{len(short)} sets are smaller than the largest requested size "
                         f"{needed} (first: {short[0]!r})")
    split_rng = np.random.default_rng(cfg.seed)
    order = split_rng.permutation(len(corpus)).tolist()
    n_test = max(1, int(round(len(corpus) * cfg.dev_fraction)))
    test_ids = set(order[:n_test])
    rest = order[n_test:]
    if len(rest) < 2:
        raise ValueError("corpus too small to carve out train and early-stop splits")
    earlystop_ids = set(rest[: max(1, len(rest) // 5)])
    grid: dict[tuple[int, int], float] = {}
    for tr_size in train_sizes:
        for te_size in test_sizes:
            cell_rng = np.random.default_rng((cfg.seed, tr_size, te_size))
            train_pairs = []
            earlystop_pairs = []
            test_pairs = []
            for k, (cs, table) in enumerate(corpus):
                size = te_size if k in test_ids else tr_size
                sub, per_metric = _subsample_set(cs, table, size, cell_rng)
                pair = (sub, combine_quality_one(per_metric))
                if k in test_ids:
                    test_pairs.append(pair)
                elif k in earlystop_ids:
                    earlystop_pairs.append(pair)
                else:
                    train_pairs.append(pair)
            model = train(train_pairs,
                          dev_sets=earlystop_pairs,
                          feature_config=cfg.feature_config,
                          config=cfg.train_config,
                          gamma=cfg.gamma)
            total = 0.0
            for sub, q in test_pairs:
                sel = select_reranker(sub, model)
                total += q[sel.chosen_index]
            grid[(tr_size, te_size)] = total / len(test_pairs)
    return grid


def combine_quality_one(per_metric: Mapping[str, Sequence[float]]) -> tuple[float, ...]:
    """Set-level combined Q from one set's per-metric scores."""
    table = QualityTable(lf_id="_", per_metric={k: tuple(v) for k, v in per_metric.items()})
    combined = combine_quality({"_": table})["_"].combined
    assert combined is not None
    return combined


def save_sweep_grid(grid: Mapping[tuple[int, int], float], path: str) -> None:
    rows = [{"train_size": tr, "test_size": te, "mean_combined_q": v}
            for (tr, te), v in sorted(grid.items())]
    write_jsonl(rows, path)


# ---------------------------------------------------------------------------
# Annotation session

ANNOTATION_CRITERIA = (
    "(i)   it omits information from the logical form",
    "(ii)  it adds information not in the logical form",
    "(iii) it contradicts the logical form",
    "(iv)  it is ungrammatical or disfluent",
    "(v)   it would not be a plausible way to ask for the logical form",
)


def annotate(sets: Sequence[CandidateSet], label_store: str,
             in_stream: IO[str] | None = None,
             out_stream: IO[str] | None = None) -> list[LabeledSet]:
    """Terminal labeling loop: mark each candidate 1 (acceptable) or 0.

    A candidate fails if any criterion below applies. Already-labeled sets in
    ``label_store`` are skipped, so an interrupted session resumes where it
    stopped; each completed set is appended to the store immediately.
    """
    stdin = in_stream if in_stream is not None else sys.stdin
    stdout = out_stream if out_stream is not None else sys.stdout
    try:
        done = {ls.lf_id: ls for ls in load_labeled_sets(label_store)}
    except FileNotFoundError:
        done = {}
    results = list(done.values())
    todo = [cs for cs in sets if cs.lf_id not in done]
    print(f"{len(done)} sets already labeled, {len(todo)} to go.", file=stdout)
    print("Label 0 if any of these applies to the candidate:", file=stdout)
    for line in ANNOTATION_CRITERIA:
        print("  " + line, file=stdout)
    with open(label_store, "a", encoding="utf-8") as store:
        for cs in todo:
            print(f"\n=== {cs.lf_id} ===", file=stdout)
            print(f"LF:        {cs.require_lf()}", file=stdout)
            print(f"Reference: {cs.require_reference()}", file=stdout)
            labels = []
            for k, cand in enumerate(cs.candidates):
                print(f"[{k + 1}/{len(cs)}] {cand.text}", file=stdout)
                while True:
                    print("label (0/1)> ", end="", file=stdout)
                    stdout.flush()
                    raw = stdin.readline()
                    if raw == "":
                        raise EOFError(f"input ended mid-set at {cs.lf_id!r}; "
                                       "already-completed sets were saved")
                    token = raw.strip()
                    if token in ("0", "1"):
                        labels.append(int(token))
                        break
                    print(f"expected 0 or 1, got {token!r}; try again", file=stdout)
            labeled = LabeledSet(lf_id=cs.lf_id, labels=tuple(labels))
            store.write(json.dumps({"lf_id": labeled.lf_id, "labels": list(labeled.labels)},
                                   ensure_ascii=False) + "\n")
            store.flush()
            results.append(labeled)
    print(f"\ndone: {len(results)} sets labeled in {label_store}", file=stdout)
    return results


def format_alignment_table(reports: Sequence[AlignmentReport]) -> str:
    lines = [f"{'metric':<24} {'top-1':>8} {'ranking':>8} {'sets':>6} {'excl.':>6}"]
    for r in reports:
        lines.append(f"{r.metric:<24} {r.top1_accuracy:>8.4f} {r.ranking_accuracy:>8.4f} "
                     f"{r.sets_used:>6d} {r.sets_excluded:>6d}")
    return "\n".join(lines)


def format_pipeline_table(reports: Sequence[PipelineReport]) -> str:
    metrics = sorted({m for r in reports for m in r.per_metric_means})
    header = f"{'strategy':<18}" + "".join(f" {m:>14}" for m in metrics)
    lines = [header]
    for r in reports:
        cells = "".join(f" {r.per_metric_means.get(m, float('nan')):>14.4f}" for m in metrics)
        lines.append(f"{r.strategy:<18}" + cells)
        for base, p in sorted(r.significance.items()):
            lines.append(f"  vs {base}: paired bootstrap p = {p:.4g}")
    return "\n".join(lines)
