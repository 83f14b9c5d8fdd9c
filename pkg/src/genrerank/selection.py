"""Candidate selection strategies and dev-split lambda tuning.

Argmax strategies break ties on the first (lowest) index; self-consistency
breaks ties uniformly at random, which is why the random-flavored selectors
take an explicit RNG handle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from genrerank.core import CandidateSet, QualityTable, read_jsonl, write_jsonl
from genrerank.reranker import RerankerModel, score_set


@dataclass(frozen=True)
class SelectionResult:
    lf_id: str
    chosen_index: int
    strategy: str
    score_breakdown: Mapping[str, tuple[float, ...]] | None = None

    def __post_init__(self) -> None:
        if self.chosen_index < 0:
            raise ValueError("chosen_index must be >= 0")


def _result(cs: CandidateSet, index: int, strategy: str,
            breakdown: Mapping[str, Sequence[float]] | None = None) -> SelectionResult:
    if not (0 <= index < len(cs)):
        raise ValueError(f"chosen index {index} out of bounds for set {cs.lf_id!r}")
    frozen = None
    if breakdown is not None:
        frozen = {k: tuple(float(x) for x in v) for k, v in breakdown.items()}
    return SelectionResult(cs.lf_id, index, strategy, frozen)


def _first_argmax(values: Sequence[float]) -> int:
    arr = np.asarray(values, dtype=np.float64)
    return int(np.argmax(arr))


def select_random(cs: CandidateSet, rng: np.random.Generator) -> SelectionResult:
    """Uniform choice over the set's candidates."""
    return _result(cs, int(rng.integers(len(cs))), "random")


def select_self_consistency(cs: CandidateSet, rng: np.random.Generator) -> SelectionResult:
    """Most frequently emitted candidate; ties broken uniformly at random."""
    counts = np.array([c.raw_count for c in cs.candidates])
    best = counts.max()
    tied = np.flatnonzero(counts == best)
    index = int(tied[rng.integers(len(tied))]) if len(tied) > 1 else int(tied[0])
    return _result(cs, index, "self-consistency", {"raw_count": counts.tolist()})


def select_generator(cs: CandidateSet) -> SelectionResult:
    """Highest mean token log-probability."""
    logprobs = [c.gen_logprob for c in cs.candidates]
    return _result(cs, _first_argmax(logprobs), "generator", {"gen_logprob": logprobs})


def select_reranker(cs: CandidateSet, model: RerankerModel) -> SelectionResult:
    """Highest trained-scorer output."""
    scores = score_set(model, cs)
    return _result(cs, _first_argmax(scores), "reranker", {"reranker": scores.tolist()})


def select_combined(cs: CandidateSet, model: RerankerModel, lam: float,
                    standardize: bool = False) -> SelectionResult:
    """Argmax of lam * R + (1 - lam) * G.

    Scores blend raw by default; ``standardize`` z-scores R and G within the
    set first, for callers worried about their very different scales.
    """
    if not (0.0 <= lam <= 1.0):
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    r = score_set(model, cs)
    g = np.array([c.gen_logprob for c in cs.candidates])
    if standardize:
        r = _zscore(r)
        g = _zscore(g)
    blended = lam * r + (1.0 - lam) * g
    return _result(cs, _first_argmax(blended), "combined",
                   {"reranker": r.tolist(), "gen_logprob": g.tolist(),
                    "combined": blended.tolist(), "lambda": (lam,)})


def _zscore(values: np.ndarray) -> np.ndarray:
    std = values.std()
    if std == 0.0:
        return np.zeros_like(values)
    return (values - values.mean()) / std


def select_oracle(cs: CandidateSet, quality: Sequence[float]) -> SelectionResult:
    """Argmax of gold combined quality; the reference-needing upper bound."""
    if len(quality) != len(cs):
        raise ValueError(f"set {cs.lf_id!r}: quality vector length {len(quality)} != {len(cs)}")
    return _result(cs, _first_argmax(quality), "oracle",
                   {"combined_q": list(quality)})


STRATEGIES = ("random", "self-consistency", "generator", "reranker", "combined", "oracle")


def select_corpus(sets: Sequence[CandidateSet], strategy: str,
                  model: RerankerModel | None = None,
                  lam: float | None = None,
                  quality: Mapping[str, QualityTable] | None = None,
                  seed: int = 0,
                  standardize: bool = False) -> list[SelectionResult]:
    """Apply one strategy to every set. Random draws come from one seeded
    stream in set order, so results are reproducible and order-sensitive."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")
    rng = np.random.default_rng(seed)
    out = []
    for cs in sets:
        if strategy == "random":
            out.append(select_random(cs, rng))
        elif strategy == "self-consistency":
            out.append(select_self_consistency(cs, rng))
        elif strategy == "generator":
            out.append(select_generator(cs))
        elif strategy == "reranker":
            out.append(select_reranker(cs, _require_model(model)))
        elif strategy == "combined":
            if lam is None:
                raise ValueError("combined strategy needs a lambda")
            out.append(select_combined(cs, _require_model(model), lam, standardize=standardize))
        else:
            out.append(select_oracle(cs, _quality_for(quality, cs)))
    return out


def _require_model(model: RerankerModel | None) -> RerankerModel:
    if model is None:
        raise ValueError("this strategy needs a trained model")
    return model


def _quality_for(quality: Mapping[str, QualityTable] | None, cs: CandidateSet) -> tuple[float, ...]:
    if quality is None or cs.lf_id not in quality:
        raise ValueError(f"no quality table for set {cs.lf_id!r}")
    return quality[cs.lf_id].require_combined()


# ---------------------------------------------------------------------------
# Lambda tuning


@dataclass(frozen=True)
class LambdaConfig:
    grid: tuple[float, ...] = tuple(round(0.05 * k, 2) for k in range(21))
    standardize: bool = False

    def __post_init__(self) -> None:
        if not self.grid:
            raise ValueError("lambda grid is empty")
        if any(not (0.0 <= v <= 1.0) for v in self.grid):
            raise ValueError("lambda grid values must lie in [0, 1]")


@dataclass(frozen=True)
class LambdaCurve:
    best: float
    curve: tuple[tuple[float, float], ...]  # (lambda, mean combined-Q of selections)


def tune_lambda(dev_sets: Sequence[CandidateSet], model: RerankerModel,
                quality: Mapping[str, QualityTable],
                cfg: LambdaConfig | None = None) -> LambdaCurve:
    """Pick the grid lambda whose blended selections have the highest mean
    combined quality on the dev split; smallest lambda wins ties."""
    cfg = cfg or LambdaConfig()
    if not dev_sets:
        raise ValueError("no dev sets")
    r_all = [score_set(model, cs) for cs in dev_sets]
    g_all = [np.array([c.gen_logprob for c in cs.candidates]) for cs in dev_sets]
    if cfg.standardize:
        r_all = [_zscore(r) for r in r_all]
        g_all = [_zscore(g) for g in g_all]
    q_all = [np.asarray(_quality_for(quality, cs)) for cs in dev_sets]
    points = []
    for lam in cfg.grid:
        total = 0.0
        for r, g, q in zip(r_all, g_all, q_all):
            total += q[int(np.argmax(lam * r + (1.0 - lam) * g))]
        points.append((lam, total / len(dev_sets)))
    best = max(points, key=lambda p: (p[1], -p[0]))
    return LambdaCurve(best=best[0], curve=tuple(points))


# ---------------------------------------------------------------------------
# Selection file IO


def save_selections(results: Iterable[SelectionResult], path: str) -> None:
    rows = []
    for r in results:
        row = {"lf_id": r.lf_id, "chosen_index": r.chosen_index, "strategy": r.strategy}
        if r.score_breakdown is not None:
            row["score_breakdown"] = {k: list(v) for k, v in r.score_breakdown.items()}
        rows.append(row)
    write_jsonl(rows, path)


def load_selections(path: str) -> list[SelectionResult]:
    out = []
    for lineno, row in read_jsonl(path):
        breakdown = row.get("score_breakdown")
        if breakdown is not None:
            breakdown = {k: tuple(v) for k, v in breakdown.items()}
        out.append(SelectionResult(str(row["lf_id"]), int(row["chosen_index"]),
                                   str(row["strategy"]), breakdown))
    return out
