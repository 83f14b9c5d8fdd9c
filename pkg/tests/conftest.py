"""Shared fixtures: synthetic corpora with a known linear quality target."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pytest

from genrerank.core import Candidate, CandidateSet
from genrerank.reranker import FeatureConfig, featurize

OPS = ["count", "largest", "smallest", "longest", "major", "total", "first"]
NOUNS = ["state", "city", "river", "lake", "road", "peak", "port", "town"]
ENTITIES = ["avon", "brent", "calder", "derwent", "eden", "frome", "gipping",
            "humber", "irwell", "kennet", "lugg", "medway", "nene", "otter",
            "parrett", "quin", "ribble", "severn", "tame", "ure", "wey", "yare"]
FILLERS = ["the", "of", "in", "which", "what", "how", "many", "through", "runs",
           "borders", "is", "are", "near", "beside", "along", "between", "big",
           "small", "long", "main", "name", "show", "list", "find"]


@dataclass(frozen=True)
class SyntheticCorpus:
    """Candidate sets whose gold quality is linear in the reranker's own
    features (plus noise), so the learning task is realizable by design."""

    pairs: tuple[tuple[CandidateSet, tuple[float, ...]], ...]
    feature_config: FeatureConfig
    noise: float

    @property
    def sets(self) -> tuple[CandidateSet, ...]:
        return tuple(cs for cs, _ in self.pairs)

    def gold(self, lf_id: str) -> tuple[float, ...]:
        for cs, q in self.pairs:
            if cs.lf_id == lf_id:
                return q
        raise KeyError(lf_id)

    def labels(self) -> dict[str, tuple[int, ...]]:
        """Median-split binary labels per set; always mixed for distinct Q."""
        out = {}
        for cs, q in self.pairs:
            med = float(np.median(q))
            out[cs.lf_id] = tuple(int(v > med) for v in q)
        return out


def _candidate_text(lf_words: Sequence[str], rng: np.random.Generator) -> str:
    length = int(rng.integers(5, 9))
    words = []
    for _ in range(length):
        if rng.random() < 0.4:
            words.append(lf_words[int(rng.integers(len(lf_words)))])
        else:
            words.append(FILLERS[int(rng.integers(len(FILLERS)))])
    return " ".join(words)


def make_synthetic_corpus(n_sets: int, set_size: int, seed: int,
                          hash_dim: int = 2 ** 18, noise: float = 0.05,
                          gen_corr: float = 0.0,
                          count_corr: bool = False) -> SyntheticCorpus:
    """Build n_sets candidate sets of set_size distinct texts each.

    Gold quality is w* . features(lf, text) + N(0, noise). ``gen_corr`` in
    [0, 1] leaks that quality into gen_logprob (0 = pure noise); with
    ``count_corr`` the two best candidates per set receive inflated
    raw_counts, so self-consistency has signal.
    """
    rng = np.random.default_rng(seed)
    cfg = FeatureConfig(hash_dim=hash_dim)
    w_star = rng.normal(size=hash_dim) * 0.5
    pairs = []
    for k in range(n_sets):
        op = OPS[int(rng.integers(len(OPS)))]
        noun = NOUNS[int(rng.integers(len(NOUNS)))]
        entity = ENTITIES[int(rng.integers(len(ENTITIES)))]
        lf = f"{op} ( {noun} ( id ( '{entity}' ) ) )"
        lf_words = [op, noun, entity]
        texts: list[str] = []
        while len(texts) < set_size:
            text = _candidate_text(lf_words, rng)
            if text not in texts:
                texts.append(text)
        q = np.empty(set_size)
        for i, text in enumerate(texts):
            ix, vals = featurize(lf, text, cfg)
            q[i] = w_star[ix] @ vals + rng.normal() * noise
        g = gen_corr * _zscore(q) + (1.0 - gen_corr) * rng.normal(size=set_size)
        order = np.argsort(-q)
        counts = np.ones(set_size, dtype=int)
        if count_corr:
            counts[order[0]] += int(rng.integers(2, 5))
            counts[order[1]] += int(rng.integers(1, 3))
        candidates = tuple(
            Candidate(text=texts[i], raw_count=int(counts[i]), gen_logprob=float(g[i]))
            for i in range(set_size))
        cs = CandidateSet(lf_id=f"s{k:05d}", candidates=candidates, lf=lf,
                          reference=None)
        pairs.append((cs, tuple(q.tolist())))
    return SyntheticCorpus(pairs=tuple(pairs), feature_config=cfg, noise=noise)


def _zscore(values: np.ndarray) -> np.ndarray:
    std = values.std()
    if std == 0.0:
        return np.zeros_like(values)
    return (values - values.mean()) / std


@pytest.fixture(scope="session")
def small_corpus() -> SyntheticCorpus:
    """120 sets x 6 candidates at a small hash_dim; enough signal to train."""
    return make_synthetic_corpus(n_sets=120, set_size=6, seed=11, hash_dim=2 ** 14,
                                 gen_corr=0.4, count_corr=True)
