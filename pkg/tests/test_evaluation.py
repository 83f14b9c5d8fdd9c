"""Alignment accuracies, bootstrap significance, the size sweep, annotation."""

import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_synthetic_corpus
from genrerank.core import Candidate, CandidateSet, LabeledSet, QualityTable
from genrerank.reranker import TrainConfig
from genrerank.evaluation import (
    SweepConfig,
    alignment_report,
    annotate,
    combine_quality_one,
    evaluate_pipeline,
    format_alignment_table,
    format_pipeline_table,
    nbest_sweep,
    paired_bootstrap_pvalue,
    ranking_accuracy,
    save_sweep_grid,
    top1_accuracy,
)
from genrerank.scoring import combine_quality
from genrerank.selection import SelectionResult, select_corpus

# ---------------------------------------------------------------------------
# Top-1 accuracy


def test_top1_hand_example():
    sets = [
        ([3.0, 1.0], [1, 0]),  # hit
        ([3.0, 1.0], [0, 1]),  # miss
        ([2.0, 1.0], [1, 1]),  # excluded: single-class
    ]
    value, used, excluded = top1_accuracy(sets)
    assert value == 0.5
    assert used == 2 and excluded == 1


def test_top1_tied_top_needs_all_ones():
    miss = top1_accuracy([([2.0, 2.0, 1.0], [1, 0, 0])])
    assert miss[0] == 0.0
    hit = top1_accuracy([([2.0, 2.0, 1.0], [1, 1, 0])])
    assert hit[0] == 1.0


def test_top1_all_single_class_is_undefined():
    with pytest.raises(ValueError, match="single-class"):
        top1_accuracy([([1.0, 2.0], [1, 1]), ([1.0, 2.0], [0, 0])])


def test_scored_set_validation():
    with pytest.raises(ValueError):
        top1_accuracy([([1.0, 2.0], [1])])
    with pytest.raises(ValueError):
        top1_accuracy([([1.0, 2.0], [1, 2])])


# ---------------------------------------------------------------------------
# Ranking accuracy


def test_ranking_hand_examples():
    assert ranking_accuracy([([3.0, 1.0], [1, 0])])[0] == 1.0
    assert ranking_accuracy([([1.0, 3.0], [1, 0])])[0] == 0.0
    assert ranking_accuracy([([2.0, 2.0], [1, 0])])[0] == 0.5


def test_ranking_pools_pairs_across_sets():
    sets = [
        ([2.0, 1.0], [1, 0]),            # 1 pair, 1 win
        ([0.0, 5.0, 1.0, 2.0], [1, 0, 0, 0]),  # 3 pairs, 0 wins
    ]
    pooled, used, excluded = ranking_accuracy(sets)
    assert pooled == 0.25
    assert used == 2 and excluded == 0
    per_set, _, _ = ranking_accuracy(sets, per_set=True)
    assert per_set == 0.5


def ranking_bruteforce(scored_sets):
    total = 0.0
    pairs = 0
    for scores, labels in scored_sets:
        if not (0 in labels and 1 in labels):
            continue
        for i in range(len(scores)):
            for j in range(len(scores)):
                if labels[i] == 1 and labels[j] == 0:
                    pairs += 1
                    if scores[i] > scores[j]:
                        total += 1.0
                    elif scores[i] == scores[j]:
                        total += 0.5
    return total / pairs


@settings(max_examples=120, deadline=None)
@given(st.lists(
    st.lists(st.tuples(st.integers(min_value=0, max_value=5),
                       st.integers(min_value=0, max_value=1)),
             min_size=2, max_size=7),
    min_size=1, max_size=5))
def test_ranking_matches_bruteforce(raw_sets):
    scored = [([float(s) for s, _ in rows], [l for _, l in rows]) for rows in raw_sets]
    if not any(0 in labels and 1 in labels for _, labels in scored):
        with pytest.raises(ValueError):
            ranking_accuracy(scored)
        return
    assert ranking_accuracy(scored)[0] == pytest.approx(ranking_bruteforce(scored), abs=1e-12)


def test_single_class_sets_never_affect_values():
    mixed = [([3.0, 1.0, 2.0], [1, 0, 0]), ([1.0, 4.0], [0, 1])]
    padded = mixed + [([9.0, 8.0], [1, 1]), ([0.5, 0.1, 0.2], [0, 0, 0])]
    assert top1_accuracy(mixed)[0] == top1_accuracy(padded)[0]
    assert ranking_accuracy(mixed)[0] == ranking_accuracy(padded)[0]
    assert top1_accuracy(padded)[2] == 2


def test_strictly_monotone_rescoring_is_invisible():
    sets = [([0.1, 0.7, 0.5, 0.5], [0, 1, 1, 0]), ([0.9, 0.2], [1, 0])]
    transformed = [([float(np.exp(4 * s)) for s in scores], labels)
                   for scores, labels in sets]
    assert top1_accuracy(sets)[0] == top1_accuracy(transformed)[0]
    assert ranking_accuracy(sets)[0] == ranking_accuracy(transformed)[0]


def test_alignment_report_bundles_both():
    sets = [([3.0, 1.0], [1, 0]), ([1.0, 2.0], [1, 0]), ([1.0, 1.0], [1, 1])]
    report = alignment_report("bleu", sets)
    assert report.metric == "bleu"
    assert report.top1_accuracy == 0.5
    assert report.ranking_accuracy == 0.5
    assert report.sets_used == 2 and report.sets_excluded == 1
    table = format_alignment_table([report])
    assert "bleu" in table and "0.5000" in table


# ---------------------------------------------------------------------------
# Bootstrap


def test_bootstrap_identical_systems_give_one():
    assert paired_bootstrap_pvalue([0.0] * 50, n_resamples=500, seed=1) == 1.0


def test_bootstrap_dominant_system_is_significant():
    rng = np.random.default_rng(8)
    deltas = 0.5 + rng.normal(scale=1.0, size=200)
    assert paired_bootstrap_pvalue(deltas, seed=0) < 0.01


def test_bootstrap_never_returns_zero():
    p = paired_bootstrap_pvalue([1.0] * 10, n_resamples=100, seed=0)
    assert p == pytest.approx(1 / 101)


def test_bootstrap_seed_reproducible():
    rng = np.random.default_rng(3)
    deltas = rng.normal(size=80)
    a = paired_bootstrap_pvalue(deltas, seed=5)
    b = paired_bootstrap_pvalue(deltas, seed=5)
    assert a == b
    with pytest.raises(ValueError):
        paired_bootstrap_pvalue([])


# ---------------------------------------------------------------------------
# Pipeline evaluation


def _tables_for(corpus):
    out = {}
    for cs, q in corpus.pairs:
        out[cs.lf_id] = QualityTable(lf_id=cs.lf_id, per_metric={"m": q}, combined=q)
    return out


def test_evaluate_pipeline_means_and_significance():
    corpus = make_synthetic_corpus(n_sets=200, set_size=5, seed=31, hash_dim=2 ** 10)
    tables = _tables_for(corpus)
    oracle = select_corpus(corpus.sets, "oracle", quality=tables)
    random_sel = select_corpus(corpus.sets, "random", seed=0)
    report = evaluate_pipeline(oracle, tables, baselines={"random": random_sel}, seed=2)
    hand_mean = float(np.mean([max(q) for _, q in corpus.pairs]))
    assert report.per_metric_means["combined"] == pytest.approx(hand_mean, abs=1e-12)
    assert report.significance["random"] < 0.01
    assert report.sets == 200
    assert "oracle" in format_pipeline_table([report])


def test_evaluate_pipeline_validation():
    corpus = make_synthetic_corpus(n_sets=6, set_size=4, seed=13, hash_dim=2 ** 10)
    tables = _tables_for(corpus)
    sel = select_corpus(corpus.sets, "random", seed=1)
    with pytest.raises(ValueError):
        evaluate_pipeline([], tables)
    with pytest.raises(ValueError, match="baseline"):
        evaluate_pipeline(sel, tables, baselines={"short": sel[:-1]})
    with pytest.raises(ValueError, match="metric"):
        evaluate_pipeline(sel, tables, metrics=["rogue"])
    stray = [SelectionResult(lf_id="missing", chosen_index=0, strategy="random")]
    with pytest.raises(ValueError, match="missing"):
        evaluate_pipeline(stray, tables)
    bad_index = [SelectionResult(lf_id=sel[0].lf_id, chosen_index=99, strategy="random")]
    with pytest.raises(ValueError, match="out of range"):
        evaluate_pipeline(bad_index, tables, metrics=["combined"])


# ---------------------------------------------------------------------------
# n-best size sweep


def _sweep_corpus(n_sets=30, set_size=4, seed=19):
    corpus = make_synthetic_corpus(n_sets=n_sets, set_size=set_size, seed=seed,
                                   hash_dim=2 ** 10)
    return [(cs, QualityTable(lf_id=cs.lf_id, per_metric={"m": q}))
            for cs, q in corpus.pairs], corpus.feature_config


def test_nbest_sweep_smoke_and_reproducibility():
    corpus, feat_cfg = _sweep_corpus()
    cfg = SweepConfig(seed=4, feature_config=feat_cfg,
                      train_config=TrainConfig(max_epochs=3, two_phase=False, seed=0,
                                               learning_rate=1e-3))
    grid = nbest_sweep([2, 3], [2, 3], corpus, cfg)
    assert set(grid) == {(2, 2), (2, 3), (3, 2), (3, 3)}
    assert all(np.isfinite(v) for v in grid.values())
    again = nbest_sweep([2, 3], [2, 3], corpus, cfg)
    assert grid == again


def test_nbest_sweep_rejects_oversized_requests():
    corpus, feat_cfg = _sweep_corpus(set_size=3)
    with pytest.raises(ValueError, match="smaller than"):
        nbest_sweep([2], [5], corpus, SweepConfig(feature_config=feat_cfg))
    with pytest.raises(ValueError):
        nbest_sweep([2], [2], [], SweepConfig(feature_config=feat_cfg))


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(dev_fraction=0.0)
    with pytest.raises(ValueError):
        SweepConfig(dev_fraction=1.0)


def test_combine_quality_one_matches_full_path():
    per = {"a": (0.0, 1.0, 3.0), "b": (2.0, 2.5, -1.0)}
    one = combine_quality_one(per)
    table = QualityTable(lf_id="x", per_metric=per)
    full = combine_quality({"x": table})["x"].combined
    assert one == full


def test_save_sweep_grid_rows(tmp_path):
    path = tmp_path / "grid.jsonl"
    save_sweep_grid({(4, 2): 0.5, (2, 2): 0.25}, str(path))
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert rows == [
        {"mean_combined_q": 0.25, "test_size": 2, "train_size": 2},
        {"mean_combined_q": 0.5, "test_size": 2, "train_size": 4},
    ]


# ---------------------------------------------------------------------------
# Annotation session


def _annot_sets(n=2, size=2):
    out = []
    for k in range(n):
        cands = tuple(Candidate(f"candidate {k} {i}") for i in range(size))
        out.append(CandidateSet(lf_id=f"a{k}", lf=f"answer ( q{k} )",
                                reference=f"reference {k}", candidates=cands))
    return out


def test_annotate_scripted_session(tmp_path):
    store = tmp_path / "labels.jsonl"
    sets = _annot_sets(n=1, size=3)
    out = io.StringIO()
    results = annotate(sets, str(store), in_stream=io.StringIO("1\n0\n1\n"), out_stream=out)
    assert results == [LabeledSet(lf_id="a0", labels=(1, 0, 1))]
    saved = [json.loads(line) for line in store.read_text().splitlines()]
    assert saved == [{"lf_id": "a0", "labels": [1, 0, 1]}]
    transcript = out.getvalue()
    assert "answer ( q0 )" in transcript and "reference 0" in transcript


def test_annotate_reprompts_on_garbage(tmp_path):
    store = tmp_path / "labels.jsonl"
    out = io.StringIO()
    results = annotate(_annot_sets(n=1, size=2), str(store),
                       in_stream=io.StringIO("7\nx\n1\n0\n"), out_stream=out)
    assert results[0].labels == (1, 0)
    assert out.getvalue().count("try again") == 2


def test_annotate_resumes_from_store(tmp_path):
    store = tmp_path / "labels.jsonl"
    store.write_text('{"lf_id": "a0", "labels": [0, 0]}\n')
    sets = _annot_sets(n=2, size=2)
    out = io.StringIO()
    results = annotate(sets, str(store), in_stream=io.StringIO("1\n1\n"), out_stream=out)
    assert {ls.lf_id: ls.labels for ls in results} == {"a0": (0, 0), "a1": (1, 1)}
    assert "1 sets already labeled, 1 to go." in out.getvalue()


def test_annotate_eof_mid_set_preserves_finished_sets(tmp_path):
    store = tmp_path / "labels.jsonl"
    sets = _annot_sets(n=2, size=2)
    with pytest.raises(EOFError, match="saved"):
        annotate(sets, str(store), in_stream=io.StringIO("1\n0\n1\n"),
                 out_stream=io.StringIO())
    saved = [json.loads(line) for line in store.read_text().splitlines()]
    assert saved == [{"lf_id": "a0", "labels": [1, 0]}]
