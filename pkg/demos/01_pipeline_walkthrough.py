"""End-to-end tour on the bundled fixture: generate, score, train, select.

Everything runs offline against the seeded mock generator, so the numbers
printed here are reproducible. Takes a few seconds.

    python3 demos/01_pipeline_walkthrough.py
"""

import numpy as np

from genrerank import evaluation, genclient, reranker, scoring, selection

SEED = 7


def main():
    fixture = genclient.load_mock_fixture()
    train_lfs = [lf for lf in fixture.dataset if lf.split == "train"]
    print(f"fixture: {len(fixture.dataset)} logical forms, "
          f"{len(train_lfs)} in the train split")
    print(f"example LF: {train_lfs[0].lf}")
    print(f"reference:  {train_lfs[0].reference}\n")

    # --- generate candidate sets from the mock pools --------------------
    cfg = genclient.GeneratorConfig(target_n=5, seed=SEED)
    client = genclient.make_client(cfg, pools=fixture.pools)
    sets = genclient.generate_corpus(train_lfs, cfg, client)
    sizes = [len(cs) for cs in sets]
    print(f"generated {len(sets)} sets, sizes {min(sizes)}..{max(sizes)} "
          f"(mean {genclient.mean_set_size(sets):.2f})")
    for cand in sets[0].candidates:
        print(f"  {cand.raw_count}x  lp={cand.gen_logprob:+.3f}  {cand.text}")
    print()

    # --- score each candidate against the reference and the LF ----------
    tables = {}
    for name in ("bleu", "toy-parser"):
        spec = scoring.make_scorer(name)
        for lf_id, vec in scoring.score_sets(sets, spec).items():
            tables.setdefault(lf_id, {})[name] = vec
    quality = {
        lf_id: scoring.combine_metrics(per_metric)
        for lf_id, per_metric in tables.items()
    }
    first = sets[0].lf_id
    print(f"quality for {first}: bleu={np.round(tables[first]['bleu'], 3)}")
    print(f"              combined={np.round(quality[first], 3)}\n")

    # --- train the reranker on (set, combined quality) pairs ------------
    pairs = [(cs, tuple(quality[cs.lf_id])) for cs in sets]
    split = int(0.8 * len(pairs))
    model = reranker.train(
        pairs[:split], pairs[split:],
        feature_config=reranker.FeatureConfig(hash_dim=2 ** 12),
        config=reranker.TrainConfig(max_epochs=15, learning_rate=3e-3, seed=SEED),
    )
    meta = model.train_meta
    print(f"trained {meta['epochs_run']} epochs, "
          f"best dev loss {meta['best_dev_loss']:.4f} at epoch {meta['best_epoch']}\n")

    # --- compare selection strategies ------------------------------------
    from genrerank.core import QualityTable
    qtables = {lf_id: QualityTable(lf_id=lf_id, per_metric=tables[lf_id],
                                   combined=tuple(vec))
               for lf_id, vec in quality.items()}

    def mean_chosen(results):
        return float(np.mean([quality[r.lf_id][r.chosen_index] for r in results]))

    print("strategy           mean combined quality of the chosen candidate")
    for strategy in ("random", "generator", "self-consistency", "reranker", "oracle"):
        picked = selection.select_corpus(sets, strategy, model=model,
                                         quality=qtables, seed=SEED)
        print(f"  {strategy:<16} {mean_chosen(picked):+.4f}")

    curve = selection.tune_lambda(sets[split:], model, qtables)
    print(f"\nblend weight tuned on held-out sets: lambda*={curve.best}")
    combined = selection.select_corpus(sets, "combined", model=model, lam=curve.best)
    print(f"  combined         {mean_chosen(combined):+.4f}")


if __name__ == "__main__":
    main()
