"""How candidate sets get their sizes under a fixed sampling budget.

Sampling an LLM n times and keeping the distinct strings yields sets of
varying size: paraphrase-rich prompts fill up, degenerate ones collapse.
The budget builder embraces that, drops LFs left with a single unique
candidate, and the trainer can reweight sets so large ones do not dominate.

    python3 demos/03_sampling_budget.py
"""

import numpy as np

from genrerank import genclient, reranker
from genrerank.core import LogicalForm


def main():
    # three pools with very different diversity
    pools = {
        "count ( state )": [
            ("how many states are there", 1.0),
            ("count the states", 1.0),
            ("what is the number of states", 1.0),
            ("give the state count", 1.0),
            ("number of states", 1.0),
        ],
        # heavily peaked: one phrasing soaks up almost every draw
        "largest ( city )": [
            ("the biggest city", 10.0),
            ("which city is largest", 1.0),
            ("name the largest city", 1.0),
        ],
        # degenerate: the sampler can only ever say one thing
        "shortest ( river )": [
            ("the shortest river", 1.0),
        ],
    }
    lfs = [LogicalForm(id=f"d{k}", lf=lf, split="train")
           for k, lf in enumerate(pools)]

    client = genclient.MockGeneratorClient(pools, seed=11)
    cfg = genclient.BudgetBuilderConfig(samples_per_lf=8)
    sets = genclient.build_variable_dataset(lfs, cfg, client)

    print(f"budget: 8 samples per LF, {len(lfs)} LFs in, {len(sets)} sets out\n")
    for cs in sets:
        print(f"{cs.lf}")
        for cand in cs.candidates:
            print(f"  drawn {cand.raw_count}x  {cand.text}")
        print(f"  -> {len(cs)} unique from {sum(c.raw_count for c in cs.candidates)} draws\n")
    dropped = {lf.lf for lf in lfs} - {cs.lf for cs in sets}
    print(f"dropped (single unique candidate): {', '.join(sorted(dropped))}\n")

    sizes = [len(cs) for cs in sets]
    weights = reranker.set_size_weights(sizes)
    print("set-size loss weights (mean pinned to 1.0):")
    for size, weight in zip(sizes, weights):
        print(f"  size {size}: weight {weight:.3f}")
    print(f"  mean = {float(np.mean(weights)):.6f}")


if __name__ == "__main__":
    main()
