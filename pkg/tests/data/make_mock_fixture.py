"""Build the bundled 20-LF mock fixture (dataset + generator pools).

Run from the repository root:

    python3 tests/data/make_mock_fixture.py

Writes src/genrerank/data/mock_fixture.json. The fixture is frozen; rerun
only when deliberately changing the shipped demo data.
"""

import json
from pathlib import Path

# (id, lf, reference, split, entity word in the reference)
ROWS = [
    ("g01", "answer ( population ( stateid ( 'texas' ) ) )",
     "what is the population of texas", "train", "texas"),
    ("g02", "answer ( capital ( stateid ( 'ohio' ) ) )",
     "what is the capital of ohio", "train", "ohio"),
    ("g03", "answer ( count ( state ( next_to ( stateid ( 'iowa' ) ) ) ) )",
     "how many states border iowa", "train", "iowa"),
    ("g04", "answer ( largest ( city ( loc_2 ( stateid ( 'kansas' ) ) ) ) )",
     "what is the largest city in kansas", "train", "kansas"),
    ("g05", "answer ( river ( loc_2 ( stateid ( 'oregon' ) ) ) )",
     "which rivers run through oregon", "train", "oregon"),
    ("g06", "answer ( smallest ( state ( loc_2 ( countryid ( 'usa' ) ) ) ) )",
     "what is the smallest state in the usa", "train", "usa"),
    ("g07", "answer ( len ( riverid ( 'colorado' ) ) )",
     "how long is the colorado river", "train", "colorado"),
    ("g08", "answer ( elevation_1 ( placeid ( 'mount whitney' ) ) )",
     "how high is mount whitney", "train", "whitney"),
    ("g09", "answer ( count ( city ( loc_2 ( stateid ( 'montana' ) ) ) ) )",
     "how many cities are in montana", "train", "montana"),
    ("g10", "answer ( density_1 ( stateid ( 'maine' ) ) )",
     "what is the population density of maine", "train", "maine"),
    ("g11", "answer ( high_point_1 ( stateid ( 'nevada' ) ) )",
     "what is the highest point in nevada", "train", "nevada"),
    ("g12", "answer ( major ( lake ( loc_2 ( stateid ( 'michigan' ) ) ) ) )",
     "which major lakes are in michigan", "train", "michigan"),
    ("g13", "answer ( state ( next_to ( stateid ( 'utah' ) ) ) )",
     "which states border utah", "dev", "utah"),
    ("g14", "answer ( population ( cityid ( 'seattle' , 'wa' ) ) )",
     "what is the population of seattle", "dev", "seattle"),
    ("g15", "answer ( longest ( river ( loc_2 ( stateid ( 'idaho' ) ) ) ) )",
     "what is the longest river in idaho", "dev", "idaho"),
    ("g16", "answer ( area_1 ( stateid ( 'alaska' ) ) )",
     "what is the area of alaska", "dev", "alaska"),
    ("g17", "answer ( capital ( stateid ( 'georgia' ) ) )",
     "what is the capital of georgia", "test", "georgia"),
    ("g18", "answer ( count ( river ( loc_2 ( stateid ( 'vermont' ) ) ) ) )",
     "how many rivers are in vermont", "test", "vermont"),
    ("g19", "answer ( largest ( state ( next_to ( stateid ( 'oregon' ) ) ) ) )",
     "what is the largest state bordering oregon", "test", "oregon"),
    ("g20", "answer ( lowest ( place ( loc_2 ( stateid ( 'florida' ) ) ) ) )",
     "what is the lowest point in florida", "test", "florida"),
]

DECOY_ENTITIES = {"texas": "maine", "ohio": "utah", "iowa": "kansas", "kansas": "iowa",
                  "oregon": "nevada", "usa": "ohio", "colorado": "snake", "whitney": "hood",
                  "montana": "georgia", "maine": "texas", "nevada": "oregon",
                  "michigan": "florida", "utah": "ohio", "seattle": "portland",
                  "idaho": "montana", "alaska": "texas", "georgia": "montana",
                  "vermont": "maine", "florida": "michigan"}


def variants(reference: str, entity: str) -> list[tuple[str, float]]:
    words = reference.split()
    pool = [(reference, 3.0)]
    pool.append(("tell me " + " ".join(words[1:] if words[0] in ("what", "which", "how") else words), 2.0))
    pool.append((reference + " exactly", 1.5))
    mid = len(words) // 2
    pool.append((" ".join(words[:mid] + words[mid + 1:]), 1.0))
    swapped = words[:]
    swapped[mid - 1], swapped[mid] = swapped[mid], swapped[mid - 1]
    pool.append((" ".join(swapped), 1.0))
    pool.append((reference.replace(entity, DECOY_ENTITIES[entity]), 1.0))
    # Drop accidental duplicates while keeping first-seen weights.
    seen = {}
    for text, weight in pool:
        if text and text not in seen:
            seen[text] = weight
    return [[t, w] for t, w in seen.items()]


def main() -> None:
    dataset = [{"id": rid, "lf": lf, "reference": ref, "split": split}
               for rid, lf, ref, split, _ in ROWS]
    pools = {lf: variants(ref, entity) for _, lf, ref, _, entity in ROWS}
    out = Path(__file__).resolve().parents[2] / "src" / "genrerank" / "data" / "mock_fixture.json"
    with open(out, "w", encoding="utf-8") as fh:
        json.dump({"dataset": dataset, "pools": pools}, fh, indent=1, ensure_ascii=False,
                  sort_keys=True)
        fh.write("\n")
    sizes = [len(v) for v in pools.values()]
    print(f"wrote {out}: {len(dataset)} LFs, pool sizes {min(sizes)}..{max(sizes)}")


if __name__ == "__main__":
    main()
