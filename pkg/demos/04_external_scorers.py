"""Scoring through the wire protocol instead of in process.

Any executable that speaks the line-delimited JSON protocol can serve a
metric: the package's own metrics can be re-served over stdio (handy for
testing the plumbing), and the TypeScript sidecar exposes its scorers the
same way. Swapping a metric never changes pipeline code, just the scorer
string: "bleu" -> "ext:<command>" -> "ext:http://host:port".

    python3 demos/04_external_scorers.py
"""

import shutil
import sys
from pathlib import Path

from genrerank import scoring

ITEMS = [
    {"candidate": "what rivers run through colorado",
     "reference": "what rivers run through colorado"},
    {"candidate": "name the rivers of colorado",
     "reference": "what rivers run through colorado"},
    {"candidate": "how tall is the governor",
     "reference": "what rivers run through colorado"},
]


def show(name, scores):
    print(f"{name}:")
    for item, value in zip(ITEMS, scores):
        print(f"  {value:+.4f}  {item['candidate']}")
    print()


def main():
    # the bundled bleu metric, served by a child process of this very package
    command = f"{sys.executable} -m genrerank.scoring bleu"
    spec = scoring.make_scorer(f"ext:{command}")
    with scoring.open_scorer(spec) as client:
        print(f"handshake: {client.handshake}\n")
        show("bleu over stdio", client.score_batch(ITEMS))

    # the sidecar's scorers, if it has been built (cd sidecar && npm install && npm test)
    sidecar = Path(__file__).resolve().parents[1] / "sidecar" / "dist" / "main.js"
    if not sidecar.exists() or shutil.which("node") is None:
        print("sidecar not built; skipping its metrics")
        return
    for metric in ("bleurt", "bertscore", "prism"):
        spec = scoring.make_scorer(f"ext:node {sidecar} --stdio {metric}")
        with scoring.open_scorer(spec) as client:
            show(f"{metric} via sidecar", client.score_batch(ITEMS))


if __name__ == "__main__":
    main()
