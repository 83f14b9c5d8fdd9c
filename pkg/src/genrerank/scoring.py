"""Candidate quality scoring: native metrics, external scorers, normalization.

The external scorer wire protocol (version 1):

* On startup the scorer emits a handshake object:
  ``{"hello": true, "name": <metric>, "kind": <kind>, "protocol_version": 1}``.
* Each request is ``{"protocol_version": 1, "kind": <kind>, "items": [...]}``
  where an item is ``{"candidate": str, "reference"?: str, "lf"?: str}``;
  the response is ``{"scores": [float, ...]}`` with exactly one score per item,
  order-aligned. ``external-reference`` scorers receive (reference, candidate)
  pairs and ``external-lf`` scorers receive (lf, candidate) pairs.
* Subprocess transport carries one JSON object per line over stdin/stdout and
  strictly alternates request/response. HTTP transport answers the handshake
  on ``GET /hello`` and scores batches on ``POST /score``.

``python -m genrerank.scoring <metric>`` serves any in-process metric over the
subprocess transport, which is also how the protocol test suite exercises a
live scorer end-to-end.
"""

from __future__ import annotations

import contextlib
import json
import math
import re
import shlex
import subprocess
import sys
import threading
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from genrerank.core import CandidateSet, QualityTable, map_freebase_ids

PROTOCOL_VERSION = 1
SCORER_KINDS = ("native-overlap", "external-reference", "external-lf")


class ScorerProtocolError(RuntimeError):
    """An external scorer broke the wire protocol (or timed out)."""


class DegenerateMetricWarning(UserWarning):
    """A metric produced a constant score vector and carries no information."""


# ---------------------------------------------------------------------------
# Native lexical-overlap metric


def _ngram_counts(tokens: Sequence[str], order: int) -> Counter:
    return Counter(tuple(tokens[i:i + order]) for i in range(len(tokens) - order + 1))


def bleu(candidate: str, reference: str, max_order: int = 4, smooth: bool = False) -> float:
    """Sentence score from clipped n-gram precisions and a brevity penalty.

    Geometric mean of the modified precisions up to ``max_order``, times the
    brevity penalty. Without smoothing, any zero precision makes the score 0;
    with ``smooth`` zero-count orders fall back to add-one precision.
    """
    cand = candidate.split()
    ref = reference.split()
    if not cand:
        raise ValueError("candidate is empty")
    if not ref:
        raise ValueError("reference is empty")

    log_sum = 0.0
    for order in range(1, max_order + 1):
        counts = _ngram_counts(cand, order)
        clipped = _ngram_counts(ref, order)
        matched = sum(min(count, clipped[gram]) for gram, count in counts.items())
        total = max(1, sum(counts.values()))
        if matched == 0:
            if not smooth:
                return 0.0
            precision = 1.0 / (total + 1)
        else:
            precision = matched / total
        log_sum += math.log(precision) / max_order

    if len(cand) >= len(ref):
        brevity = 1.0
    else:
        brevity = math.exp(1.0 - len(ref) / len(cand))
    return brevity * math.exp(log_sum)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def toy_parser_probability(lf: str, candidate: str) -> float:
    """Deterministic in-process stand-in for a parser round-trip probability.

    Longest-common-subsequence F-measure between candidate tokens and the LF's
    keyword tokens (alphanumeric runs, structural symbols dropped), squashed
    into (0, 1). Order sensitive, so reordering a candidate changes the score.
    """
    if not candidate.split():
        raise ValueError("candidate is empty")
    if not lf.split():
        raise ValueError("lf is empty")
    keywords = re.findall(r"[a-z0-9]+", map_freebase_ids(lf).lower())
    cand = [t.lower() for t in candidate.split()]
    lcs = _lcs_length(cand, keywords)
    if lcs == 0 or not keywords:
        fmeasure = 0.0
    else:
        precision = lcs / len(cand)
        recall = lcs / len(keywords)
        fmeasure = 2 * precision * recall / (precision + recall)
    return 1.0 / (1.0 + math.exp(-4.0 * (fmeasure - 0.5)))


# ---------------------------------------------------------------------------
# Scorer specs and clients


@dataclass(frozen=True)
class ScorerSpec:
    """Names a metric, what it compares, and how to reach it.

    ``target`` is the subprocess command line or HTTP base URL for external
    transports; in-process scorers resolve by name instead.
    """

    name: str
    kind: str
    transport: str = "in-process"
    target: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in SCORER_KINDS:
            raise ValueError(f"unknown scorer kind {self.kind!r}; expected one of {SCORER_KINDS}")
        if self.transport not in ("in-process", "subprocess", "http"):
            raise ValueError(f"unknown transport {self.transport!r}")
        if self.transport != "in-process" and not self.target:
            raise ValueError(f"transport {self.transport!r} requires a target")


_IN_PROCESS: dict[str, tuple[str, Callable[[dict], float]]] = {
    "bleu": ("native-overlap", lambda item: bleu(item["candidate"], item["reference"])),
    "toy-parser": ("external-lf", lambda item: toy_parser_probability(item["lf"], item["candidate"])),
}


def make_scorer(metric: str) -> ScorerSpec:
    """Resolve a CLI metric argument: a registered name or ``ext:<cmd-or-url>``."""
    if metric.startswith("ext:"):
        target = metric[len("ext:"):]
        if target.startswith(("http://", "https://")):
            return ScorerSpec(name=target, kind="external-reference", transport="http", target=target)
        return ScorerSpec(name=target, kind="external-reference", transport="subprocess", target=target)
    if metric not in _IN_PROCESS:
        known = ", ".join(sorted(_IN_PROCESS))
        raise ValueError(f"unknown metric {metric!r}; expected one of {known} or ext:<cmd-or-url>")
    kind, _ = _IN_PROCESS[metric]
    return ScorerSpec(name=metric, kind=kind)


def _check_handshake(handshake: dict, where: str) -> dict:
    if not isinstance(handshake, dict) or not handshake.get("hello"):
        raise ScorerProtocolError(f"{where}: expected a handshake object, got {handshake!r}")
    if handshake.get("protocol_version") != PROTOCOL_VERSION:
        raise ScorerProtocolError(
            f"{where}: protocol version {handshake.get('protocol_version')!r}, "
            f"expected {PROTOCOL_VERSION}")
    if handshake.get("kind") not in SCORER_KINDS:
        raise ScorerProtocolError(f"{where}: handshake names unknown kind {handshake.get('kind')!r}")
    return handshake


def _check_scores(payload: dict, expected: int, where: str) -> list[float]:
    if not isinstance(payload, dict) or "scores" not in payload:
        if isinstance(payload, dict) and "error" in payload:
            raise ScorerProtocolError(f"{where}: scorer reported error: {payload['error']}")
        raise ScorerProtocolError(f"{where}: response missing 'scores'")
    scores = payload["scores"]
    if not isinstance(scores, list) or len(scores) != expected:
        got = len(scores) if isinstance(scores, list) else type(scores).__name__
        raise ScorerProtocolError(f"{where}: expected {expected} scores, got {got}")
    try:
        return [float(s) for s in scores]
    except (TypeError, ValueError) as exc:
        raise ScorerProtocolError(f"{where}: non-numeric score in response") from exc


class SubprocessScorer:
    """Line-delimited JSON client for a scorer child process.

    Request and response strictly alternate on the pipe; concurrent callers
    are serialized by an internal lock.
    """

    def __init__(self, command: str | Sequence[str], timeout: float = 120.0):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self._timeout = timeout
        self._lock = threading.Lock()
        try:
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, encoding="utf-8", bufsize=1)
        except OSError as exc:
            raise ScorerProtocolError(f"could not start scorer {argv!r}: {exc}") from exc
        try:
            self.handshake = _check_handshake(self._read(), "handshake")
        except Exception:
            # nobody holds a reference yet, so reap the child here
            self.close()
            raise
        self.name = str(self.handshake.get("name", argv[0]))
        self.kind = str(self.handshake["kind"])

    def _read(self) -> dict:
        timer = threading.Timer(self._timeout, self._proc.kill)
        timer.start()
        try:
            line = self._proc.stdout.readline()
        finally:
            alive = timer.is_alive()
            timer.cancel()
        if not alive:
            raise ScorerProtocolError(f"scorer {self._proc.args!r} timed out after {self._timeout}s")
        if not line:
            raise ScorerProtocolError(f"scorer {self._proc.args!r} closed its pipe")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScorerProtocolError(f"scorer sent invalid JSON: {line!r}") from exc

    def score_batch(self, items: Sequence[dict]) -> list[float]:
        request = {"protocol_version": PROTOCOL_VERSION, "kind": self.kind, "items": list(items)}
        with self._lock:
            try:
                self._proc.stdin.write(json.dumps(request, ensure_ascii=False) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise ScorerProtocolError(f"scorer {self._proc.args!r} pipe broke") from exc
            payload = self._read()
        return _check_scores(payload, len(items), f"scorer {self.name!r}")

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        self._proc.stdin.close()
        self._proc.stdout.close()

    def __enter__(self) -> "SubprocessScorer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class HttpScorer:
    """HTTP client for a scorer service: GET /hello handshake, POST /score batches."""

    def __init__(self, url: str, timeout: float = 120.0):
        import requests

        self._requests = requests
        self._base = url.rstrip("/")
        self._timeout = timeout
        try:
            reply = requests.get(self._base + "/hello", timeout=timeout)
            reply.raise_for_status()
            self.handshake = _check_handshake(reply.json(), self._base)
        except requests.RequestException as exc:
            raise ScorerProtocolError(f"handshake with {self._base} failed: {exc}") from exc
        self.name = str(self.handshake.get("name", self._base))
        self.kind = str(self.handshake["kind"])

    def score_batch(self, items: Sequence[dict]) -> list[float]:
        request = {"protocol_version": PROTOCOL_VERSION, "kind": self.kind, "items": list(items)}
        try:
            reply = self._requests.post(self._base + "/score", json=request, timeout=self._timeout)
            reply.raise_for_status()
            payload = reply.json()
        except self._requests.RequestException as exc:
            raise ScorerProtocolError(f"scorer {self._base} request failed: {exc}") from exc
        except ValueError as exc:
            raise ScorerProtocolError(f"scorer {self._base} sent invalid JSON") from exc
        return _check_scores(payload, len(items), f"scorer {self.name!r}")

    def close(self) -> None:
        pass

    def __enter__(self) -> "HttpScorer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def open_scorer(spec: ScorerSpec, timeout: float = 120.0):
    """Context manager for a ScorerSpec's client; in-process scorers need none."""
    if spec.transport == "in-process":
        return contextlib.nullcontext()
    if spec.transport == "subprocess":
        return SubprocessScorer(spec.target, timeout=timeout)
    if spec.transport == "http":
        return HttpScorer(spec.target, timeout=timeout)
    raise ValueError(f"no client for transport {spec.transport!r}")


def _make_item(spec: ScorerSpec, cs: CandidateSet, candidate_text: str) -> dict:
    item = {"candidate": candidate_text}
    if spec.kind in ("native-overlap", "external-reference"):
        item["reference"] = cs.require_reference()
    if spec.kind == "external-lf":
        item["lf"] = cs.require_lf()
    return item


def score_sets(
    sets: Sequence[CandidateSet],
    scorer: ScorerSpec,
    client=None,
    batch_size: int = 64,
) -> dict[str, tuple[float, ...]]:
    """Score every candidate of every set, returning lf_id -> score vector.

    External scorers are fed fixed-size batches that may span set boundaries;
    callers see one order-aligned vector per set either way.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    items: list[dict] = []
    bounds: list[tuple[str, int]] = []
    for cs in sets:
        for cand in cs.candidates:
            items.append(_make_item(scorer, cs, cand.text))
        bounds.append((cs.lf_id, len(cs)))

    if scorer.transport == "in-process":
        if scorer.name not in _IN_PROCESS:
            raise ValueError(f"no in-process scorer named {scorer.name!r}")
        _, fn = _IN_PROCESS[scorer.name]
        flat = [float(fn(item)) for item in items]
    else:
        own_client = client is None
        if own_client:
            client = open_scorer(scorer)
        try:
            flat = []
            for start in range(0, len(items), batch_size):
                flat.extend(client.score_batch(items[start:start + batch_size]))
        finally:
            if own_client:
                client.close()

    out: dict[str, tuple[float, ...]] = {}
    cursor = 0
    for lf_id, size in bounds:
        out[lf_id] = tuple(flat[cursor:cursor + size])
        cursor += size
    return out


# ---------------------------------------------------------------------------
# Normalization and metric combination


@dataclass(frozen=True)
class NormalizationStats:
    """Mean and population standard deviation fitted to one metric's scores."""

    metric: str
    mean: float
    stddev: float
    degenerate: bool = False

    def __post_init__(self) -> None:
        if self.stddev < 0:
            raise ValueError("stddev must be >= 0")


def fit_normalization(scores: Sequence[float], metric: str = "") -> NormalizationStats:
    """Fit zero-mean/unit-variance stats (population convention) to a score vector."""
    vec = np.asarray(scores, dtype=float)
    if vec.ndim != 1 or vec.size < 2:
        raise ValueError("normalization needs at least 2 scores")
    mean = float(vec.mean())
    # Constancy is judged on the raw values: a constant vector whose mean is
    # not exactly representable would otherwise yield a ~1e-16 stddev and
    # normalize rounding noise up to unit scale.
    if float(vec.max()) == float(vec.min()):
        warnings.warn(
            f"metric {metric or '<unnamed>'} is constant over the set; normalizing to zeros",
            DegenerateMetricWarning, stacklevel=2)
        return NormalizationStats(metric=metric, mean=mean, stddev=0.0, degenerate=True)
    stddev = float(np.sqrt(np.mean((vec - mean) ** 2)))
    return NormalizationStats(metric=metric, mean=mean, stddev=stddev)


def apply_normalization(scores: Sequence[float], stats: NormalizationStats) -> np.ndarray:
    vec = np.asarray(scores, dtype=float)
    if stats.degenerate:
        return np.zeros_like(vec)
    return (vec - stats.mean) / stats.stddev


def combine_metrics(
    per_metric: Mapping[str, Sequence[float]],
    names: Sequence[str] | None = None,
) -> np.ndarray:
    """Sum per-metric score vectors after normalizing each to mean 0, stddev 1.

    Normalization removes scale and shift, so every named metric contributes
    with equal weight; a constant metric contributes zeros.
    """
    if names is None:
        names = sorted(per_metric)
    if not names:
        raise ValueError("no metrics to combine")
    missing = [n for n in names if n not in per_metric]
    if missing:
        raise KeyError(f"missing metrics: {missing}")
    lengths = {len(per_metric[n]) for n in names}
    if len(lengths) != 1:
        raise ValueError(f"metric vectors have mismatched lengths: {sorted(lengths)}")
    combined = np.zeros(lengths.pop(), dtype=float)
    for name in names:
        combined += apply_normalization(per_metric[name], fit_normalization(per_metric[name], name))
    return combined


def combine_quality(
    tables: Mapping[str, QualityTable],
    names: Sequence[str] | None = None,
    scope: str = "set",
) -> dict[str, QualityTable]:
    """Fill each table's combined vector from its per-metric scores.

    ``scope="set"`` normalizes within each candidate set (the reference
    quality used for training rankings); ``scope="corpus"`` fits one set of
    stats per metric over all sets pooled, for corpus-level reports.
    """
    if scope not in ("set", "corpus"):
        raise ValueError(f"unknown normalization scope {scope!r}")
    out: dict[str, QualityTable] = {}
    if scope == "set":
        for lf_id, table in tables.items():
            combined = combine_metrics(table.per_metric, names)
            out[lf_id] = QualityTable(lf_id=lf_id, per_metric=table.per_metric,
                                      combined=tuple(combined))
        return out

    wanted = list(names) if names is not None else sorted(
        {m for t in tables.values() for m in t.per_metric})
    pooled = {name: np.concatenate([np.asarray(t.per_metric[name], dtype=float)
                                    for t in tables.values()])
              for name in wanted}
    stats = {name: fit_normalization(pooled[name], name) for name in wanted}
    for lf_id, table in tables.items():
        combined = np.zeros(table.size(), dtype=float)
        for name in wanted:
            combined += apply_normalization(table.per_metric[name], stats[name])
        out[lf_id] = QualityTable(lf_id=lf_id, per_metric=table.per_metric,
                                  combined=tuple(combined))
    return out


# ---------------------------------------------------------------------------
# Subprocess-transport server for the in-process metrics


def serve_stdio(metric: str, stdin=None, stdout=None) -> None:
    """Serve one in-process metric over the line-delimited wire protocol."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    kind, fn = _IN_PROCESS[metric]

    def emit(obj: dict) -> None:
        stdout.write(json.dumps(obj, ensure_ascii=False) + "\n")
        stdout.flush()

    emit({"hello": True, "name": metric, "kind": kind, "protocol_version": PROTOCOL_VERSION})
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
            items = request["items"]
            if request.get("protocol_version") != PROTOCOL_VERSION:
                raise ValueError(f"bad protocol_version {request.get('protocol_version')!r}")
            emit({"scores": [float(fn(item)) for item in items]})
        except Exception as exc:  # malformed request: report, keep the connection
            emit({"error": str(exc)})


if __name__ == "__main__":  # pragma: no cover - exercised via subprocess tests
    if len(sys.argv) != 2 or sys.argv[1] not in _IN_PROCESS:
        print(f"usage: python -m genrerank.scoring {{{'|'.join(sorted(_IN_PROCESS))}}}",
              file=sys.stderr)
        sys.exit(1)
    serve_stdio(sys.argv[1])
