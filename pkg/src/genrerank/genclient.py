"""Candidate generation: few-shot prompts, an LLM API client with a seeded
mock twin, dedup-until-n sampling, and the fixed-budget variable-set builder."""

from __future__ import annotations

import hashlib
import json
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from genrerank.core import Candidate, CandidateSet, DatasetError, LogicalForm


class GeneratorError(RuntimeError):
    """The generator endpoint failed after the retry policy was exhausted."""


@dataclass(frozen=True)
class Completion:
    text: str
    token_logprobs: tuple[float, ...]


def mean_token_logprob(token_logprobs: Sequence[float]) -> float:
    """Arithmetic mean of per-token log-probabilities."""
    if len(token_logprobs) == 0:
        raise ValueError("token_logprobs is empty")
    return math.fsum(token_logprobs) / len(token_logprobs)


# ---------------------------------------------------------------------------
# Prompts


@dataclass(frozen=True)
class PromptTemplate:
    """Few-shot prompt layout: a banner line, then input/output exemplar pairs.

    ``exemplar_format`` renders one pair and must mention both {input} and
    {output}; the trailing unanswered slot reuses it with an empty output.
    """

    header: str
    exemplar_format: str = "Query: {input}\nQuestion: {output}"
    num_exemplars: int = 15

    def __post_init__(self) -> None:
        if self.num_exemplars < 1:
            raise ValueError("num_exemplars must be >= 1")
        if "{input}" not in self.exemplar_format or "{output}" not in self.exemplar_format:
            raise ValueError("exemplar_format must contain {input} and {output}")

    @classmethod
    def paired(cls, dataset_name: str, num_exemplars: int = 15) -> "PromptTemplate":
        return cls(header=f"# {dataset_name} Dataset:", num_exemplars=num_exemplars)

    @classmethod
    def instruction(cls, task_description: str, num_exemplars: int = 15) -> "PromptTemplate":
        """Chat-style variant: a plain-language instruction above the pairs."""
        return cls(header=task_description,
                   exemplar_format="Q: {input}\nA: {output}",
                   num_exemplars=num_exemplars)


def build_prompt(lf: LogicalForm, exemplars: Sequence[LogicalForm],
                 template: PromptTemplate) -> str:
    """Render a few-shot prompt ending in the target LF's unanswered slot."""
    if len(exemplars) < template.num_exemplars:
        raise ValueError(f"need {template.num_exemplars} exemplars, only {len(exemplars)} available")
    chosen = exemplars[: template.num_exemplars]
    for ex in chosen:
        if ex.id == lf.id:
            raise ValueError(f"exemplar {ex.id!r} is the target LF itself")
    blocks = [template.header, ""]
    for ex in chosen:
        blocks.append(template.exemplar_format.format(input=ex.lf, output=ex.require_reference()))
        blocks.append("")
    blocks.append(template.exemplar_format.format(input=lf.lf, output="").rstrip(" "))
    return "\n".join(blocks)


def target_lf_from_prompt(prompt: str) -> str:
    """Recover the target LF from a prompt's trailing unanswered input line.

    The mock client keys its candidate pools by LF text, so it reads the LF
    back out of whatever prompt it is handed; this keeps its call signature
    identical to the HTTP client's.
    """
    for line in reversed(prompt.splitlines()):
        if not line.strip():
            continue
        label, sep, rest = line.partition(":")
        lf = rest.strip() if sep else line.strip()
        if lf:
            return lf
        # An empty "<label>:" line is the unanswered output slot; keep walking.
    raise ValueError("prompt contains no LF line")


# ---------------------------------------------------------------------------
# Clients


@dataclass(frozen=True)
class GeneratorConfig:
    endpoint: str = "mock"
    temperature: float = 0.7
    max_attempts: int | None = None
    target_n: int = 8
    seed: int = 0
    max_tokens: int = 128

    def __post_init__(self) -> None:
        if not (0.0 <= self.temperature <= 2.0):
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.target_n < 1:
            raise ValueError("target_n must be >= 1")
        if self.max_attempts is not None and self.max_attempts < self.target_n:
            raise ValueError("max_attempts must be >= target_n")

    @property
    def attempts_cap(self) -> int:
        # Total raw samples drawn before giving up; 5x the target by default.
        return self.max_attempts if self.max_attempts is not None else 5 * self.target_n


def _stable_u64(*parts: str) -> int:
    digest = hashlib.blake2b("\x1f".join(parts).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


class MockGeneratorClient:
    """Seeded stand-in for the LLM endpoint.

    Samples from a per-LF candidate pool (optionally weighted) and reports
    synthetic token log-probabilities that are a pure function of (lf, text).
    Each LF gets its own RNG stream derived from (seed, lf), so concurrent
    generation for different LFs cannot perturb reproducibility.
    """

    def __init__(self, pools: Mapping[str, Sequence[str] | Sequence[tuple[str, float]]],
                 seed: int = 0):
        self._pools: dict[str, tuple[tuple[str, ...], np.ndarray]] = {}
        for lf, pool in pools.items():
            if not pool:
                raise ValueError(f"empty candidate pool for LF {lf!r}")
            if isinstance(pool[0], tuple):
                texts = tuple(t for t, _ in pool)
                weights = np.array([w for _, w in pool], dtype=np.float64)
            else:
                texts = tuple(pool)
                weights = np.ones(len(pool))
            if (weights <= 0).any():
                raise ValueError(f"pool weights for LF {lf!r} must be positive")
            self._pools[lf] = (texts, weights / weights.sum())
        self.seed = seed
        self._streams: dict[str, np.random.Generator] = {}
        self._lock = threading.Lock()

    def _stream(self, lf: str) -> np.random.Generator:
        with self._lock:
            if lf not in self._streams:
                self._streams[lf] = np.random.default_rng((self.seed, _stable_u64(lf)))
            return self._streams[lf]

    def _logprobs(self, lf: str, text: str) -> tuple[float, ...]:
        h = _stable_u64(lf, text)
        base = -(0.1 + (h % 4000) / 1000.0)
        out = []
        for pos in range(max(1, len(text.split()))):
            jitter = (((h >> (pos % 48)) & 15) - 7.5) / 60.0
            out.append(base + jitter)
        return tuple(out)

    def complete(self, prompt: str, n: int = 1, temperature: float = 0.7,
                 max_tokens: int = 128) -> list[Completion]:
        lf = target_lf_from_prompt(prompt)
        if lf not in self._pools:
            raise GeneratorError(f"mock has no candidate pool for LF {lf!r}")
        texts, weights = self._pools[lf]
        stream = self._stream(lf)
        with self._lock:
            picks = stream.choice(len(texts), size=n, p=weights)
        return [Completion(texts[i], self._logprobs(lf, texts[i])) for i in picks]


class CyclingClient:
    """Mock that replays a fixed emission sequence per LF, for scripted tests."""

    def __init__(self, scripts: Mapping[str, Sequence[str]]):
        self._scripts = {lf: tuple(seq) for lf, seq in scripts.items()}
        self._cursor: dict[str, int] = {}
        self._lock = threading.Lock()

    def complete(self, prompt: str, n: int = 1, temperature: float = 0.7,
                 max_tokens: int = 128) -> list[Completion]:
        lf = target_lf_from_prompt(prompt)
        if lf not in self._scripts:
            raise GeneratorError(f"no script for LF {lf!r}")
        seq = self._scripts[lf]
        with self._lock:
            start = self._cursor.get(lf, 0)
            self._cursor[lf] = start + n
        out = []
        for k in range(start, start + n):
            text = seq[k % len(seq)]
            out.append(Completion(text, (-1.0,) * max(1, len(text.split()))))
        return out


class HttpGeneratorClient:
    """Thin JSON-over-HTTP client with bounded exponential backoff.

    Request: {prompt, temperature, max_tokens, n};
    response: {"choices": [{"text": ..., "token_logprobs": [...]}, ...]}.
    """

    def __init__(self, endpoint: str, auth_token: str | None = None,
                 timeout: float = 60.0, max_retries: int = 4, backoff: float = 0.5):
        import requests

        self.endpoint = endpoint
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self._session = requests.Session()
        if auth_token:
            self._session.headers["Authorization"] = f"Bearer {auth_token}"

    def complete(self, prompt: str, n: int = 1, temperature: float = 0.7,
                 max_tokens: int = 128) -> list[Completion]:
        import requests

        payload = {"prompt": prompt, "temperature": temperature,
                   "max_tokens": max_tokens, "n": n}
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(min(30.0, self.backoff * 2 ** (attempt - 1)))
            try:
                resp = self._session.post(self.endpoint, json=payload, timeout=self.timeout)
                if resp.status_code >= 500:
                    last_error = GeneratorError(f"{self.endpoint} returned {resp.status_code}")
                    continue
                resp.raise_for_status()
                body = resp.json()
                return [Completion(str(c["text"]), tuple(float(x) for x in c["token_logprobs"]))
                        for c in body["choices"]]
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = exc
            except (KeyError, TypeError, ValueError) as exc:
                raise GeneratorError(f"malformed response from {self.endpoint}: {exc}") from exc
        raise GeneratorError(f"generator unreachable after {self.max_retries + 1} attempts: {last_error}")


def make_client(cfg: GeneratorConfig,
                pools: Mapping[str, Sequence] | None = None,
                auth_token: str | None = None):
    if cfg.endpoint == "mock":
        if pools is None:
            raise ValueError("mock endpoint needs candidate pools")
        return MockGeneratorClient(pools, seed=cfg.seed)
    return HttpGeneratorClient(cfg.endpoint, auth_token=auth_token)


# ---------------------------------------------------------------------------
# Sampling loops


def generate_until_unique(lf: LogicalForm, cfg: GeneratorConfig, client,
                          prompt: str | Callable[[int], str] | None = None) -> CandidateSet:
    """Sample until cfg.target_n distinct texts are collected.

    Duplicates are exact string matches after trimming trailing whitespace;
    each duplicate bumps the first occurrence's raw_count, and the sum of
    raw_counts equals the number of samples drawn. If the attempts cap lands
    first, whatever distinct texts exist are returned with truncated=True.
    ``prompt`` may be a string fixed for the whole LF or a callable receiving
    the attempt index, for callers that redraw exemplars between attempts.
    """
    if callable(prompt):
        prompt_for = prompt
    else:
        fixed = prompt if prompt is not None else f"Query: {lf.lf}\nQuestion:"
        prompt_for = lambda attempt: fixed

    order: list[str] = []
    counts: dict[str, int] = {}
    logprobs: dict[str, float] = {}
    drawn = 0
    while len(order) < cfg.target_n and drawn < cfg.attempts_cap:
        want = min(cfg.target_n - len(order), cfg.attempts_cap - drawn)
        for completion in client.complete(prompt_for(drawn), n=want,
                                          temperature=cfg.temperature,
                                          max_tokens=cfg.max_tokens):
            drawn += 1
            text = completion.text.rstrip()
            if not text:
                raise GeneratorError(f"generator produced empty text for LF {lf.id!r}")
            if text in counts:
                counts[text] += 1
            else:
                order.append(text)
                counts[text] = 1
                logprobs[text] = mean_token_logprob(completion.token_logprobs)
    if not order:
        raise GeneratorError(f"no candidates produced for LF {lf.id!r}")
    candidates = tuple(Candidate(t, raw_count=counts[t], gen_logprob=logprobs[t]) for t in order)
    return CandidateSet(lf_id=lf.id, candidates=candidates, lf=lf.lf, reference=lf.reference,
                        truncated=len(order) < cfg.target_n)


def generate_corpus(lfs: Sequence[LogicalForm], cfg: GeneratorConfig, client,
                    exemplar_pool: Sequence[LogicalForm] = (),
                    template: PromptTemplate | None = None,
                    workers: int = 1) -> list[CandidateSet]:
    """generate_until_unique over many LFs, optionally in parallel.

    Exemplars are drawn once per LF from a stream seeded by (cfg.seed, index),
    so the output is identical whatever the worker count.
    """

    def prompt_for(index: int, lf: LogicalForm) -> str | None:
        if template is None:
            return None
        rng = np.random.default_rng((cfg.seed, index))
        pool = [ex for ex in exemplar_pool if ex.id != lf.id]
        if len(pool) < template.num_exemplars:
            raise ValueError(f"LF {lf.id!r}: exemplar pool has {len(pool)} usable entries, "
                             f"template needs {template.num_exemplars}")
        picked = [pool[i] for i in rng.choice(len(pool), size=template.num_exemplars, replace=False)]
        return build_prompt(lf, picked, template)

    def one(index_lf: tuple[int, LogicalForm]) -> CandidateSet:
        index, lf = index_lf
        return generate_until_unique(lf, cfg, client, prompt=prompt_for(index, lf))

    items = list(enumerate(lfs))
    if workers <= 1:
        return [one(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, items))


@dataclass(frozen=True)
class BudgetBuilderConfig:
    samples_per_lf: int = 10
    min_unique: int = 2
    wall_clock_budget: float | None = None

    def __post_init__(self) -> None:
        if self.min_unique < 2:
            raise ValueError("min_unique must be >= 2")
        if self.samples_per_lf < self.min_unique:
            raise ValueError("samples_per_lf must be >= min_unique")
        if self.wall_clock_budget is not None and self.wall_clock_budget <= 0:
            raise ValueError("wall_clock_budget must be positive seconds")


def build_variable_dataset(lfs: Sequence[LogicalForm], cfg: BudgetBuilderConfig, client,
                           gen_cfg: GeneratorConfig | None = None,
                           workers: int = 1) -> list[CandidateSet]:
    """Fixed-budget builder: draw samples_per_lf samples per LF, dedup, and
    drop any LF left with fewer than min_unique distinct candidates.

    Emitted set sizes always lie in [min_unique, samples_per_lf]. Stops early
    (skipping remaining LFs) once wall_clock_budget seconds have elapsed.
    """
    base = gen_cfg or GeneratorConfig()
    per_lf = GeneratorConfig(endpoint=base.endpoint, temperature=base.temperature,
                             max_attempts=cfg.samples_per_lf, target_n=cfg.samples_per_lf,
                             seed=base.seed, max_tokens=base.max_tokens)
    started = time.monotonic()

    def expired() -> bool:
        return (cfg.wall_clock_budget is not None
                and time.monotonic() - started >= cfg.wall_clock_budget)

    def one(lf: LogicalForm) -> CandidateSet | None:
        cs = generate_until_unique(lf, per_lf, client)
        return cs if len(cs) >= cfg.min_unique else None

    results: list[CandidateSet | None] = []
    if workers <= 1:
        for lf in lfs:
            if expired():
                break
            results.append(one(lf))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = []
            for lf in lfs:
                if expired():
                    break
                futures.append(pool.submit(one, lf))
            results = [f.result() for f in futures]
    kept = [cs for cs in results if cs is not None]
    if not kept:
        raise DatasetError("budget build produced no candidate sets of usable size")
    return kept


def mean_set_size(sets: Sequence[CandidateSet]) -> float:
    if not sets:
        raise ValueError("no sets")
    return sum(len(cs) for cs in sets) / len(sets)


@dataclass(frozen=True)
class MockFixture:
    """The bundled 20-LF demo corpus: dataset rows plus mock candidate pools."""

    dataset: tuple[LogicalForm, ...]
    pools: Mapping[str, Sequence[tuple[str, float]]]


def load_mock_fixture() -> MockFixture:
    from importlib import resources

    raw = json.loads(resources.files("genrerank").joinpath("data/mock_fixture.json")
                     .read_text(encoding="utf-8"))
    dataset = tuple(
        LogicalForm(id=row["id"], lf=row["lf"], reference=row.get("reference"),
                    split=row["split"])
        for row in raw["dataset"])
    pools = {lf: [(str(t), float(w)) for t, w in pool] for lf, pool in raw["pools"].items()}
    return MockFixture(dataset=dataset, pools=pools)
