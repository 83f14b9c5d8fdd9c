/**
 * Scorer implementations behind the protocol.
 *
 * Every metric here is a deterministic lexical stand-in with the same name,
 * kind, and output orientation as the heavyweight model it fills in for, so
 * pipelines can be wired and tested without downloading any weights. A real
 * model backend drops in by implementing `Scorer` and registering it; the
 * `model` argument is the identifier or path such a backend would load.
 */

import type { Item, Scorer, ScorerKind } from './protocol.js';

function tokens(text: string): string[] {
  return text.toLowerCase().split(/\s+/).filter(Boolean);
}

function requireTokens(text: string, what: string): string[] {
  const toks = tokens(text);
  if (toks.length === 0) {
    throw new Error(`${what} is empty`);
  }
  return toks;
}

function counts(items: string[]): Map<string, number> {
  const out = new Map<string, number>();
  for (const item of items) {
    out.set(item, (out.get(item) ?? 0) + 1);
  }
  return out;
}

/** Sum over `a` of per-type matches clipped to the count in `b`. */
function clippedMatches(a: string[], b: string[]): number {
  const have = counts(b);
  let matched = 0;
  for (const [token, count] of counts(a)) {
    matched += Math.min(count, have.get(token) ?? 0);
  }
  return matched;
}

function charNgrams(text: string, n: number): Map<string, number> {
  const squashed = text.toLowerCase().replace(/\s+/g, ' ').trim();
  const grams: string[] = [];
  for (let i = 0; i + n <= squashed.length; i++) {
    grams.push(squashed.slice(i, i + n));
  }
  return counts(grams);
}

function cosine(a: Map<string, number>, b: Map<string, number>): number {
  let dot = 0;
  for (const [gram, count] of a) {
    dot += count * (b.get(gram) ?? 0);
  }
  if (dot === 0) {
    return 0;
  }
  let normA = 0;
  let normB = 0;
  for (const count of a.values()) normA += count * count;
  for (const count of b.values()) normB += count * count;
  return dot / Math.sqrt(normA * normB);
}

function harmonic(p: number, r: number): number {
  return p + r === 0 ? 0 : (2 * p * r) / (p + r);
}

/** Character-bigram Dice coefficient between two tokens. */
function diceBigrams(a: string, b: string): number {
  if (a === b) {
    return 1;
  }
  if (a.length < 2 || b.length < 2) {
    return 0;
  }
  const bigrams = (s: string) => {
    const out: string[] = [];
    for (let i = 0; i + 2 <= s.length; i++) out.push(s.slice(i, i + 2));
    return out;
  };
  const gramsA = bigrams(a);
  const gramsB = bigrams(b);
  return (2 * clippedMatches(gramsA, gramsB)) / (gramsA.length + gramsB.length);
}

function lcsLength(a: string[], b: string[]): number {
  if (a.length === 0 || b.length === 0) {
    return 0;
  }
  let prev = new Array<number>(b.length + 1).fill(0);
  for (const x of a) {
    const cur = [0];
    for (let j = 1; j <= b.length; j++) {
      cur.push(x === b[j - 1] ? prev[j - 1] + 1 : Math.max(prev[j], cur[j - 1]));
    }
    prev = cur;
  }
  return prev[b.length];
}

function pair(item: Item): [string[], string[]] {
  const cand = requireTokens(item.candidate, 'candidate');
  const ref = requireTokens(item.reference ?? '', 'reference');
  return [cand, ref];
}

// --------------------------------------------------------------------------
// Reference-comparing metrics. Higher is better for all of them; the
// log-likelihood shaped ones top out at 0, the similarity shaped ones at 1.

/** Regression-style semantic similarity in [0, 1]. */
function bleurtScore(item: Item): number {
  const [cand, ref] = pair(item);
  const matched = clippedMatches(cand, ref);
  const f1 = harmonic(matched / cand.length, matched / ref.length);
  const chars = cosine(charNgrams(item.candidate, 3), charNgrams(item.reference ?? '', 3));
  return 0.6 * f1 + 0.4 * chars;
}

/** Symmetric paraphrase log-likelihood in (-inf, 0], length normalized. */
function prismScore(item: Item): number {
  const [cand, ref] = pair(item);
  const direction = (x: string[], y: string[]) =>
    Math.log((clippedMatches(x, y) + 0.5) / (x.length + 0.5));
  return (direction(cand, ref) + direction(ref, cand)) / 2;
}

/** Greedy soft token alignment F-measure in [0, 1]. */
function bertscoreScore(item: Item): number {
  const [cand, ref] = pair(item);
  const best = (xs: string[], ys: string[]) => {
    let total = 0;
    for (const x of xs) {
      let top = 0;
      for (const y of ys) {
        const sim = diceBigrams(x, y);
        if (sim > top) top = sim;
      }
      total += top;
    }
    return total / xs.length;
  };
  return harmonic(best(cand, ref), best(ref, cand));
}

/** Conditional generation log-likelihood in (-inf, 0], length normalized. */
function bartscoreScore(item: Item): number {
  const [cand, ref] = pair(item);
  const unigrams = new Set(ref);
  const bigrams = new Set<string>();
  let prev = '<s>';
  for (const token of ref) {
    bigrams.add(prev + '' + token);
    prev = token;
  }
  let logSum = 0;
  prev = '<s>';
  for (const token of cand) {
    const p =
      0.7 * (bigrams.has(prev + '' + token) ? 1 : 0) +
      0.25 * (unigrams.has(token) ? 1 : 0) +
      0.05;
    logSum += Math.log(p);
    prev = token;
  }
  return logSum / cand.length;
}

// --------------------------------------------------------------------------
// LF-conditioned parser probability

/**
 * Probability in (0, 1] that the candidate would parse back to the LF.
 * Order-sensitive: LCS F-measure between candidate tokens and the LF's
 * keyword tokens (alphanumeric runs; structural symbols dropped).
 */
function parserProbability(item: Item): number {
  const cand = requireTokens(item.candidate, 'candidate');
  const keywords = (item.lf ?? '').toLowerCase().match(/[a-z0-9]+/g) ?? [];
  if (keywords.length === 0) {
    throw new Error('lf has no keyword tokens');
  }
  const lcs = lcsLength(cand, keywords);
  const f = lcs === 0 ? 0 : harmonic(lcs / cand.length, lcs / keywords.length);
  return 0.02 + 0.98 * f;
}

// --------------------------------------------------------------------------

interface Backend {
  kind: ScorerKind;
  score: (item: Item) => number;
}

const BACKENDS: Record<string, Backend> = {
  bleurt: { kind: 'external-reference', score: bleurtScore },
  prism: { kind: 'external-reference', score: prismScore },
  bertscore: { kind: 'external-reference', score: bertscoreScore },
  bartscore: { kind: 'external-reference', score: bartscoreScore },
  'parser-prob': { kind: 'external-lf', score: parserProbability },
};

export function metricNames(): string[] {
  return Object.keys(BACKENDS).sort();
}

export function createScorer(name: string, model?: string): Scorer {
  const backend = BACKENDS[name];
  if (!backend) {
    throw new Error(`unknown metric '${name}'; available: ${metricNames().join(', ')}`);
  }
  if (model !== undefined && typeof model !== 'string') {
    throw new Error('model must be a string identifier or path');
  }
  return { name, kind: backend.kind, score: backend.score };
}
