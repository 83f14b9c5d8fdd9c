/**
 * Wire protocol, version 1.
 *
 * The client starts the sidecar, reads one handshake line, then alternates
 * requests and replies. One JSON object per line in both directions:
 *
 *   handshake  {"hello": true, "name": ..., "kind": ..., "protocol_version": 1}
 *   request    {"protocol_version": 1, "items": [{"candidate", "reference"?, "lf"?}]}
 *   reply      {"scores": [...]} with exactly one finite number per item,
 *              or {"error": "..."} after which the connection stays usable.
 */

export const PROTOCOL_VERSION = 1;

export type ScorerKind = 'external-reference' | 'external-lf';

export interface Item {
  candidate: string;
  reference?: string;
  lf?: string;
}

export interface Scorer {
  readonly name: string;
  readonly kind: ScorerKind;
  score(item: Item): number;
}

export interface Handshake {
  hello: true;
  name: string;
  kind: ScorerKind;
  protocol_version: number;
}

export type Reply = { scores: number[] } | { error: string };

export function handshake(scorer: Scorer): Handshake {
  return {
    hello: true,
    name: scorer.name,
    kind: scorer.kind,
    protocol_version: PROTOCOL_VERSION,
  };
}

function scoreItem(scorer: Scorer, item: unknown): number {
  if (typeof item !== 'object' || item === null || Array.isArray(item)) {
    throw new Error('item must be an object');
  }
  const it = item as Item;
  if (typeof it.candidate !== 'string') {
    throw new Error('item needs a candidate string');
  }
  if (scorer.kind === 'external-reference' && typeof it.reference !== 'string') {
    throw new Error('item needs a reference string');
  }
  if (scorer.kind === 'external-lf' && typeof it.lf !== 'string') {
    throw new Error('item needs an lf string');
  }
  const value = scorer.score(it);
  // JSON.stringify turns NaN/Infinity into null, which would desync the client
  if (!Number.isFinite(value)) {
    throw new Error(`non-finite score for candidate ${JSON.stringify(it.candidate)}`);
  }
  return value;
}

/** Score one parsed request. Never throws; bad input becomes an error reply. */
export function handleRequest(scorer: Scorer, raw: unknown): Reply {
  try {
    if (typeof raw !== 'object' || raw === null || Array.isArray(raw)) {
      throw new Error('request must be a JSON object');
    }
    const request = raw as Record<string, unknown>;
    if (request.protocol_version !== PROTOCOL_VERSION) {
      throw new Error(`bad protocol_version ${JSON.stringify(request.protocol_version)}`);
    }
    if (!Array.isArray(request.items)) {
      throw new Error('request needs an items array');
    }
    return { scores: request.items.map((item) => scoreItem(scorer, item)) };
  } catch (err) {
    return { error: err instanceof Error ? err.message : String(err) };
  }
}

/** One input line to one reply line; blank lines produce null (no reply). */
export function handleLine(scorer: Scorer, line: string): string | null {
  if (!line.trim()) {
    return null;
  }
  let parsed: unknown;
  try {
    parsed = JSON.parse(line);
  } catch {
    const shown = line.length > 120 ? line.slice(0, 120) + '...' : line;
    return JSON.stringify({ error: `invalid JSON: ${shown}` });
  }
  return JSON.stringify(handleRequest(scorer, parsed));
}
