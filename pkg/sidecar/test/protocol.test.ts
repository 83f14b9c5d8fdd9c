import { describe, expect, it } from 'vitest';

import { createScorer } from '../src/metrics.js';
import {
  PROTOCOL_VERSION,
  handleLine,
  handleRequest,
  handshake,
  type Scorer,
} from '../src/protocol.js';

const scorer = createScorer('bleurt');

function request(items: unknown[], version: unknown = PROTOCOL_VERSION) {
  return { protocol_version: version, items };
}

const GOOD_ITEM = { candidate: 'a b c d', reference: 'a b c d' };

describe('handshake', () => {
  it('echoes name, kind, and version', () => {
    expect(handshake(scorer)).toEqual({
      hello: true,
      name: 'bleurt',
      kind: 'external-reference',
      protocol_version: 1,
    });
  });
});

describe('handleRequest', () => {
  it('returns one score per item, order aligned', () => {
    const items = [
      GOOD_ITEM,
      { candidate: 'x y', reference: 'a b c d' },
      { candidate: 'a b', reference: 'a b c d' },
    ];
    const reply = handleRequest(scorer, request(items));
    expect('scores' in reply && reply.scores.length).toBe(3);
    const scores = (reply as { scores: number[] }).scores;
    expect(scores[0]).toBeGreaterThan(scores[1]);
    const reversed = handleRequest(scorer, request([...items].reverse()));
    expect((reversed as { scores: number[] }).scores).toEqual([...scores].reverse());
  });

  it('answers the empty batch', () => {
    expect(handleRequest(scorer, request([]))).toEqual({ scores: [] });
  });

  it.each([
    ['wrong version', request([GOOD_ITEM], 2), /protocol_version/],
    ['missing items', { protocol_version: 1 }, /items/],
    ['items not an array', { protocol_version: 1, items: 'no' }, /items/],
    ['array request', [1, 2], /object/],
    ['null request', null, /object/],
    ['item without candidate', request([{ reference: 'a' }]), /candidate/],
    ['item missing reference', request([{ candidate: 'a' }]), /reference/],
    ['empty candidate', request([{ candidate: ' ', reference: 'a' }]), /empty/],
  ])('rejects %s with an error reply', (_label, raw, pattern) => {
    const reply = handleRequest(scorer, raw);
    expect('error' in reply).toBe(true);
    expect((reply as { error: string }).error).toMatch(pattern);
  });

  it('asks lf scorers for lf, not reference', () => {
    const parser = createScorer('parser-prob');
    const ok = handleRequest(parser, request([{ candidate: 'count states', lf: 'count ( state )' }]));
    expect('scores' in ok).toBe(true);
    const bad = handleRequest(parser, request([{ candidate: 'count states' }]));
    expect((bad as { error: string }).error).toMatch(/lf/);
  });

  it('turns non-finite scorer output into an error reply', () => {
    const broken: Scorer = {
      name: 'broken',
      kind: 'external-reference',
      score: () => Number.POSITIVE_INFINITY,
    };
    const reply = handleRequest(broken, request([GOOD_ITEM]));
    expect((reply as { error: string }).error).toMatch(/non-finite/);
  });
});

describe('handleLine', () => {
  it('ignores blank lines', () => {
    expect(handleLine(scorer, '')).toBeNull();
    expect(handleLine(scorer, '   ')).toBeNull();
  });

  it('answers garbage with an error line and keeps going', () => {
    const garbage = handleLine(scorer, 'this is not json');
    expect(JSON.parse(garbage!)).toHaveProperty('error');
    const next = handleLine(scorer, JSON.stringify(request([GOOD_ITEM])));
    expect(JSON.parse(next!).scores).toHaveLength(1);
  });

  it('round-trips unicode', () => {
    const line = JSON.stringify(request([{ candidate: 'héllo wörld', reference: 'héllo wörld' }]));
    const reply = JSON.parse(handleLine(scorer, line)!);
    expect(reply.scores[0]).toBe(1);
  });

  it('emits single-line JSON replies', () => {
    const reply = handleLine(scorer, JSON.stringify(request([GOOD_ITEM])));
    expect(reply).not.toContain('\n');
  });
});
