import { describe, expect, it } from 'vitest';

import { createScorer, metricNames } from '../src/metrics.js';
import type { Item } from '../src/protocol.js';

const REFERENCE = 'what is the highest point in the state of delaware';
const UNRELATED = 'please list nine borders of the banana pancake';
const GOLD_LF = 'answer ( population ( city ( avon ) ) )';
const GOLD_UTTERANCE = 'what is the population of the city avon';

const REFERENCE_METRICS = ['bleurt', 'prism', 'bertscore', 'bartscore'];

function refItem(candidate: string): Item {
  return { candidate, reference: REFERENCE };
}

describe('registry', () => {
  it('lists every metric', () => {
    expect(metricNames()).toEqual(['bartscore', 'bertscore', 'bleurt', 'parser-prob', 'prism']);
  });

  it('rejects unknown names', () => {
    expect(() => createScorer('rouge')).toThrow(/unknown metric 'rouge'/);
  });

  it('declares the right kinds', () => {
    for (const name of REFERENCE_METRICS) {
      expect(createScorer(name).kind).toBe('external-reference');
    }
    expect(createScorer('parser-prob').kind).toBe('external-lf');
  });
});

describe.each(REFERENCE_METRICS)('%s', (name) => {
  const scorer = createScorer(name);

  it('scores the identical pair above an unrelated pair', () => {
    expect(scorer.score(refItem(REFERENCE))).toBeGreaterThan(scorer.score(refItem(UNRELATED)));
  });

  it('tops out exactly on the identical pair', () => {
    // similarity metrics peak at 1, likelihood metrics at log 1 = 0
    const top = name === 'prism' || name === 'bartscore' ? 0 : 1;
    expect(scorer.score(refItem(REFERENCE))).toBe(top);
  });

  it('is deterministic', () => {
    const item = refItem('the state borders a point of delaware');
    expect(scorer.score(item)).toBe(scorer.score(item));
  });

  it('rejects empty sides', () => {
    expect(() => scorer.score(refItem('   '))).toThrow(/candidate is empty/);
    expect(() => scorer.score({ candidate: 'hi there', reference: '' })).toThrow(/reference is empty/);
  });

  it('stays finite on disjoint unicode input', () => {
    const value = scorer.score({ candidate: '数えて ください', reference: REFERENCE });
    expect(Number.isFinite(value)).toBe(true);
  });
});

describe('similarity ranges', () => {
  const pairs: Array<[string, string]> = [
    [REFERENCE, REFERENCE],
    [UNRELATED, REFERENCE],
    ['the state of delaware', REFERENCE],
    ['x', 'y'],
  ];

  it('keeps bleurt and bertscore in [0, 1]', () => {
    for (const name of ['bleurt', 'bertscore']) {
      const scorer = createScorer(name);
      for (const [candidate, reference] of pairs) {
        const value = scorer.score({ candidate, reference });
        expect(value).toBeGreaterThanOrEqual(0);
        expect(value).toBeLessThanOrEqual(1);
      }
    }
  });

  it('keeps prism and bartscore at or below 0', () => {
    for (const name of ['prism', 'bartscore']) {
      const scorer = createScorer(name);
      for (const [candidate, reference] of pairs) {
        expect(scorer.score({ candidate, reference })).toBeLessThanOrEqual(0);
      }
    }
  });
});

describe('parser-prob', () => {
  const scorer = createScorer('parser-prob');
  const gold: Item = { candidate: GOLD_UTTERANCE, lf: GOLD_LF };

  it('scores the gold utterance above a shuffled one', () => {
    // same token multiset, different order: only the LCS can tell them apart
    const shuffled = { candidate: 'avon city the of population the is what', lf: GOLD_LF };
    expect(scorer.score(gold)).toBeGreaterThan(scorer.score(shuffled));
  });

  it('scores the gold utterance above an unrelated one', () => {
    expect(scorer.score(gold)).toBeGreaterThan(scorer.score({ candidate: UNRELATED, lf: GOLD_LF }));
  });

  it('stays in (0, 1]', () => {
    for (const candidate of [GOLD_UTTERANCE, UNRELATED, 'zz qq']) {
      const value = scorer.score({ candidate, lf: GOLD_LF });
      expect(value).toBeGreaterThan(0);
      expect(value).toBeLessThanOrEqual(1);
    }
  });

  it('rejects empty candidates and keyword-free LFs', () => {
    expect(() => scorer.score({ candidate: '', lf: GOLD_LF })).toThrow(/candidate is empty/);
    expect(() => scorer.score({ candidate: 'hi', lf: '( ( ) )' })).toThrow(/keyword/);
  });

  it('is deterministic', () => {
    expect(scorer.score(gold)).toBe(scorer.score(gold));
  });
});
