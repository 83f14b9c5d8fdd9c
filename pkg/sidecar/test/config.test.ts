import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { describe, expect, it } from 'vitest';

import { ConfigError, loadConfig, parseConfig } from '../src/config.js';

describe('parseConfig', () => {
  it('fills defaults for a minimal config', () => {
    expect(parseConfig({ metrics: ['bleurt'] })).toEqual({
      metrics: [{ name: 'bleurt' }],
      transport: 'stdio',
      port: undefined,
      batchSize: 32,
      device: 'cpu',
    });
  });

  it('accepts object entries with a model path', () => {
    const config = parseConfig({
      metrics: [{ name: 'parser-prob', model: '/models/parser.ckpt' }],
      transport: 'http',
      port: 8080,
      batchSize: 8,
      device: 'cuda:0',
    });
    expect(config.metrics[0].model).toBe('/models/parser.ckpt');
    expect(config.port).toBe(8080);
  });

  it.each([
    ['not an object', 'hello', /object/],
    ['no metrics', {}, /metrics/],
    ['empty metrics', { metrics: [] }, /metrics/],
    ['two metrics', { metrics: ['bleurt', 'prism'] }, /one process per/],
    ['unknown metric', { metrics: ['rouge'] }, /unknown metric/],
    ['nameless entry', { metrics: [{ model: 'x' }] }, /name/],
    ['bad transport', { metrics: ['prism'], transport: 'grpc' }, /transport/],
    ['http without port', { metrics: ['prism'], transport: 'http' }, /port/],
    ['fractional port', { metrics: ['prism'], transport: 'http', port: 80.5 }, /port/],
    ['zero batch', { metrics: ['prism'], batchSize: 0 }, /batchSize/],
    ['bad device', { metrics: ['prism'], device: 3 }, /device/],
  ])('rejects %s', (_label, raw, pattern) => {
    expect(() => parseConfig(raw)).toThrow(ConfigError);
    expect(() => parseConfig(raw)).toThrow(pattern);
  });
});

describe('loadConfig', () => {
  it('reads a config file', () => {
    const dir = mkdtempSync(join(tmpdir(), 'sidecar-'));
    const path = join(dir, 'config.json');
    writeFileSync(path, JSON.stringify({ metrics: ['bartscore'] }));
    expect(loadConfig(path).metrics[0].name).toBe('bartscore');
  });

  it('reports unreadable and unparsable files', () => {
    expect(() => loadConfig('/no/such/config.json')).toThrow(/cannot read/);
    const dir = mkdtempSync(join(tmpdir(), 'sidecar-'));
    const path = join(dir, 'broken.json');
    writeFileSync(path, '{nope');
    expect(() => loadConfig(path)).toThrow(/not valid JSON/);
  });
});
