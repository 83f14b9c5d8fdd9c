/** Sidecar configuration: which metric to serve and over which transport. */

import { readFileSync } from 'node:fs';

import { metricNames } from './metrics.js';

export interface MetricConfig {
  name: string;
  model?: string;
}

export interface SidecarConfig {
  metrics: MetricConfig[];
  transport: 'stdio' | 'http';
  port?: number;
  batchSize: number;
  device: string;
}

export class ConfigError extends Error {}

function fail(message: string): never {
  throw new ConfigError(message);
}

export function parseConfig(raw: unknown): SidecarConfig {
  if (typeof raw !== 'object' || raw === null || Array.isArray(raw)) {
    fail('config must be a JSON object');
  }
  const obj = raw as Record<string, unknown>;

  if (!Array.isArray(obj.metrics) || obj.metrics.length === 0) {
    fail('config needs a non-empty metrics array');
  }
  // the wire protocol has no metric selector, so one process serves one metric
  if (obj.metrics.length > 1) {
    fail('one sidecar process serves one metric; run one process per entry');
  }
  const entry = obj.metrics[0];
  let metric: MetricConfig;
  if (typeof entry === 'string') {
    metric = { name: entry };
  } else if (typeof entry === 'object' && entry !== null) {
    const m = entry as Record<string, unknown>;
    if (typeof m.name !== 'string') {
      fail('metric entry needs a name');
    }
    if (m.model !== undefined && typeof m.model !== 'string') {
      fail('metric model must be a string identifier or path');
    }
    metric = { name: m.name, model: m.model as string | undefined };
  } else {
    fail('metric entries must be names or {name, model?} objects');
  }
  if (!metricNames().includes(metric.name)) {
    fail(`unknown metric '${metric.name}'; available: ${metricNames().join(', ')}`);
  }

  const transport = obj.transport ?? 'stdio';
  if (transport !== 'stdio' && transport !== 'http') {
    fail(`transport must be 'stdio' or 'http', got ${JSON.stringify(transport)}`);
  }
  let port: number | undefined;
  if (transport === 'http') {
    if (typeof obj.port !== 'number' || !Number.isInteger(obj.port)
        || obj.port < 0 || obj.port > 65535) {
      fail('http transport needs an integer port in [0, 65535]');
    }
    port = obj.port;
  }

  const batchSize = obj.batchSize ?? 32;
  if (typeof batchSize !== 'number' || !Number.isInteger(batchSize) || batchSize < 1) {
    fail('batchSize must be an integer >= 1');
  }
  const device = obj.device ?? 'cpu';
  if (typeof device !== 'string') {
    fail('device must be a string');
  }

  return { metrics: [metric], transport, port, batchSize, device };
}

export function loadConfig(path: string): SidecarConfig {
  let text: string;
  try {
    text = readFileSync(path, 'utf-8');
  } catch (err) {
    fail(`cannot read config ${path}: ${err instanceof Error ? err.message : err}`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    fail(`config ${path} is not valid JSON: ${err instanceof Error ? err.message : err}`);
  }
  return parseConfig(raw);
}
