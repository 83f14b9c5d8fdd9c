import { ConfigError, loadConfig, type SidecarConfig } from './config.js';
import { createScorer, metricNames } from './metrics.js';
import { serveHttp, serveStdio } from './server.js';

const USAGE = `usage:
  main.js --stdio <metric>          serve one metric over stdin/stdout
  main.js --http <port> <metric>    serve one metric over HTTP on 127.0.0.1
  main.js --config <path>           read a JSON config file instead
  main.js --list                    print the available metric names

metrics: ${metricNames().join(', ')}`;

function configFromArgs(argv: string[]): SidecarConfig {
  if (argv[0] === '--config' && argv.length === 2) {
    return loadConfig(argv[1]);
  }
  if (argv[0] === '--stdio' && argv.length === 2) {
    return { metrics: [{ name: argv[1] }], transport: 'stdio', batchSize: 32, device: 'cpu' };
  }
  if (argv[0] === '--http' && argv.length === 3) {
    const port = Number(argv[1]);
    if (!Number.isInteger(port) || port < 0 || port > 65535) {
      throw new ConfigError(`not a valid port: ${argv[1]}`);
    }
    return { metrics: [{ name: argv[2] }], transport: 'http', port, batchSize: 32, device: 'cpu' };
  }
  throw new ConfigError(USAGE);
}

async function main(argv: string[]): Promise<number> {
  if (argv[0] === '--list') {
    for (const name of metricNames()) {
      console.log(name);
    }
    return 0;
  }
  let config: SidecarConfig;
  let scorer;
  try {
    config = configFromArgs(argv);
    const { name, model } = config.metrics[0];
    scorer = createScorer(name, model);
  } catch (err) {
    // startup failure: no handshake line has been written, exit nonzero
    console.error(err instanceof Error ? err.message : String(err));
    return 1;
  }

  if (config.transport === 'http') {
    const server = await serveHttp(scorer, config.port!);
    const address = server.address();
    const port = typeof address === 'object' && address !== null ? address.port : config.port;
    console.error(`serving ${scorer.name} on http://127.0.0.1:${port}`);
    await new Promise(() => {});  // runs until killed
  } else {
    serveStdio(scorer);
    await new Promise((resolve) => process.stdin.on('close', resolve));
  }
  return 0;
}

main(process.argv.slice(2)).then(
  (code) => process.exitCode = code,
  (err) => {
    console.error(err instanceof Error ? err.stack ?? err.message : String(err));
    process.exitCode = 1;
  },
);
