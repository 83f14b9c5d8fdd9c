/** Transports: stdio line loop and a small HTTP server, same request core. */

import http from 'node:http';
import readline from 'node:readline';
import type { Readable, Writable } from 'node:stream';

import { handleLine, handleRequest, handshake, type Scorer } from './protocol.js';

export function serveStdio(
  scorer: Scorer,
  input: Readable = process.stdin,
  output: Writable = process.stdout,
): void {
  output.write(JSON.stringify(handshake(scorer)) + '\n');
  const rl = readline.createInterface({ input, terminal: false });
  rl.on('line', (line) => {
    const reply = handleLine(scorer, line);
    if (reply !== null) {
      output.write(reply + '\n');
    }
  });
}

const BODY_LIMIT = 32 * 1024 * 1024;

function readBody(req: http.IncomingMessage): Promise<string> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    let size = 0;
    req.on('data', (chunk: Buffer) => {
      size += chunk.length;
      if (size > BODY_LIMIT) {
        reject(new Error('request body too large'));
        req.destroy();
        return;
      }
      chunks.push(chunk);
    });
    req.on('end', () => resolve(Buffer.concat(chunks).toString('utf-8')));
    req.on('error', reject);
  });
}

/**
 * GET /hello answers the handshake, POST /score scores a batch. Scoring
 * failures come back as 200 {"error": ...} so the client sees the same
 * replies on both transports; only transport-level problems get 4xx.
 */
export function serveHttp(scorer: Scorer, port: number, host = '127.0.0.1'): Promise<http.Server> {
  const server = http.createServer(async (req, res) => {
    const send = (status: number, payload: unknown) => {
      const body = JSON.stringify(payload);
      res.writeHead(status, {
        'Content-Type': 'application/json',
        'Content-Length': Buffer.byteLength(body),
      });
      res.end(body);
    };
    try {
      if (req.method === 'GET' && req.url === '/hello') {
        send(200, handshake(scorer));
      } else if (req.method === 'POST' && req.url === '/score') {
        const body = await readBody(req);
        let parsed: unknown;
        try {
          parsed = JSON.parse(body);
        } catch {
          send(200, { error: 'request body is not valid JSON' });
          return;
        }
        send(200, handleRequest(scorer, parsed));
      } else {
        send(404, { error: `no such endpoint: ${req.method} ${req.url}` });
      }
    } catch (err) {
      send(400, { error: err instanceof Error ? err.message : String(err) });
    }
  });
  return new Promise((resolve, reject) => {
    server.once('error', reject);
    server.listen(port, host, () => resolve(server));
  });
}
