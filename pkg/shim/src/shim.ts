/**
 * Stdio worker: one candidate source served over line-delimited call frames.
 *
 * Launched as: node shim.js <sourcePath> <entrypoint> [--set-result]
 * A source that fails to load still serves; every call answers status
 * "error". An unparseable frame terminates the process with a nonzero code.
 */

import * as readline from "node:readline";

import { handleRequest, loadCandidate, parseArgv } from "./runtime.js";

async function main(): Promise<void> {
  const options = parseArgv(process.argv.slice(2));
  const candidate = await loadCandidate(options);

  const lines = readline.createInterface({ input: process.stdin, terminal: false });
  for await (const line of lines) {
    const trimmed = line.trim();
    if (!trimmed) {
      continue;
    }
    let frame: unknown;
    try {
      frame = JSON.parse(trimmed);
    } catch {
      process.exit(2);
    }
    const response = await handleRequest(candidate, options, frame);
    process.stdout.write(JSON.stringify(response) + "\n");
  }
}

main().catch((err) => {
  process.stderr.write(String(err) + "\n");
  process.exit(1);
});
