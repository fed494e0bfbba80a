/**
 * Request handling for one loaded candidate: decode, call, classify, encode.
 */

import { pathToFileURL } from "node:url";

import {
  InvalidInput,
  WireFormatError,
  decodeWire,
  encodeWire,
  installPreamble,
  markSetResult,
} from "./values.js";

export interface ShimOptions {
  sourcePath: string;
  entrypoint: string;
  setResult: boolean;
}

export type Response =
  | { id: string; status: "ok"; value: unknown }
  | { id: string; status: "invalid-input"; message?: string }
  | { id: string; status: "error"; message: string };

type Candidate = (...args: unknown[]) => unknown;

export interface LoadedCandidate {
  fn: Candidate | null;
  loadError: string | null;
}

export async function loadCandidate(options: ShimOptions): Promise<LoadedCandidate> {
  installPreamble();
  try {
    const mod = await import(pathToFileURL(options.sourcePath).href);
    const g = globalThis as Record<string, unknown>;
    const fn =
      mod[options.entrypoint] ??
      (mod.default ? mod.default[options.entrypoint] : undefined) ??
      g[options.entrypoint];
    if (typeof fn !== "function") {
      return { fn: null, loadError: `entrypoint ${options.entrypoint} not found` };
    }
    return { fn: fn as Candidate, loadError: null };
  } catch (err) {
    return { fn: null, loadError: `load failed: ${describe(err)}` };
  }
}

function describe(err: unknown): string {
  if (err instanceof Error) {
    return `${err.name}: ${err.message}`;
  }
  return String(err);
}

function isInvalidInput(err: unknown): boolean {
  if (err instanceof InvalidInput) {
    return true;
  }
  // foreign realms or hand-rolled errors signal by name
  return err instanceof Error && (err.name === "InvalidInput" || err.name === "ValueError");
}

export async function handleRequest(
  candidate: LoadedCandidate,
  options: ShimOptions,
  frame: unknown,
): Promise<Response> {
  if (
    typeof frame !== "object" ||
    frame === null ||
    typeof (frame as Record<string, unknown>).id !== "string"
  ) {
    return { id: "", status: "error", message: "malformed request frame" };
  }
  const { id, op, args } = frame as { id: string; op?: unknown; args?: unknown };
  if (op !== "call" || !Array.isArray(args)) {
    return { id, status: "error", message: "expected an op=call frame with args" };
  }
  if (candidate.fn === null) {
    return { id, status: "error", message: candidate.loadError ?? "no entrypoint" };
  }
  let decoded: unknown[];
  try {
    decoded = args.map(decodeWire);
  } catch (err) {
    return { id, status: "error", message: describe(err) };
  }
  try {
    let result: unknown = candidate.fn(...decoded);
    if (result instanceof Promise) {
      result = await result;
    }
    if (options.setResult) {
      result = markSetResult(result);
    }
    return { id, status: "ok", value: encodeWire(result) };
  } catch (err) {
    if (isInvalidInput(err)) {
      return { id, status: "invalid-input", message: describe(err) };
    }
    return { id, status: "error", message: describe(err) };
  }
}

export function parseArgv(argv: string[]): ShimOptions {
  const positional = argv.filter((a) => !a.startsWith("--"));
  const flags = new Set(argv.filter((a) => a.startsWith("--")));
  if (positional.length < 2) {
    throw new Error("usage: shim <sourcePath> <entrypoint> [--set-result]");
  }
  return {
    sourcePath: positional[0],
    entrypoint: positional[1],
    setResult: flags.has("--set-result"),
  };
}
