import { fileURLToPath } from "node:url";
import * as path from "node:path";

import { describe, expect, it } from "vitest";

import { handleRequest, loadCandidate, parseArgv } from "../src/runtime.js";

const here = path.dirname(fileURLToPath(import.meta.url));
const fixture = (name: string) => path.join(here, "..", "fixtures", name);

function options(source: string, entrypoint: string, setResult = false) {
  return { sourcePath: fixture(source), entrypoint, setResult };
}

async function call(source: string, entrypoint: string, args: unknown[], setResult = false) {
  const opts = options(source, entrypoint, setResult);
  const candidate = await loadCandidate(opts);
  return handleRequest(candidate, opts, { id: "t1", op: "call", args });
}

describe("request handling", () => {
  it("answers ok with the encoded result", async () => {
    const resp = await call("add1.mjs", "add1", [1]);
    expect(resp).toEqual({ id: "t1", status: "ok", value: 2 });
  });

  it("maps the designated invalid-input error", async () => {
    const resp = await call("add1.mjs", "add1", [-3]);
    expect(resp.status).toBe("invalid-input");
  });

  it("recognizes errors named ValueError", async () => {
    const resp = await call("value_error.mjs", "guarded", [-1]);
    expect(resp.status).toBe("invalid-input");
  });

  it("maps other exceptions to error with a message", async () => {
    const resp = await call("echo.mjs", "missing_entry", [1]);
    expect(resp.status).toBe("error");
  });

  it("serves subset-marked results", async () => {
    const resp = await call("pred.mjs", "pred", [0]);
    expect(resp).toEqual({
      id: "t1",
      status: "ok",
      value: { set: { kind: "subset", values: [-1] } },
    });
  });

  it("tags plain arrays as full sets when the problem returns a set", async () => {
    const tagged = await call("plain_list.mjs", "pair", [1], true);
    expect(tagged).toEqual({
      id: "t1",
      status: "ok",
      value: { set: { kind: "full", values: [2, 3] } },
    });
    const plain = await call("plain_list.mjs", "pair", [1], false);
    expect(plain).toEqual({ id: "t1", status: "ok", value: [2, 3] });
  });

  it("answers error for every call when the source fails to load", async () => {
    const opts = options("broken.mjs", "anything");
    const candidate = await loadCandidate(opts);
    expect(candidate.loadError).toContain("load failed");
    const resp = await handleRequest(candidate, opts, { id: "x", op: "call", args: [] });
    expect(resp.status).toBe("error");
  });

  it("finds entrypoints registered on globalThis", async () => {
    const resp = await call("global_fn.mjs", "doubled", [4]);
    expect(resp).toEqual({ id: "t1", status: "ok", value: 8 });
  });

  it("rejects malformed frames but keeps the id when parseable", async () => {
    const opts = options("echo.mjs", "echo");
    const candidate = await loadCandidate(opts);
    const resp = await handleRequest(candidate, opts, { id: "z", op: "nope" });
    expect(resp).toEqual({
      id: "z",
      status: "error",
      message: "expected an op=call frame with args",
    });
  });

  it("parses argv", () => {
    const opts = parseArgv(["a.mjs", "f", "--set-result"]);
    expect(opts).toEqual({ sourcePath: "a.mjs", entrypoint: "f", setResult: true });
    expect(() => parseArgv(["only-one"])).toThrow();
  });
});
