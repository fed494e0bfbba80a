/**
 * Wire value codec and the marker constructors exposed to candidate code.
 *
 * Wire values: scalars as-is; none as {"none": true}; tuples as
 * {"tuple": [...]}; sets as {"set": {"kind": "full"|"subset", "values": [...]}}.
 * Integers must stay within the double-safe range; floats are rejected.
 */

export class FullSetMarker {
  constructor(readonly values: unknown[]) {}
}

export class SubsetMarker {
  constructor(readonly values: unknown[]) {}
}

export class TupleMarker {
  constructor(readonly values: unknown[]) {}
}

/** The designated invalid-input failure candidates are told to raise. */
export class InvalidInput extends Error {
  constructor(message = "invalid input") {
    super(message);
    this.name = "InvalidInput";
  }
}

export class WireFormatError extends Error {}

const RESERVED = new Set(["none", "set", "tuple"]);

export function installPreamble(): void {
  const g = globalThis as Record<string, unknown>;
  g.FullSet = (values: Iterable<unknown>) => new FullSetMarker([...values]);
  g.Subset = (values: Iterable<unknown>) => new SubsetMarker([...values]);
  g.Tuple = (values: Iterable<unknown>) => new TupleMarker([...values]);
  g.InvalidInput = InvalidInput;
}

function isPlainObject(x: unknown): x is Record<string, unknown> {
  return (
    typeof x === "object" &&
    x !== null &&
    (Object.getPrototypeOf(x) === Object.prototype || Object.getPrototypeOf(x) === null)
  );
}

export function decodeWire(obj: unknown): unknown {
  if (obj === null) {
    throw new WireFormatError("bare null is not a wire value");
  }
  if (typeof obj === "boolean" || typeof obj === "string") {
    return obj;
  }
  if (typeof obj === "number") {
    if (!Number.isSafeInteger(obj)) {
      throw new WireFormatError(`not a safe integer: ${obj}`);
    }
    return obj;
  }
  if (Array.isArray(obj)) {
    return obj.map(decodeWire);
  }
  if (isPlainObject(obj)) {
    const keys = Object.keys(obj);
    if (keys.length === 1 && keys[0] === "none" && obj.none === true) {
      return null;
    }
    if (keys.length === 1 && keys[0] === "tuple" && Array.isArray(obj.tuple)) {
      return new TupleMarker(obj.tuple.map(decodeWire));
    }
    if (keys.length === 1 && keys[0] === "set") {
      const body = obj.set;
      if (
        !isPlainObject(body) ||
        (body.kind !== "full" && body.kind !== "subset") ||
        !Array.isArray(body.values)
      ) {
        throw new WireFormatError("malformed set wrapper");
      }
      const values = body.values.map(decodeWire);
      return body.kind === "full" ? new FullSetMarker(values) : new SubsetMarker(values);
    }
    const out: Record<string, unknown> = {};
    for (const key of keys) {
      out[key] = decodeWire(obj[key]);
    }
    return out;
  }
  throw new WireFormatError(`undecodable wire value: ${typeof obj}`);
}

export function encodeWire(value: unknown): unknown {
  if (value === null || value === undefined) {
    return { none: true };
  }
  if (typeof value === "boolean" || typeof value === "string") {
    return value;
  }
  if (typeof value === "number") {
    if (!Number.isSafeInteger(value)) {
      throw new WireFormatError(`result is not a safe integer: ${value}`);
    }
    return value;
  }
  if (typeof value === "bigint") {
    const asNumber = Number(value);
    if (!Number.isSafeInteger(asNumber)) {
      throw new WireFormatError("bigint result exceeds the safe integer range");
    }
    return asNumber;
  }
  if (value instanceof TupleMarker) {
    return { tuple: value.values.map(encodeWire) };
  }
  if (value instanceof FullSetMarker) {
    return { set: { kind: "full", values: value.values.map(encodeWire) } };
  }
  if (value instanceof SubsetMarker) {
    return { set: { kind: "subset", values: value.values.map(encodeWire) } };
  }
  if (value instanceof Set) {
    // a native set where a set is expected is an unmarked full enumeration
    return { set: { kind: "full", values: [...value].map(encodeWire) } };
  }
  if (Array.isArray(value)) {
    return value.map(encodeWire);
  }
  if (value instanceof Map) {
    const out: Record<string, unknown> = {};
    for (const [k, v] of value) {
      if (typeof k !== "string") {
        throw new WireFormatError("map keys must be strings");
      }
      out[k] = encodeWire(v);
    }
    return reservedGuard(out);
  }
  if (isPlainObject(value)) {
    const out: Record<string, unknown> = {};
    for (const key of Object.keys(value)) {
      out[key] = encodeWire(value[key]);
    }
    return reservedGuard(out);
  }
  throw new WireFormatError(`unencodable result of type ${typeof value}`);
}

function reservedGuard(out: Record<string, unknown>): Record<string, unknown> {
  const keys = Object.keys(out);
  if (keys.length === 1 && RESERVED.has(keys[0])) {
    throw new WireFormatError(`map key ${keys[0]} is reserved on the wire`);
  }
  return out;
}

/** Tag a top-level array/Set result as a full set (set-returning problems). */
export function markSetResult(value: unknown): unknown {
  if (Array.isArray(value)) {
    return new FullSetMarker(value);
  }
  if (value instanceof Set) {
    return new FullSetMarker([...value]);
  }
  return value;
}
