#!/usr/bin/env python3
"""Regenerates the bundled toy corpus under corpus/toy/.

Three problems: an inexact one with a dominant wrong answer (two valid answers
per input, the correct classes carry low mass), an exact one with a clear
majority, and an unsolvable one where every sampled class is wrong.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from tricheck.problems import args_key  # noqa: E402
from tricheck.values import Normal, full_set  # noqa: E402
from tricheck.wire import encode_wire_value  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "corpus" / "toy"
INPUT_RANGE = range(-10, 11)
TABLE_RANGE = range(-20, 31)


def key_of(*payloads) -> str:
    return args_key(tuple(Normal(p) for p in payloads)).decode("utf-8")


def scalar_table(fn, rng=TABLE_RANGE) -> dict:
    return {key_of(i): encode_wire_value(Normal(fn(i))) for i in rng}


def set_table(fn, rng=TABLE_RANGE) -> dict:
    return {
        key_of(i): encode_wire_value(full_set([Normal(v) for v in fn(i)])) for i in rng
    }


def pair_table(fn, inputs, outputs_fn) -> dict:
    table = {}
    for i in inputs:
        for o in outputs_fn(i):
            table[key_of(i, o)] = encode_wire_value(Normal(fn(i, o)))
    return table


def candidate(cid, table, count=1) -> dict:
    entry = {"id": cid, "table": table}
    if count != 1:
        entry["count"] = count
    return entry


def judge_pairs(accept_fn) -> dict:
    return {
        "mode": "pairs",
        "pairs": {
            key_of(i): [encode_wire_value(Normal(v)) for v in accept_fn(i)]
            for i in INPUT_RANGE
        },
    }


def problem_inexact() -> dict:
    return {
        "id": "toy-inexact",
        "text": "Return an integer strictly greater than the input by at most 2.",
        "signature": {"name": "next_up", "params": [["i", "int"]], "returns": "int"},
        "inputs": [[i] for i in INPUT_RANGE],
        "judge": judge_pairs(lambda i: [i + 1, i + 2]),
        "candidates": {
            "forward": [
                candidate("fwd-keep", scalar_table(lambda i: i, INPUT_RANGE), 23),
                candidate("fwd-double", scalar_table(lambda i: 2 * i + 5, INPUT_RANGE), 22),
                candidate("fwd-plus3", scalar_table(lambda i: i + 3, INPUT_RANGE), 21),
                candidate("fwd-neg", scalar_table(lambda i: -i, INPUT_RANGE), 20),
                candidate("fwd-plus1", scalar_table(lambda i: i + 1, INPUT_RANGE), 7),
                candidate("fwd-plus2", scalar_table(lambda i: i + 2, INPUT_RANGE), 7),
            ],
            "enum": [
                candidate("enum-wide", set_table(lambda i: [i, i + 1]), 28),
                candidate("enum-good", set_table(lambda i: [i + 1, i + 2]), 27),
                candidate("enum-miss", set_table(lambda i: [i + 1]), 25),
                candidate("enum-far", set_table(lambda i: [i + 3, i + 4]), 20),
            ],
            "sinv": [
                candidate("sinv-flip", set_table(lambda o: [o + 1, o + 2]), 50),
                candidate("sinv-over", set_table(lambda o: [o - 1, o - 2, o - 3]), 43),
                candidate("sinv-good", set_table(lambda o: [o - 1, o - 2]), 7),
            ],
        },
    }


def problem_exact() -> dict:
    inputs = list(INPUT_RANGE)
    fwd_outputs = lambda i: [i + 1, i - 1]  # noqa: E731
    return {
        "id": "toy-exact",
        "text": "Return the input plus one.",
        "signature": {"name": "inc", "params": [["i", "int"]], "returns": "int"},
        "inputs": [[i] for i in inputs],
        "judge": judge_pairs(lambda i: [i + 1]),
        "candidates": {
            "forward": [
                candidate("fwd-ok", scalar_table(lambda i: i + 1, INPUT_RANGE), 60),
                candidate("fwd-off", scalar_table(lambda i: i - 1, INPUT_RANGE), 40),
            ],
            "enum": [
                candidate("enum-ok", set_table(lambda i: [i + 1]), 70),
                candidate("enum-off", set_table(lambda i: [i + 2]), 30),
            ],
            "sinv": [
                candidate("sinv-ok", set_table(lambda o: [o - 1]), 50),
                candidate("sinv-off", set_table(lambda o: [o + 1]), 50),
            ],
            "postconditions": [
                candidate(
                    "post-exact", pair_table(lambda i, o: o == i + 1, inputs, fwd_outputs)
                ),
                candidate(
                    "post-trivial", pair_table(lambda i, o: True, inputs, fwd_outputs)
                ),
            ],
            "tests": [
                {
                    "id": "test-input3",
                    "input": [3],
                    "table": {
                        key_of(3, 4): encode_wire_value(Normal(True)),
                        key_of(3, 2): encode_wire_value(Normal(False)),
                    },
                }
            ],
            "syntactic": [
                candidate("syn-ok", scalar_table(lambda i: i + 1, INPUT_RANGE), 80),
                candidate("syn-off", scalar_table(lambda i: i - 1, INPUT_RANGE), 20),
            ],
            "offbyone": [
                candidate("obo-ok", scalar_table(lambda i: i + 1, INPUT_RANGE), 50),
                candidate("obo-off", scalar_table(lambda i: i + 2, INPUT_RANGE), 50),
            ],
        },
    }


def problem_unsolvable() -> dict:
    return {
        "id": "toy-unsolvable",
        "text": "Return the input doubled.",
        "signature": {"name": "dbl", "params": [["i", "int"]], "returns": "int"},
        "inputs": [[i] for i in INPUT_RANGE],
        "judge": judge_pairs(lambda i: [2 * i]),
        "candidates": {
            "forward": [
                candidate("fwd-zero", scalar_table(lambda i: 0, INPUT_RANGE), 70),
                candidate("fwd-one", scalar_table(lambda i: 1, INPUT_RANGE), 30),
            ],
            "enum": [
                candidate("enum-zero", set_table(lambda i: [0]), 60),
                candidate("enum-one", set_table(lambda i: [1]), 40),
            ],
            "sinv": [candidate("sinv-seven", set_table(lambda o: [o + 7]), 100)],
        },
    }


def sample_labels() -> dict:
    """Per-problem sampling-order class labels (for the entropy report)."""
    rng = random.Random(20240801)
    labels = {}
    spec = {
        "toy-inexact": [("keep", 23), ("double", 22), ("plus3", 21), ("neg", 20), ("plus1", 7), ("plus2", 7)],
        "toy-exact": [("ok", 60), ("off", 40)],
        "toy-unsolvable": [("zero", 70), ("one", 30)],
    }
    for problem, classes in spec.items():
        seq = [name for name, count in classes for _ in range(count)]
        rng.shuffle(seq)
        labels[problem] = seq
    return labels


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    problems = [problem_exact(), problem_inexact(), problem_unsolvable()]
    with (OUT / "problems.jsonl").open("w", encoding="utf-8") as fh:
        for p in problems:
            fh.write(json.dumps(p, sort_keys=True, separators=(",", ":")) + "\n")
    samples = OUT / "samples"
    samples.mkdir(exist_ok=True)
    for problem, labels in sample_labels().items():
        (samples / f"{problem}.json").write_text(json.dumps(labels), "utf-8")
    print(f"wrote {OUT / 'problems.jsonl'}")


if __name__ == "__main__":
    main()
