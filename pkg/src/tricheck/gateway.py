"""Provider-agnostic sampling with a deterministic record/replay cache.

Every provider request is keyed by (prompt id, sampling params, index). In
record mode responses are persisted one file per key; in replay mode the
cache is the only source and a miss is a hard error — a replayed pipeline
never performs a network operation.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, List, Optional, Protocol, Union

from .problems import (
    FunctionSignature,
    ProblemDescription,
    Provenance,
    Role,
    RoleKind,
    TestInputSet,
    args_key,
)
from .values import Normal, Value
from .wire import WireError, decode_wire_value

API_KEY_ENV = "TRI_API_KEY"

_CODE_BLOCK = re.compile(r"```[a-zA-Z0-9_+-]*\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class SamplingParams:
    n: int = 30
    temperature: float = 1.0
    model: str = "default"

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


class TransformKind(Enum):
    INVERSE = "inverse"
    PARTIAL_INVERSE = "partial-inverse"
    SET_VALUED_INVERSE = "set-valued-inverse"
    ENUMERATION = "enumeration"
    POINTWISE = "pointwise"
    UNION_SPLIT = "union-split"
    CHOOSE_INVERT_ARG = "choose-invert-arg"
    INPUT_GENERATION = "input-generation"
    BASELINE_TESTS = "baseline-tests"
    BASELINE_POSTCONDITION = "baseline-postcondition"
    BASELINE_TRANSLATE = "baseline-translate"
    BASELINE_OFF_BY_ONE = "baseline-off-by-one"


class Provider(Protocol):
    def complete(self, prompt: str, *, temperature: float, model: str) -> str: ...


class TransportError(Exception):
    pass


class ReplayMissError(Exception):
    pass


class EmptyResponseError(Exception):
    pass


class HttpProvider:
    """Minimal chat-completions client for OpenAI-compatible endpoints."""

    def __init__(self, base_url: str, api_key: Optional[str] = None, retries: int = 2):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key or os.environ.get(API_KEY_ENV, "")
        self.retries = retries

    def complete(self, prompt: str, *, temperature: float, model: str) -> str:
        import httpx

        last: Optional[Exception] = None
        for _ in range(self.retries + 1):
            try:
                resp = httpx.post(
                    f"{self.base_url}/chat/completions",
                    headers={"Authorization": f"Bearer {self.api_key}"},
                    json={
                        "model": model,
                        "temperature": temperature,
                        "messages": [{"role": "user", "content": prompt}],
                    },
                    timeout=120,
                )
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except Exception as exc:  # noqa: BLE001 - bounded retry then surface
                last = exc
        raise TransportError(str(last))


def cache_key(prompt_id: str, params: SamplingParams, index: Union[int, str]) -> str:
    blob = json.dumps(
        {
            "prompt_id": prompt_id,
            "n": params.n,
            "temperature": params.temperature,
            "model": params.model,
            "index": str(index),
        },
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def load_template(name: str) -> str:
    return resources.files("tricheck.prompts").joinpath(f"{name}.txt").read_text("utf-8")


def render_template(name: str, **fields: str) -> str:
    """Substitute {FIELD} tokens; untouched braces stay literal."""
    text = load_template(name)
    for key, value in fields.items():
        text = text.replace("{" + key + "}", str(value))
    return text


def _render_signature(sig: FunctionSignature) -> str:
    params = ", ".join(f"{n}: {t}" for n, t in sig.params)
    return f"{sig.name}({params}) -> {sig.returns}"


# --- mechanical signature transforms -----------------------------------------


def _set_of(tag: str) -> str:
    return f"set[{tag}]"


def _strip_seq(tag: str) -> str:
    if tag.startswith("list[") and tag.endswith("]"):
        return tag[5:-1]
    raise ValueError(f"type tag {tag!r} is not a sequence")


def _strip_optional(tag: str) -> str:
    if tag.startswith("optional[") and tag.endswith("]"):
        return tag[9:-1]
    raise ValueError(f"type tag {tag!r} is not optional")


def transform_signature(
    sig: FunctionSignature, kind: TransformKind, arg_index: Optional[int] = None
):
    """Derive the transformed signature mechanically from the original."""
    if kind is TransformKind.INVERSE:
        if sig.arity == 1:
            name, tag = sig.params[0]
            return FunctionSignature(sig.name + "_inv", (("out", sig.returns),), tag)
        return FunctionSignature(
            sig.name + "_inv",
            (("out", sig.returns),),
            "tuple[" + ", ".join(t for _, t in sig.params) + "]",
        )
    if kind in (TransformKind.PARTIAL_INVERSE, TransformKind.SET_VALUED_INVERSE):
        if arg_index is None or not 0 <= arg_index < sig.arity:
            raise ValueError("partial transforms need a valid arg_index")
        inv_name, inv_tag = sig.params[arg_index]
        rest = tuple(p for k, p in enumerate(sig.params) if k != arg_index)
        returns = (
            inv_tag if kind is TransformKind.PARTIAL_INVERSE else _set_of(inv_tag)
        )
        return FunctionSignature(
            sig.name + ("_pinv" if kind is TransformKind.PARTIAL_INVERSE else "_sinv"),
            (("out", sig.returns), *rest),
            returns,
        )
    if kind is TransformKind.ENUMERATION:
        return FunctionSignature(sig.name + "_enum", sig.params, _set_of(sig.returns))
    if kind is TransformKind.POINTWISE:
        if sig.arity != 1:
            raise ValueError("pointwise transform expects a single sequence parameter")
        name, tag = sig.params[0]
        return FunctionSignature(
            sig.name + "_pointwise",
            ((name + "_item", _strip_seq(tag)),),
            _strip_seq(sig.returns),
        )
    if kind is TransformKind.UNION_SPLIT:
        name, tag = sig.params[0]
        some = FunctionSignature(
            sig.name + "_some", ((name, _strip_optional(tag)), *sig.params[1:]), sig.returns
        )
        none = FunctionSignature(sig.name + "_none", sig.params[1:], sig.returns)
        return some, none
    if kind in (TransformKind.BASELINE_TRANSLATE, TransformKind.BASELINE_OFF_BY_ONE):
        return sig
    raise ValueError(f"no signature transform for {kind}")


def extract_code_block(text: str) -> Optional[str]:
    match = _CODE_BLOCK.search(text)
    return match.group(1) if match else None


@dataclass(frozen=True)
class PostconditionWitness:
    """Boolean candidate over (input arguments..., output)."""

    candidate: object  # CandidateProgram


@dataclass(frozen=True)
class TestWitness:
    """Per-test candidate: a fixed input plus a boolean check over outputs."""

    candidate: object  # CandidateProgram over (input arguments..., output)
    input_args: tuple


class Gateway:
    """Front door for all sampling, transformation and artifact generation."""

    TRANSFORM_TEMPERATURE = 0.0  # reformulation, not problem solving

    def __init__(
        self,
        provider: Optional[Provider] = None,
        *,
        record_dir: Optional[str] = None,
        replay_dir: Optional[str] = None,
        clock: Callable[[], float] = time.time,
    ):
        self.provider = provider
        self.record_dir = Path(record_dir) if record_dir else None
        self.replay_dir = Path(replay_dir) if replay_dir else None
        self.clock = clock
        if self.record_dir:
            self.record_dir.mkdir(parents=True, exist_ok=True)

    # -- transcript cache ------------------------------------------------------

    def _request(
        self, prompt_id: str, prompt: str, params: SamplingParams, index: Union[int, str],
        temperature: Optional[float] = None,
    ) -> str:
        key = cache_key(prompt_id, params, index)
        if self.replay_dir is not None:
            path = self.replay_dir / f"{key}.json"
            if not path.exists():
                raise ReplayMissError(f"no transcript for {prompt_id!r} index {index}")
            return json.loads(path.read_text("utf-8"))["response"]
        if self.provider is None:
            raise TransportError("no provider configured and not in replay mode")
        response = self.provider.complete(
            prompt,
            temperature=params.temperature if temperature is None else temperature,
            model=params.model,
        )
        if self.record_dir is not None:
            record = {
                "key": key,
                "prompt_id": prompt_id,
                "params": {
                    "n": params.n,
                    "temperature": params.temperature,
                    "model": params.model,
                },
                "index": str(index),
                "request": prompt,
                "response": response,
                "timestamp": self.clock(),
            }
            (self.record_dir / f"{key}.json").write_text(
                json.dumps(record, sort_keys=True, indent=1), "utf-8"
            )
        return response

    # -- operations --------------------------------------------------------------

    def sample_programs(
        self, d: ProblemDescription, params: SamplingParams
    ) -> List[str]:
        """n candidate source texts for the problem."""
        if not d.text.strip():
            raise ValueError("problem description text is empty")
        prompt = render_template(
            "code_gen", SIGNATURE=_render_signature(d.signature), PROBLEM=d.text
        )
        sources = []
        for i in range(params.n):
            source = None
            for retry in range(4):
                index = i if retry == 0 else f"{i}.retry{retry}"
                text = self._request(f"sample:{d.id}", prompt, params, index)
                source = extract_code_block(text)
                if source is not None:
                    break
            if source is None:
                raise EmptyResponseError(
                    f"no code block in responses for {d.id!r} sample {i}"
                )
            sources.append(source)
        return sources

    def choose_invert_arg(self, d: ProblemDescription, params: SamplingParams) -> int:
        prompt = render_template(
            "choose_invert_arg", ORIG_SIGN=_render_signature(d.signature), PROBLEM=d.text
        )
        text = self._request(
            f"choose-arg:{d.id}", prompt, params, 0, temperature=self.TRANSFORM_TEMPERATURE
        )
        match = re.search(r"-?\d+", text)
        if not match:
            raise EmptyResponseError("no parameter index in response")
        index = int(match.group())
        if not 0 <= index < d.signature.arity:
            raise ValueError(f"chosen index {index} out of range")
        return index

    def transform(
        self,
        d: ProblemDescription,
        kind: TransformKind,
        params: SamplingParams,
        arg_index: Optional[int] = None,
    ):
        """Transformed problem description(s) with mechanically derived signature."""
        templates = {
            TransformKind.INVERSE: "transform_inverse",
            TransformKind.PARTIAL_INVERSE: "transform_partial_inverse",
            TransformKind.SET_VALUED_INVERSE: "transform_sinv",
            TransformKind.ENUMERATION: "transform_enum",
            TransformKind.POINTWISE: "transform_pointwise",
            TransformKind.UNION_SPLIT: "transform_union_split",
            TransformKind.BASELINE_TRANSLATE: "translate",
            TransformKind.BASELINE_OFF_BY_ONE: "off_by_one",
        }
        if kind is TransformKind.CHOOSE_INVERT_ARG:
            return self.choose_invert_arg(d, params)
        if kind is TransformKind.INPUT_GENERATION:
            return self.gen_test_inputs(d, params)
        if kind not in templates:
            raise ValueError(f"transform() does not handle {kind}")

        roles = {
            TransformKind.INVERSE: lambda: Role(RoleKind.INVERSE),
            TransformKind.PARTIAL_INVERSE: lambda: Role(RoleKind.PARTIAL_INVERSE, arg_index),
            TransformKind.SET_VALUED_INVERSE: lambda: Role(
                RoleKind.SET_VALUED_INVERSE, arg_index
            ),
            TransformKind.ENUMERATION: lambda: Role(RoleKind.ENUMERATION),
            TransformKind.POINTWISE: lambda: Role(RoleKind.POINTWISE),
            TransformKind.BASELINE_TRANSLATE: lambda: d.role,
            TransformKind.BASELINE_OFF_BY_ONE: lambda: d.role,
        }

        if kind is TransformKind.UNION_SPLIT:
            some_sig, none_sig = transform_signature(d.signature, kind)
            prompt = render_template(
                templates[kind],
                ORIG_SIGN=_render_signature(d.signature),
                SOME_SIGN=_render_signature(some_sig),
                NONE_SIGN=_render_signature(none_sig),
                PROBLEM=d.text,
            )
            text = self._request(
                f"transform:{kind.value}:{d.id}", prompt, params, 0,
                temperature=self.TRANSFORM_TEMPERATURE,
            )
            parsed = json.loads(_strip_fence(text))
            return [
                ProblemDescription(
                    f"{d.id}#some", parsed["some"], some_sig,
                    Role(RoleKind.UNION_BRANCH, branch_tag="some"),
                ),
                ProblemDescription(
                    f"{d.id}#none", parsed["none"], none_sig,
                    Role(RoleKind.UNION_BRANCH, branch_tag="none"),
                ),
            ]

        new_sig = transform_signature(d.signature, kind, arg_index)
        fields = {
            "ORIG_SIGN": _render_signature(d.signature),
            "INV_SIGN": _render_signature(new_sig),
            "PROBLEM": d.text,
        }
        if kind in (TransformKind.PARTIAL_INVERSE, TransformKind.SET_VALUED_INVERSE):
            fields["NEW_ARG"] = "out"
            fields["INV_ARG"] = d.signature.params[arg_index][0]
        prompt = render_template(templates[kind], **fields)
        text = self._request(
            f"transform:{kind.value}:{d.id}", prompt, params, 0,
            temperature=self.TRANSFORM_TEMPERATURE,
        )
        suffix = {"inverse": "inv", "partial-inverse": "pinv", "set-valued-inverse": "sinv"}.get(
            kind.value, kind.value
        )
        return ProblemDescription(f"{d.id}#{suffix}", text.strip(), new_sig, roles[kind]())

    def gen_test_inputs(
        self,
        d: ProblemDescription,
        params: SamplingParams,
        *,
        budget: int = 50,
        type_check: Optional[Callable[[str, Value], bool]] = None,
    ) -> TestInputSet:
        """Request input batches until the budget is hit or generation stalls.

        Stalls after two consecutive batches adding no new canonical inputs.
        Inputs violating the declared parameter types are dropped.
        """
        check = type_check or type_matches
        inputs: List[tuple] = []
        seen = set()
        dropped = 0
        stale = 0
        batch = 0
        while len(inputs) < budget and stale < 2:
            prompt = render_template(
                "input_gen",
                SIGNATURE=_render_signature(d.signature),
                PROBLEM=d.text,
                BATCH=batch,
            )
            text = self._request(f"inputs:{d.id}", prompt, params, batch)
            added = 0
            for row in _parse_json_rows(text):
                try:
                    values = tuple(decode_wire_value(x) for x in row)
                except WireError:
                    dropped += 1
                    continue
                if len(values) != d.signature.arity or not all(
                    isinstance(v, Normal) and check(tag, v)
                    for v, (_, tag) in zip(values, d.signature.params)
                ):
                    dropped += 1
                    continue
                key = args_key(values)
                if key in seen:
                    continue
                seen.add(key)
                inputs.append(values)
                added += 1
                if len(inputs) >= budget:
                    break
            stale = stale + 1 if added == 0 else 0
            batch += 1
        if not inputs:
            raise EmptyResponseError(f"no valid inputs generated for {d.id!r}")
        return TestInputSet(d.id, tuple(inputs), Provenance.LLM_GENERATED)

    def gen_baseline_artifacts(
        self, d: ProblemDescription, kind: TransformKind, params: SamplingParams
    ) -> List[Union[PostconditionWitness, TestWitness, str]]:
        """Witness artifacts: per-test candidates or postcondition sources.

        Returns source strings for postconditions and per-test rows for
        assertion tests; wrapping into executable candidates is the caller's
        concern (fixture tables in the bundled corpora, worker-backed
        candidates in live runs).
        """
        if kind is TransformKind.BASELINE_POSTCONDITION:
            prompt = render_template(
                "baseline_postcondition",
                SIGNATURE=_render_signature(d.signature),
                PROBLEM=d.text,
            )
            sources = []
            for i in range(params.n):
                text = self._request(f"baseline:post:{d.id}", prompt, params, i)
                block = extract_code_block(text)
                if block:
                    sources.append(block)
            return sources
        if kind is TransformKind.BASELINE_TESTS:
            prompt = render_template(
                "baseline_tests",
                SIGNATURE=_render_signature(d.signature),
                PROBLEM=d.text,
            )
            rows = []
            for i in range(params.n):
                text = self._request(f"baseline:tests:{d.id}", prompt, params, i)
                rows.extend(_parse_json_rows(text))
            return rows
        raise ValueError(f"{kind} is not a baseline artifact kind")


def _strip_fence(text: str) -> str:
    block = extract_code_block(text)
    return block if block is not None else text


def _parse_json_rows(text: str) -> List:
    try:
        data = json.loads(_strip_fence(text).strip())
    except json.JSONDecodeError:
        return []
    return data if isinstance(data, list) else []


def type_matches(tag: str, value: Normal) -> bool:
    """Shallow structural check of a payload against a semantic type tag."""
    payload = value.payload
    tag = tag.strip()
    if tag.startswith("optional[") and tag.endswith("]"):
        return payload is None or type_matches(tag[9:-1], value)
    if tag == "int":
        return isinstance(payload, int) and not isinstance(payload, bool)
    if tag == "bool":
        return isinstance(payload, bool)
    if tag == "str":
        return isinstance(payload, str)
    if tag == "none":
        return payload is None
    if tag.startswith("list[") and tag.endswith("]"):
        inner = tag[5:-1]
        return isinstance(payload, list) and all(
            type_matches(inner, Normal(x)) for x in payload
        )
    if tag.startswith("tuple[") and tag.endswith("]"):
        inner = [t.strip() for t in tag[6:-1].split(",")]
        return (
            isinstance(payload, tuple)
            and len(payload) == len(inner)
            and all(type_matches(t, Normal(x)) for t, x in zip(inner, payload))
        )
    return True  # unknown tags are not filtered
