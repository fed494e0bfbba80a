"""Executes candidate programs with timeouts, mapping failures to specials.

Fixture-backed candidates are table lookups. Runner-backed candidates talk to
one worker process per candidate over newline-delimited frames; a crash or
timeout yields the demonic value, the worker's designated invalid-input
failure yields the undefined value. Derived candidates call back into the
executor.
"""

from __future__ import annotations

import os
import select
import shlex
import subprocess
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from .problems import (
    CandidateProgram,
    Derived,
    FixtureBacked,
    RunnerBacked,
    TestInputSet,
    args_key,
)
from .values import DEMONIC, Special, Value
from .wire import WireError, decode_response_frame, encode_request_frame

WORKER_CMD_ENV = "TRI_WORKER_CMD"


@dataclass(frozen=True)
class ExecutionConfig:
    timeout: float = 10.0
    max_output_bytes: int = 1_000_000
    worker_pool_size: int = 4

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_output_bytes <= 0:
            raise ValueError("max_output_bytes must be positive")


@dataclass(frozen=True)
class ExecutionOutcome:
    value: Value
    elapsed: float
    raw: Optional[str] = None


class FixtureGapError(Exception):
    """A fixture table is missing an entry for a used input."""


def _worker_argv(backend: RunnerBacked) -> List[str]:
    override = os.environ.get(WORKER_CMD_ENV)
    if override:
        prefix = shlex.split(override)
    elif backend.command:
        prefix = list(backend.command)
    else:
        raise RuntimeError(
            "runner-backed candidate has no launch command and "
            f"{WORKER_CMD_ENV} is not set"
        )
    return prefix + [backend.source_path, backend.entrypoint, *backend.extra_args]


class _Worker:
    """One worker process, one in-flight request at a time."""

    def __init__(self, argv: Sequence[str]):
        self.proc = subprocess.Popen(
            list(argv),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            bufsize=0,
        )
        self.alive = True
        self._buf = bytearray()
        self._seq = 0

    def next_id(self) -> str:
        self._seq += 1
        return f"w{self._seq}"

    def kill(self) -> None:
        self.alive = False
        try:
            self.proc.kill()
            self.proc.wait(timeout=5)
        except Exception:
            pass

    def send(self, frame: bytes) -> bool:
        try:
            self.proc.stdin.write(frame)
            self.proc.stdin.flush()
            return True
        except (BrokenPipeError, OSError):
            return False

    def read_line(self, deadline: float, max_bytes: int) -> Optional[bytes]:
        """Read one frame before the deadline; None on timeout/EOF/overflow."""
        fd = self.proc.stdout.fileno()
        while True:
            nl = self._buf.find(b"\n")
            if nl >= 0:
                line = bytes(self._buf[:nl])
                del self._buf[: nl + 1]
                return line
            if len(self._buf) > max_bytes:
                return None
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            ready, _, _ = select.select([fd], [], [], min(remaining, 0.25))
            if not ready:
                continue
            chunk = os.read(fd, 65536)
            if not chunk:
                return None
            self._buf += chunk


class Executor:
    """Drives candidate executions with per-candidate workers and caching.

    Candidates are treated as deterministic: the first observed output for an
    argument tuple is the output from then on. Workers are reused across
    inputs; a worker that dies stays demonic for the rest of its batch.
    """

    def __init__(self, cfg: Optional[ExecutionConfig] = None):
        self.cfg = cfg or ExecutionConfig()
        self._workers: Dict[str, _Worker] = {}
        self._cache: Dict[tuple, ExecutionOutcome] = {}
        self._lock = threading.Lock()

    def __enter__(self) -> "Executor":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        for worker in self._workers.values():
            worker.kill()
        self._workers.clear()

    def execute(self, candidate: CandidateProgram, args: Sequence[Value]) -> ExecutionOutcome:
        args = tuple(args)
        for a in args:
            if isinstance(a, Special):
                raise ValueError("candidate arguments must not be special values")
        key = (candidate.id, args_key(args))
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached
        outcome = self._run(candidate, args)
        with self._lock:
            self._cache.setdefault(key, outcome)
            return self._cache[key]

    def _run(self, candidate: CandidateProgram, args: tuple) -> ExecutionOutcome:
        backend = candidate.backend
        if isinstance(backend, FixtureBacked):
            key = args_key(args)
            if key not in backend.table:
                raise FixtureGapError(
                    f"fixture for candidate {candidate.id!r} has no entry for key {key!r}"
                )
            return ExecutionOutcome(backend.table[key], 0.0)
        if isinstance(backend, Derived):
            start = time.monotonic()
            value = backend.compute(args, self)
            return ExecutionOutcome(value, time.monotonic() - start)
        if isinstance(backend, RunnerBacked):
            return self._run_worker(candidate, backend, args)
        raise TypeError(f"unknown backend {type(backend).__name__}")

    def _run_worker(
        self, candidate: CandidateProgram, backend: RunnerBacked, args: tuple
    ) -> ExecutionOutcome:
        start = time.monotonic()
        worker = self._workers.get(candidate.id)
        if worker is not None and not worker.alive:
            return ExecutionOutcome(DEMONIC, 0.0, "worker previously died")
        if worker is None:
            try:
                worker = _Worker(_worker_argv(backend))
            except OSError as exc:
                return ExecutionOutcome(DEMONIC, time.monotonic() - start, f"spawn failed: {exc}")
            self._workers[candidate.id] = worker

        try:
            frame_id = worker.next_id()
            request = encode_request_frame(frame_id, args)
        except WireError as exc:
            return ExecutionOutcome(DEMONIC, time.monotonic() - start, str(exc))

        deadline = time.monotonic() + self.cfg.timeout
        if not worker.send(request):
            worker.kill()
            return ExecutionOutcome(DEMONIC, time.monotonic() - start, "worker pipe closed")
        line = worker.read_line(deadline, self.cfg.max_output_bytes)
        elapsed = time.monotonic() - start
        if line is None:
            worker.kill()
            return ExecutionOutcome(DEMONIC, elapsed, "timeout, crash or oversized output")
        try:
            got_id, value, message = decode_response_frame(line)
        except WireError as exc:
            worker.kill()
            return ExecutionOutcome(DEMONIC, elapsed, f"malformed frame: {exc}")
        if got_id != frame_id:
            worker.kill()
            return ExecutionOutcome(DEMONIC, elapsed, "response id mismatch")
        return ExecutionOutcome(value, elapsed, message)

    def execute_batch(
        self, candidate: CandidateProgram, inputs: TestInputSet
    ) -> List[ExecutionOutcome]:
        """Run all inputs in order; one demonic outcome never aborts the rest."""
        outcomes = []
        for args in inputs.inputs:
            outcomes.append(self.execute(candidate, args))
        return outcomes

    def execute_all(
        self, candidates: Sequence[CandidateProgram], inputs: TestInputSet
    ) -> Dict[str, List[ExecutionOutcome]]:
        """Batches for distinct candidates, up to worker_pool_size in parallel."""
        results: Dict[str, List[ExecutionOutcome]] = {}
        workers = max(1, min(self.cfg.worker_pool_size, len(candidates)))
        if workers == 1 or all(
            isinstance(c.backend, FixtureBacked) for c in candidates
        ):
            for c in candidates:
                results[c.id] = self.execute_batch(c, inputs)
            return results
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {c.id: pool.submit(self.execute_batch, c, inputs) for c in candidates}
            for cid, fut in futures.items():
                results[cid] = fut.result()
        return results


def execute(
    candidate: CandidateProgram, args: Sequence[Value], cfg: Optional[ExecutionConfig] = None
) -> ExecutionOutcome:
    with Executor(cfg) as ex:
        return ex.execute(candidate, args)


def execute_batch(
    candidate: CandidateProgram, inputs: TestInputSet, cfg: Optional[ExecutionConfig] = None
) -> List[ExecutionOutcome]:
    with Executor(cfg) as ex:
        return ex.execute_batch(candidate, inputs)
