"""Response sources: replay files and live external processes.

Both speak labels, never raw text; mapping responses to class labels
happens upstream. A replay file is UTF-8 with one JSON object per line,
fields exactly {"prompt_id": str, "responses": [int, ...]} plus an
optional "meta" object. An external source is a child process speaking
line-delimited JSON: it announces {"ready": true}, then answers each
request {"prompt_id": ..., "draw": ...} with
{"prompt_id": ..., "draw": ..., "label": ...}.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .estimator import ResponseCounts

__all__ = [
    "ReplayRecord",
    "ReplayError",
    "SourceProtocolError",
    "SourceFailure",
    "open_replay",
    "write_replay",
    "counts_from_record",
    "record_from_counts",
    "ExternalSource",
]


class ReplayError(ValueError):
    """Replay file failed to parse or validate."""


class SourceProtocolError(RuntimeError):
    """The external process violated the line protocol."""


class SourceFailure(RuntimeError):
    """The external source produced no usable data."""


@dataclass(frozen=True)
class ReplayRecord:
    prompt_id: str
    responses: tuple[int, ...]
    meta: Optional[dict] = None


_ALLOWED_FIELDS = {"prompt_id", "responses", "meta"}


def _validate_record(
    prompt_id, responses, meta, declared_classes: int, where: str
) -> ReplayRecord:
    if not isinstance(prompt_id, str) or not prompt_id:
        raise ReplayError(f"{where}: prompt_id must be a nonempty string")
    if not isinstance(responses, (list, tuple)) or not responses:
        raise ReplayError(f"{where}: responses must be a nonempty list")
    labels = []
    for r in responses:
        if isinstance(r, bool) or not isinstance(r, int):
            raise ReplayError(f"{where}: non-integer label {r!r}")
        if not 0 <= r < declared_classes:
            raise ReplayError(
                f"{where}: label {r} outside declared range "
                f"[0, {declared_classes})"
            )
        labels.append(r)
    if meta is not None and not isinstance(meta, dict):
        raise ReplayError(f"{where}: meta must be an object")
    return ReplayRecord(prompt_id=prompt_id, responses=tuple(labels), meta=meta)


def open_replay(path, declared_classes: int = 2) -> list[ReplayRecord]:
    """Parse a replay file; records come back in file order.

    Malformed lines are reported with their line number; out-of-range
    labels name the offending record and value. An empty file is an
    empty sequence, not an error.
    """
    if declared_classes < 2:
        raise ValueError(f"declared_classes must be >= 2, got {declared_classes}")
    records = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ReplayError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise ReplayError(f"line {lineno}: expected a JSON object")
            unknown = set(obj) - _ALLOWED_FIELDS
            if unknown:
                raise ReplayError(
                    f"line {lineno}: unknown field(s) {sorted(unknown)}"
                )
            where = f"line {lineno} (prompt_id={obj.get('prompt_id')!r})"
            records.append(
                _validate_record(
                    obj.get("prompt_id"),
                    obj.get("responses"),
                    obj.get("meta"),
                    declared_classes,
                    where,
                )
            )
    return records


def write_replay(records: Sequence[ReplayRecord], path) -> None:
    """Inverse of open_replay; one compact JSON object per line."""
    with open(path, "w", encoding="utf-8") as handle:
        for rec in records:
            obj = {"prompt_id": rec.prompt_id, "responses": list(rec.responses)}
            if rec.meta is not None:
                obj["meta"] = rec.meta
            handle.write(json.dumps(obj, separators=(",", ":")) + "\n")


def counts_from_record(record: ReplayRecord, classes: int = 2) -> ResponseCounts:
    """Tally a record's labels: k of n for binary, per-class counts else."""
    n = len(record.responses)
    if classes < 2:
        raise ValueError(f"classes must be >= 2, got {classes}")
    if classes == 2:
        k = sum(1 for r in record.responses if r == 1)
        return ResponseCounts(prompt_id=record.prompt_id, n=n, k=k)
    tally = [0] * classes
    for r in record.responses:
        tally[r] += 1
    return ResponseCounts(prompt_id=record.prompt_id, n=n, counts=tuple(tally))


def record_from_counts(counts: ResponseCounts) -> ReplayRecord:
    """Expand counts back into a label sequence (ones first, then zeros;
    class order for multiclass). Only the tallies are meaningful."""
    if counts.kind == "binary":
        labels = [1] * counts.k + [0] * (counts.n - counts.k)
    else:
        labels = []
        for c, tally in enumerate(counts.counts):
            labels.extend([c] * tally)
    return ReplayRecord(prompt_id=counts.prompt_id, responses=tuple(labels))


class _Reader(threading.Thread):
    """Pushes stdout lines (or EOF) from the child into a queue."""

    def __init__(self, stream, out: queue.Queue):
        super().__init__(daemon=True)
        self._stream = stream
        self._out = out

    def run(self):
        for line in self._stream:
            self._out.put(line)
        self._out.put(None)


@dataclass
class _Pending:
    prompt_id: str
    draw: int
    deadline: float
    attempts: int


class ExternalSource:
    """Drive a label-producing child process over the line protocol.

    Up to `window` requests stay in flight; replies are reconciled by
    (prompt_id, draw), so arrival order does not matter. A request that
    times out is retried up to `retries` times, after which its whole
    prompt is marked failed and excluded from the results.
    """

    def __init__(
        self,
        command: Sequence[str],
        timeout: float = 10.0,
        retries: int = 2,
        window: int = 8,
        declared_classes: int = 2,
    ):
        if timeout <= 0:
            raise ValueError("timeout must be positive")
        if retries < 0:
            raise ValueError("retries must be >= 0")
        if window < 1:
            raise ValueError("window must be >= 1")
        self._command = list(command)
        self._timeout = timeout
        self._retries = retries
        self._window = window
        self._classes = declared_classes
        self._proc: Optional[subprocess.Popen] = None
        self._queue: queue.Queue = queue.Queue()

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.close()

    def start(self) -> None:
        self._proc = subprocess.Popen(
            self._command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        _Reader(self._proc.stdout, self._queue).start()
        line = self._next_line(self._timeout)
        if line is None:
            raise SourceProtocolError("source exited before signalling readiness")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SourceProtocolError(f"bad readiness line: {line!r}") from exc
        if obj != {"ready": True}:
            raise SourceProtocolError(f"expected {{'ready': true}}, got {obj!r}")

    def close(self) -> None:
        if self._proc is None:
            return
        try:
            self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()
        self._proc = None

    def _next_line(self, timeout: float) -> Optional[str]:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return ""

    def _send(self, prompt_id: str, draw: int) -> None:
        request = json.dumps({"prompt_id": prompt_id, "draw": draw})
        try:
            self._proc.stdin.write(request + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise SourceProtocolError("source closed its input") from exc

    def _parse_reply(self, line: str) -> tuple[str, int, int]:
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SourceProtocolError(f"malformed reply line: {line!r}") from exc
        if not isinstance(obj, dict) or set(obj) != {"prompt_id", "draw", "label"}:
            raise SourceProtocolError(f"reply must carry prompt_id/draw/label: {obj!r}")
        label = obj["label"]
        if isinstance(label, bool) or not isinstance(label, int):
            raise SourceProtocolError(f"non-integer label in reply: {obj!r}")
        if not 0 <= label < self._classes:
            raise SourceProtocolError(
                f"label {label} outside declared range [0, {self._classes}) "
                f"for prompt {obj['prompt_id']!r}"
            )
        return obj["prompt_id"], obj["draw"], label

    def collect(
        self, prompt_ids: Sequence[str], n: int
    ) -> tuple[list[ReplayRecord], dict[str, str]]:
        """Request n draws per prompt; returns (records, failures).

        Failed prompts (retry budget exhausted) appear only in the
        failures map, keyed by prompt id with a reason string.
        """
        if self._proc is None:
            raise SourceFailure("source not started")
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        todo = [(pid, d) for pid in prompt_ids for d in range(n)]
        results: dict[tuple[str, int], int] = {}
        pending: dict[tuple[str, int], _Pending] = {}
        failures: dict[str, str] = {}
        cursor = 0

        while True:
            # Top up the in-flight window; the loop either sends or skips,
            # so it always terminates with pending full or todo drained.
            while cursor < len(todo) and len(pending) < self._window:
                pid, draw = todo[cursor]
                cursor += 1
                if pid in failures:
                    continue
                self._send(pid, draw)
                pending[(pid, draw)] = _Pending(
                    pid, draw, time.monotonic() + self._timeout, 0
                )
            if not pending:
                break
            next_deadline = min(p.deadline for p in pending.values())
            wait = max(0.0, next_deadline - time.monotonic())
            line = self._next_line(wait + 1e-3)
            if line is None:
                raise SourceProtocolError(
                    "source exited with requests still pending"
                )
            if line:
                pid, draw, label = self._parse_reply(line)
                entry = pending.pop((pid, draw), None)
                if entry is None:
                    if pid in failures or (pid, draw) in results:
                        continue  # stale or duplicate reply
                    raise SourceProtocolError(
                        f"unsolicited reply for ({pid!r}, {draw})"
                    )
                results[(pid, draw)] = label
                continue
            # deadline sweep
            now = time.monotonic()
            for key in [k for k, p in pending.items() if p.deadline <= now]:
                entry = pending.pop(key, None)
                if entry is None:
                    continue  # dropped when its prompt failed earlier in this sweep
                if entry.attempts < self._retries:
                    entry.attempts += 1
                    entry.deadline = now + self._timeout
                    self._send(entry.prompt_id, entry.draw)
                    pending[key] = entry
                else:
                    failures[entry.prompt_id] = (
                        f"timed out after {entry.attempts + 1} attempts"
                    )
                    for k in [k for k in pending if k[0] == entry.prompt_id]:
                        pending.pop(k)

        records = []
        for pid in prompt_ids:
            if pid in failures:
                continue
            labels = [results[(pid, d)] for d in range(n)]
            records.append(ReplayRecord(prompt_id=pid, responses=tuple(labels)))
        return records, failures
