"""Client side of the external-executor protocol.

An adapter is a child process that evaluates modules in some other
runtime and answers over its standard streams, one JSON object per
line. The conversation starts with a capability handshake:

  -> {"cmd": "hello"}
  <- {"name": ..., "ops": [...], "dtypes": [...], "pipelines": [...],
      "float_rtol": ...}

after which any number of run requests follow:

  -> {"cmd": "run", "ir_text": ..., "pipeline": [...], "inputs": [value...]}
  <- {"status": "ok", "outputs": value}
   | {"status": "error", "trace": ...}
   | {"status": "unsupported"}

A value is {"kind": "tensor", "dtype", "shape", "data"} or
{"kind": "tuple", "items": [...]}. Floats travel as JSON numbers with
NaN/Infinity literals allowed (both ends must parse them).

The client enforces a per-request timeout through a reader thread; a
timeout or a dead process raises AdapterError and poisons the client so
the campaign skips it from then on.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
from typing import Any, List, Optional, Sequence, Tuple

from .dtypes import TensorValue, dtype_from_name

DEFAULT_TIMEOUT = 10.0


class AdapterError(Exception):
    pass


def encode_value(v: Any) -> dict:
    if isinstance(v, TensorValue):
        return {
            "kind": "tensor",
            "dtype": v.dtype.value,
            "shape": list(v.shape),
            "data": list(v.data),
        }
    if isinstance(v, tuple):
        return {"kind": "tuple", "items": [encode_value(x) for x in v]}
    raise AdapterError(f"cannot encode value of type {type(v).__name__}")


def decode_value(d: Any) -> Any:
    if not isinstance(d, dict):
        raise AdapterError("malformed value payload")
    kind = d.get("kind")
    if kind == "tuple":
        return tuple(decode_value(x) for x in d.get("items", []))
    if kind == "tensor":
        try:
            dt = dtype_from_name(d["dtype"])
            shape = tuple(int(x) for x in d["shape"])
            raw = d["data"]
            if dt.is_bool:
                data = tuple(bool(x) for x in raw)
            elif dt.is_float:
                data = tuple(float(x) for x in raw)
            else:
                data = tuple(int(x) for x in raw)
            return TensorValue(dt, shape, data)
        except (KeyError, TypeError, ValueError) as e:
            raise AdapterError(f"malformed tensor payload: {e}")
    raise AdapterError(f"unknown value kind {kind!r}")


class AdapterClient:
    """One child process speaking the line protocol."""

    def __init__(self, argv: Sequence[str], timeout: float = DEFAULT_TIMEOUT):
        self.argv = tuple(argv)
        self.timeout = timeout
        self.alive = False
        self._lock = threading.Lock()
        try:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
            )
        except OSError as e:
            raise AdapterError(f"cannot launch adapter {self.argv}: {e}")
        self._lines: "queue.Queue[Optional[str]]" = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self.alive = True
        hello = self._request({"cmd": "hello"})
        try:
            self.name = str(hello["name"])
            self.ops = frozenset(hello["ops"])
            self.dtypes = frozenset(hello["dtypes"])
            self.pipelines = tuple(hello.get("pipelines", ()))
            self.float_rtol = float(hello.get("float_rtol", 1e-5))
        except (KeyError, TypeError) as e:
            self._poison()
            raise AdapterError(f"bad hello response: {e}")

    def _pump(self) -> None:
        try:
            for line in self._proc.stdout:
                self._lines.put(line)
        finally:
            self._lines.put(None)

    def _poison(self) -> None:
        self.alive = False
        try:
            self._proc.kill()
        except OSError:
            pass

    def _request(self, obj: dict) -> dict:
        if not self.alive:
            raise AdapterError(f"adapter {self.argv[0]} is no longer running")
        with self._lock:
            try:
                self._proc.stdin.write(json.dumps(obj) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as e:
                self._poison()
                raise AdapterError(f"adapter write failed: {e}")
            try:
                line = self._lines.get(timeout=self.timeout)
            except queue.Empty:
                self._poison()
                raise AdapterError(
                    f"adapter {self.argv[0]} timed out after {self.timeout}s"
                )
        if line is None:
            self._poison()
            raise AdapterError(f"adapter {self.argv[0]} exited")
        try:
            reply = json.loads(line)
        except ValueError as e:
            self._poison()
            raise AdapterError(f"adapter sent malformed JSON: {e}")
        if not isinstance(reply, dict):
            self._poison()
            raise AdapterError("adapter reply is not an object")
        return reply

    def supports(self, ops, dtypes) -> bool:
        return self.alive and set(ops) <= self.ops and set(dtypes) <= self.dtypes

    def run(
        self,
        ir_text: str,
        pipeline: Sequence[str],
        inputs: Sequence[Any],
    ) -> Tuple[str, Any]:
        """('ok', outputs) | ('error', trace) | ('unsupported', None)."""
        reply = self._request(
            {
                "cmd": "run",
                "ir_text": ir_text,
                "pipeline": list(pipeline),
                "inputs": [encode_value(v) for v in inputs],
            }
        )
        status = reply.get("status")
        if status == "ok":
            return "ok", decode_value(reply.get("outputs"))
        if status == "error":
            return "error", str(reply.get("trace", "adapter error"))
        if status == "unsupported":
            return "unsupported", None
        self._poison()
        raise AdapterError(f"adapter sent unknown status {status!r}")

    def close(self) -> None:
        self.alive = False
        try:
            self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.terminate()
            self._proc.wait(timeout=2.0)
        except (OSError, subprocess.TimeoutExpired):
            self._proc.kill()

    def __enter__(self) -> "AdapterClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
