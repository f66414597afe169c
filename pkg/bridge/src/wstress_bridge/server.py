"""v1 line-protocol server loop and predictor loading.

Protocol (newline-delimited UTF-8 on stdin/stdout):

    client: HELLO v1 <cls|reg> <d>          server: READY
    client: <name_1>,...,<name_d>
    client: PREDICT <n>                     server: n value lines then END,
    client: n comma-separated rows                  or one ERR <message> line
    client: QUIT                            server exits 0

The server reads a full batch before answering, so after an ERR both sides
are back at the command boundary and the loop continues.  Numbers are
rendered with ``repr`` (shortest round-trip decimal).
"""

from __future__ import annotations

import importlib.util
import math
import pickle
import sys
from pathlib import Path

TASKS = ("cls", "reg")


class BridgeError(RuntimeError):
    """Predictor source cannot be loaded or is not callable."""


def load_predictor(source) -> "callable":
    """Load a batch predictor from a script or a pickled model.

    ``*.py`` files must export ``predict(rows)`` (or an object named
    ``PREDICTOR`` with a ``predict`` method); anything else is unpickled and
    must expose ``predict`` or be callable itself.  The callable receives a
    list of row lists of floats and must return one finite real per row.
    """
    source = Path(source)
    if not source.exists():
        raise BridgeError(f"predictor source {source} does not exist")
    if source.suffix == ".py":
        spec = importlib.util.spec_from_file_location("bridge_predictor", source)
        module = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(module)
        if hasattr(module, "predict") and callable(module.predict):
            return module.predict
        holder = getattr(module, "PREDICTOR", None)
        if holder is not None and hasattr(holder, "predict"):
            return holder.predict
        raise BridgeError(f"{source} exports neither predict() nor PREDICTOR")
    with source.open("rb") as fh:
        model = pickle.load(fh)
    if hasattr(model, "predict"):
        return model.predict
    if callable(model):
        return model
    raise BridgeError(f"unpickled object from {source} has no predict method")


def _reply(stdout, text: str) -> None:
    stdout.write(text + "\n")
    stdout.flush()


def serve(predictor, task: str, stdin=None, stdout=None) -> int:
    """Run the protocol loop until QUIT or end of stream; returns exit code."""
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    if task not in TASKS:
        raise BridgeError(f"task must be one of {TASKS}, got {task!r}")

    hello = stdin.readline()
    if hello == "":
        return 0
    parts = hello.rstrip("\n").split(" ")
    if len(parts) != 4 or parts[0] != "HELLO" or parts[1] != "v1":
        _reply(stdout, "ERR unsupported handshake")
        return 1
    if parts[2] not in TASKS:
        _reply(stdout, f"ERR unknown task {parts[2]}")
        return 1
    if parts[2] != task:
        _reply(stdout, f"ERR serving task {task}, client asked for {parts[2]}")
        return 1
    try:
        d = int(parts[3])
    except ValueError:
        _reply(stdout, "ERR malformed dimension")
        return 1
    names = stdin.readline().rstrip("\n").split(",")
    if len(names) != d:
        _reply(stdout, f"ERR expected {d} feature names, got {len(names)}")
        return 1
    _reply(stdout, "READY")

    while True:
        line = stdin.readline()
        if line == "" or line.rstrip("\n") == "QUIT":
            return 0
        head = line.rstrip("\n").split(" ")
        if len(head) != 2 or head[0] != "PREDICT":
            _reply(stdout, "ERR expected PREDICT <n> or QUIT")
            return 1
        try:
            n = int(head[1])
            if n < 0:
                raise ValueError
        except ValueError:
            _reply(stdout, "ERR malformed batch size")
            return 1
        raw = [stdin.readline().rstrip("\n") for _ in range(n)]
        _reply(stdout, _run_batch(predictor, task, d, raw))


def _run_batch(predictor, task: str, d: int, raw: list[str]) -> str:
    rows = []
    for text in raw:
        cells = text.split(",") if text else []
        if len(cells) != d:
            return f"ERR expected {d} values per row, got {len(cells)}"
        try:
            row = [float(c) for c in cells]
        except ValueError:
            return f"ERR cannot parse row {text!r}"
        if not all(math.isfinite(v) for v in row):
            return f"ERR non-finite value in row {text!r}"
        rows.append(row)
    try:
        out = [float(v) for v in predictor(rows)]
    except Exception as exc:  # predictor failures abort the batch, not the loop
        return f"ERR {exc}"
    if len(out) != len(rows):
        return f"ERR predictor returned {len(out)} values for {len(rows)} rows"
    for v in out:
        if not math.isfinite(v):
            return "ERR predictor returned a non-finite value"
        if task == "cls" and v not in (0.0, 1.0):
            return f"ERR classification value must be 0 or 1, got {v!r}"
    return "\n".join([repr(v) for v in out] + ["END"])
