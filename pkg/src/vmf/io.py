"""Deterministic JSON output.

Floats are written with 17 significant digits so a value read back is the
same double; non-finite floats become ``null``. Keys keep insertion order.
Run metadata (time, platform) goes to a separate ``run_meta.json`` so data
files are byte-identical across reruns.
"""
from __future__ import annotations

import json
import math
import os
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    # keep floats recognizably floats
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def dumps(obj, indent: int = 2) -> str:
    def enc(o, level: int) -> str:
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if o is None or isinstance(o, (bool, np.bool_)):
            return json.dumps(None if o is None else bool(o))
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return _fmt(float(o))
        if isinstance(o, (str, Path)):
            return json.dumps(str(o))
        if isinstance(o, np.ndarray):
            o = o.tolist()
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in o):
                return "[" + ", ".join(enc(v, level + 1) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in o) + "\n" + end + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0) + "\n"


def write_json(path: Path | str, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path: Path | str):
    return json.loads(Path(path).read_text())


def write_run_meta(out_dir: Path | str, command: str, config: Path | str, seed: int, threads: int) -> None:
    from . import __version__

    meta = {
        "command": command,
        "config": str(config),
        "seed": seed,
        "threads": threads,
        "version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "pid": os.getpid(),
        "started": datetime.now(timezone.utc).isoformat(),
    }
    Path(out_dir, "run_meta.json").write_text(json.dumps(meta, indent=2) + "\n")
