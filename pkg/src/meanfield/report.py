"""Deterministic CSV/JSON writers.

Floats are written with 17 significant digits, keys and columns keep their
insertion order, and lines end with LF, so equal inputs give equal bytes.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .sim import EnsembleStats


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _scalar(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format_float(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_scalar(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _json_string(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch in '"\\':
            out.append("\\" + ch)
        elif ch == "\n":
            out.append("\\n")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def json_text(value: Any, indent: int = 2) -> str:
    """JSON with 17-significant-digit floats; non-finite floats become null."""

    def emit(v, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if v is None:
            return "null"
        if isinstance(v, str):
            return _json_string(v)
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return format_float(v) if math.isfinite(v) else "null"
        if isinstance(v, np.ndarray):
            v = v.tolist()
        if isinstance(v, Mapping):
            if not v:
                return "{}"
            items = [f"{pad}{_json_string(str(k))}: {emit(x, level + 1)}" for k, x in v.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(v, (list, tuple)):
            if not v:
                return "[]"
            items = [f"{pad}{emit(x, level + 1)}" for x in v]
            return "[\n" + ",\n".join(items) + "\n" + end + "]"
        raise TypeError(f"cannot serialise {type(v).__name__}")

    return emit(value, 0) + "\n"


def write_text(path, text: str) -> None:
    with open(Path(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def trajectory_header(k: int) -> list[str]:
    return ["t", *[f"mean_x{i + 1}" for i in range(k)], "sumsq", "varsum", "se_mean_max", "se_sumsq"]


def trajectory_rows(stats: EnsembleStats):
    times = stats.grid.times
    se_max = stats.se_mean.max(axis=1)
    for g, t in enumerate(times):
        yield [t, *stats.mean[g], stats.sumsq[g], stats.varsum[g], se_max[g], stats.se_sumsq[g]]


def trajectory_csv(stats: EnsembleStats) -> str:
    return csv_text(trajectory_header(stats.k), trajectory_rows(stats))


def trajectory_json(stats: EnsembleStats) -> str:
    header = trajectory_header(stats.k)
    return json_text({
        "replicas": stats.replicas,
        "columns": header,
        "rows": [list(r) for r in trajectory_rows(stats)],
    })
