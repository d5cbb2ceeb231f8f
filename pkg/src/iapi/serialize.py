"""Deterministic plain-text output: JSON with %.17g floats, CSV series.

The standard json module gives no control over float rendering, so a
small writer handles the nested dict/list/scalar payloads this package
produces.  No timestamps or environment data are ever emitted; identical
inputs serialize to identical bytes.
"""

from __future__ import annotations

import hashlib
import json
from typing import IO

import numpy as np

from .errors import DimensionMismatchError
from .model import Ball, Box, Region, SublevelSet
from .policy_iteration import PIHistory
from .verify import CheckReport


def fmt_float(x: float) -> str:
    """Full-precision decimal rendering; round-trips every double."""
    return format(float(x), ".17g")


def _write_json(value, out: list[str]) -> None:
    if value is None:
        out.append("null")
    elif isinstance(value, (bool, np.bool_)):
        out.append("true" if value else "false")
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        if not np.isfinite(value):
            raise DimensionMismatchError(f"cannot serialize non-finite float {value!r}")
        out.append(fmt_float(float(value)))
    elif isinstance(value, dict):
        out.append("{")
        for i, (key, item) in enumerate(value.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(str(key), ensure_ascii=False))
            out.append(": ")
            _write_json(item, out)
        out.append("}")
    elif isinstance(value, (list, tuple, np.ndarray)):
        out.append("[")
        items = value.tolist() if isinstance(value, np.ndarray) else value
        for i, item in enumerate(items):
            if i:
                out.append(", ")
            _write_json(item, out)
        out.append("]")
    else:
        raise DimensionMismatchError(f"cannot serialize {type(value).__name__}")


def to_json(value) -> str:
    out: list[str] = []
    _write_json(value, out)
    return "".join(out)


def canonical_fingerprint(payload: dict) -> str:
    """sha256 of the canonical JSON rendering (sorted keys)."""
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Region and history payloads
# ---------------------------------------------------------------------------

def region_descriptor(region: Region) -> dict:
    if isinstance(region, Box):
        return {
            "kind": "box",
            "bounds": [[lo, hi] for lo, hi in zip(region.lower, region.upper)],
        }
    if isinstance(region, Ball):
        return {"kind": "ball", "radius": region.radius, "norm": region.norm, "dim": region.dim}
    if isinstance(region, SublevelSet):
        return {
            "kind": "sublevel",
            "level": region.level,
            "weights": list(region.value.weights),
            "parent": region_descriptor(region.parent),
        }
    raise DimensionMismatchError(f"unsupported region type {type(region).__name__}")


def region_from_descriptor(desc: dict, basis) -> Region:
    """Inverse of region_descriptor; weights round-trip bitwise via %.17g."""
    kind = desc.get("kind")
    if kind == "box":
        bounds = desc["bounds"]
        return Box(
            np.array([b[0] for b in bounds], dtype=float),
            np.array([b[1] for b in bounds], dtype=float),
        )
    if kind == "ball":
        return Ball(float(desc["radius"]), int(desc["dim"]), desc["norm"])
    if kind == "sublevel":
        from .model import ValueFunction

        value = ValueFunction(basis, np.asarray(desc["weights"], dtype=float))
        return SublevelSet(value, float(desc["level"]), region_from_descriptor(desc["parent"], basis))
    raise DimensionMismatchError(f"unknown region descriptor kind {kind!r}")


def history_payload(history: PIHistory, fingerprint: str) -> dict:
    return {
        "format": "iapi-history-v1",
        "config_fingerprint": fingerprint,
        "region_mode": history.region_mode,
        "converged": history.converged,
        "gate_passed": history.gate_passed,
        "basis_exponents": [list(map(int, row)) for row in history.basis.exponents],
        "initial_region": region_descriptor(history.initial_region),
        "iterations": [
            {
                "index": rec.index,
                "weights": list(rec.weights),
                "radius": rec.radius,
                "policy_distance": rec.policy_distance,
                "eval_rms": rec.eval_rms,
                "hjb_rms": rec.hjb_rms,
                "grid_size": rec.grid_size,
                "flags": rec.flags,
                "region": region_descriptor(rec.region),
            }
            for rec in history.iterations
        ],
    }


def write_history_json(history: PIHistory, fingerprint: str, stream: IO[str]) -> None:
    stream.write(to_json(history_payload(history, fingerprint)))
    stream.write("\n")


def write_weights_csv(history: PIHistory, stream: IO[str]) -> None:
    """One row per iteration: i, w1..wK, c*, policy_distance, hjb_rms."""
    k = history.basis.size
    header = ["i"] + [f"w{j + 1}" for j in range(k)] + ["c_star", "policy_distance", "hjb_rms"]
    stream.write(",".join(header) + "\n")
    for rec in history.iterations:
        cells = [str(rec.index)]
        cells += [fmt_float(w) for w in rec.weights]
        cells.append("" if rec.radius is None else fmt_float(rec.radius))
        cells.append(fmt_float(rec.policy_distance))
        cells.append(fmt_float(rec.hjb_rms))
        stream.write(",".join(cells) + "\n")


def write_polyline_csv(polylines: list[np.ndarray], stream: IO[str]) -> None:
    """x1,x2 rows; blank line between consecutive outlines."""
    for i, line in enumerate(polylines):
        if i:
            stream.write("\n")
        for row in line:
            stream.write(f"{fmt_float(row[0])},{fmt_float(row[1])}\n")


def reports_payload(reports: list[CheckReport]) -> dict:
    items = []
    for rep in reports:
        entry: dict = {
            "name": rep.name,
            "passed": rep.passed,
            "tested": rep.tested,
            "details": {k: _jsonable(v) for k, v in rep.details.items()},
        }
        if rep.witness is not None:
            entry["witness"] = {
                "state": list(np.asarray(rep.witness.state, dtype=float)),
                "measured": _jsonable(rep.witness.measured),
                "threshold": _jsonable(rep.witness.threshold),
                "note": rep.witness.note,
            }
        items.append(entry)
    return {"format": "iapi-reports-v1", "all_passed": all(r.passed for r in reports), "reports": items}


def _jsonable(value):
    if isinstance(value, (float, np.floating)) and not np.isfinite(value):
        return str(value)  # "nan" / "inf" markers survive the strict writer
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value
