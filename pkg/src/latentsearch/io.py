"""File formats: observed joints, frontier / trace / comparison CSVs, run manifests."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .prob import DistributionError, Joint2
from .search import SearchTrace, TradeoffPoint


class JointFormatError(ValueError):
    """A joint file could not be parsed or is not a valid distribution."""


def _joint_or_raise(probs, lx, ly, source) -> Joint2:
    try:
        return Joint2(np.asarray(probs, dtype=float), tuple(lx), tuple(ly))
    except (DistributionError, ValueError) as exc:
        raise JointFormatError(f"{source}: {exc}") from exc


def read_joint_csv(text: str, source: str = "<csv>") -> Joint2:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if len(rows) < 2:
        raise JointFormatError(f"{source}: need a header row and at least one data row")
    labels_y = [c.strip() for c in rows[0][1:]]
    labels_x, probs = [], []
    for r in rows[1:]:
        if len(r) != len(labels_y) + 1:
            raise JointFormatError(f"{source}: row {r[0]!r} has {len(r) - 1} cells, expected {len(labels_y)}")
        labels_x.append(r[0].strip())
        try:
            probs.append([float(c) for c in r[1:]])
        except ValueError as exc:
            raise JointFormatError(f"{source}: {exc}") from exc
    return _joint_or_raise(probs, labels_x, labels_y, source)


def read_joint_json(text: str, source: str = "<json>") -> Joint2:
    try:
        d = json.loads(text)
        return _joint_or_raise(d["probs"], d.get("labels_x", ()), d.get("labels_y", ()), source)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise JointFormatError(f"{source}: {exc}") from exc


def read_joint(path) -> Joint2:
    """Load a joint from ``.json`` or CSV (any other extension)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise JointFormatError(f"cannot read {path}: {exc}") from exc
    if path.suffix.lower() == ".json":
        return read_joint_json(text, str(path))
    return read_joint_csv(text, str(path))


def joint_to_csv(p: Joint2) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x\\y", *p.labels_y])
    for lab, row in zip(p.labels_x, p.probs):
        w.writerow([lab, *(repr(float(v)) for v in row)])
    return buf.getvalue()


def joint_to_json(p: Joint2) -> str:
    return json.dumps({"labels_x": list(p.labels_x), "labels_y": list(p.labels_y),
                       "probs": p.probs.tolist()}, indent=2)


def write_joint(p: Joint2, path) -> None:
    path = Path(path)
    path.write_text(joint_to_json(p) if path.suffix.lower() == ".json" else joint_to_csv(p))


def _num(v: float) -> str:
    if isinstance(v, float) and math.isnan(v):
        return ""
    return repr(float(v))


FRONTIER_COLUMNS = ("beta", "restart_id", "entropy_z_bits", "cmi_bits", "iterations", "converged")


def frontier_to_csv(points: Iterable[TradeoffPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FRONTIER_COLUMNS)
    for t in points:
        w.writerow([_num(t.beta), t.restart_id, _num(t.entropy_z), _num(t.cmi), t.iterations, int(t.converged)])
    return buf.getvalue()


TRACE_COLUMNS = ("iteration", "loss_bits", "cmi_bits", "entropy_z_bits", "max_abs_change")


def trace_to_csv(trace: SearchTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for it, loss, cmi, hz, ch in trace.rows():
        w.writerow([it, _num(loss), _num(cmi), _num(hz), _num(ch)])
    return buf.getvalue()


COMPARISON_COLUMNS = ("algorithm", "beta_or_k", "restart_id", "iteration", "loss_bits", "cmi_bits",
                      "entropy_z_bits")


def comparison_to_csv(rows: Sequence[tuple]) -> str:
    """Unified comparison table; each row follows ``COMPARISON_COLUMNS``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARISON_COLUMNS)
    for r in rows:
        alg, bk, rid, it, loss, cmi, hz = r
        w.writerow([alg, _num(bk), rid, it, _num(loss), _num(cmi), _num(hz)])
    return buf.getvalue()


def config_hash(obj) -> str:
    """SHA-256 of the canonical JSON encoding of ``obj``."""
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(path, subcommand: str, config: dict, seed: int, duration: float,
                   outputs: Sequence[str]) -> dict:
    from . import __version__

    manifest = {
        "subcommand": subcommand,
        "config": config,
        "config_hash": config_hash(config),
        "master_seed": seed,
        "artifact_version": __version__,
        "wall_clock_seconds": duration,
        "outputs": list(outputs),
    }
    Path(path).write_text(json.dumps(manifest, indent=2, default=str))
    return manifest
