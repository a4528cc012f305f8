"""Pairwise causal-skeleton recovery for categorical tables.

Starting from the complete undirected graph, every pair of columns is tested:
LatentSearch is run over a grid of beta values, ``h_min`` is the smallest
latent entropy among runs leaving at most ``cmi_threshold`` bits of residual
dependence, and the edge is removed when ``h_min < theta``.
"""
from __future__ import annotations

import csv
import io
import json
import zlib
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .causal import ThresholdRule, h_min_of
from .prob import Joint2, marginal_entropies
from .search import SearchConfig, run_search_grid

SKELETON_BETAS = tuple(np.linspace(0.0, 0.025, 100))
SKELETON_CMI_THRESHOLD = 5e-4
DEFAULT_MISSING = ("?", "")

ADULT_DISCRETE_COLUMNS = ("workclass", "education", "marital-status", "occupation",
                          "relationship", "race", "sex", "native-country")


class TableError(ValueError):
    """Raised for unreadable, malformed or empty tables."""


@dataclass(frozen=True)
class CategoricalTable:
    """Integer-coded categorical columns.

    ``codes[:, j]`` indexes into ``categories[columns[j]]``.
    """

    columns: tuple
    categories: dict
    codes: np.ndarray
    dropped_rows: int = 0

    @property
    def n_rows(self) -> int:
        return self.codes.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.codes[:, self.columns.index(name)]
        except ValueError:
            raise KeyError(f"unknown column {name!r}") from None

    @classmethod
    def from_rows(cls, columns: Sequence[str], rows: Sequence[Sequence[str]], dropped: int = 0):
        columns = tuple(columns)
        if not rows:
            raise TableError("table is empty after cleaning")
        cats, codes = {}, np.empty((len(rows), len(columns)), dtype=np.int64)
        for j, name in enumerate(columns):
            values = sorted({r[j] for r in rows})
            index = {v: i for i, v in enumerate(values)}
            cats[name] = tuple(values)
            codes[:, j] = [index[r[j]] for r in rows]
        return cls(columns, cats, codes, dropped)


def _clean(value: str) -> str:
    return value.strip().casefold()


def load_table(path, columns: Sequence[str] | None = None,
               missing_tokens: Sequence[str] = DEFAULT_MISSING,
               names: Sequence[str] | None = None) -> CategoricalTable:
    """Read a categorical CSV.

    Values are stripped and case-folded before the category dictionaries are
    built, so ``"United-States"`` and ``"united-states"`` coincide.  Rows with
    a missing token in any selected column are dropped.  ``names`` supplies
    column names for header-less files such as the raw UCI Adult data.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh, skipinitialspace=False)
            raw = [r for r in reader if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise TableError(f"cannot read {path}: {exc}") from exc
    header = list(names) if names is not None else [h.strip() for h in raw.pop(0)] if raw else []
    if not header:
        raise TableError(f"{path} has no header")
    wanted = list(columns) if columns is not None else header
    missing_cols = [c for c in wanted if c not in header]
    if missing_cols:
        raise TableError(f"columns not found: {missing_cols}")
    idx = [header.index(c) for c in wanted]
    missing = {_clean(t) for t in missing_tokens}
    rows, dropped = [], 0
    for r in raw:
        if len(r) < len(header):
            dropped += 1
            continue
        vals = [_clean(r[i]) for i in idx]
        if any(v in missing for v in vals):
            dropped += 1
            continue
        rows.append(vals)
    return CategoricalTable.from_rows(wanted, rows, dropped)


def estimate_joint(t: CategoricalTable, var_x: str, var_y: str, smoothing: float = 0.0) -> Joint2:
    """Empirical joint of two columns; ``smoothing`` adds a pseudo-count to every cell."""
    cx, cy = t.column(var_x), t.column(var_y)
    m, n = len(t.categories[var_x]), len(t.categories[var_y])
    counts = np.bincount(cx * n + cy, minlength=m * n).reshape(m, n).astype(float)
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    counts += smoothing
    return Joint2(counts / counts.sum(), t.categories[var_x], t.categories[var_y])


def pairwise_hmin(p, k: int, betas: Sequence[float] = SKELETON_BETAS, restarts: int = 4,
                  cmi_threshold: float = SKELETON_CMI_THRESHOLD,
                  cfg: SearchConfig = SearchConfig()):
    """Minimum latent entropy reaching ``I(X;Y|Z) <= cmi_threshold``.

    Returns ``(h_min, diagnostics)``; ``h_min`` is ``inf`` when no run
    qualifies.  ``diagnostics`` holds the qualifying count and all points.
    """
    scfg = replace(cfg, restarts=restarts)
    grid = run_search_grid(p, k, betas, scfg)
    h, count = h_min_of(grid.points, cmi_threshold)
    return h, {"qualifying": count, "points": grid.points, "runs": len(grid.points)}


@dataclass(frozen=True)
class PairDiagnostics:
    var_x: str
    var_y: str
    h_min: float
    entropy_x: float
    entropy_y: float
    theta: float
    edge_kept: bool
    betas_used: int
    cmi_threshold: float
    k: int = 0
    qualifying_runs: int = 0

    def to_record(self) -> dict:
        return {
            "var_x": self.var_x, "var_y": self.var_y,
            "h_min": None if np.isinf(self.h_min) else self.h_min,
            "entropy_x": self.entropy_x, "entropy_y": self.entropy_y, "theta": self.theta,
            "edge_kept": self.edge_kept, "betas_used": self.betas_used,
            "cmi_threshold": self.cmi_threshold, "k": self.k, "qualifying_runs": self.qualifying_runs,
        }


@dataclass(frozen=True)
class Skeleton:
    variables: tuple
    edges: frozenset
    diagnostics: tuple = field(default=())

    def edge_list(self) -> list[tuple[str, str]]:
        return sorted(tuple(sorted(e)) for e in self.edges)

    def to_dot(self) -> str:
        lines = ["graph skeleton {"]
        lines += [f'  "{v}";' for v in self.variables]
        lines += [f'  "{a}" -- "{b}";' for a, b in self.edge_list()]
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({
            "variables": list(self.variables),
            "edges": [list(e) for e in self.edge_list()],
            "pairs": [d.to_record() for d in self.diagnostics],
        }, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["var_x", "var_y", "H(X)", "H(Y)", "h_min", "theta", "edge_kept"])
        for d in self.diagnostics:
            w.writerow([d.var_x, d.var_y, f"{d.entropy_x:.6f}", f"{d.entropy_y:.6f}",
                        "inf" if np.isinf(d.h_min) else f"{d.h_min:.6f}", f"{d.theta:.6f}",
                        int(d.edge_kept)])
        return buf.getvalue()

    def rethreshold(self, rule) -> "Skeleton":
        """Apply another threshold to the stored ``h_min`` values."""
        diags = []
        for d in self.diagnostics:
            th = rule.evaluate(d.entropy_x, d.entropy_y) if isinstance(rule, ThresholdRule) else float(rule)
            diags.append(replace(d, theta=th, edge_kept=bool(d.h_min >= th)))
        return _assemble(self.variables, diags)


def _assemble(variables, diags) -> Skeleton:
    edges = frozenset(frozenset((d.var_x, d.var_y)) for d in diags if d.edge_kept)
    return Skeleton(tuple(variables), edges, tuple(diags))


def min_cardinality(card_x: int, card_y: int) -> int:
    return min(card_x, card_y)


def _pair_seed(seed: int, a: str, b: str) -> int:
    ss = np.random.SeedSequence([seed, zlib.crc32(a.encode()), zlib.crc32(b.encode())])
    return int(ss.generate_state(1)[0])


def recover_skeleton(t: CategoricalTable, rule: ThresholdRule = ThresholdRule.scaled_min(0.8),
                     k_rule: Callable[[int, int], int] = min_cardinality,
                     betas: Sequence[float] = SKELETON_BETAS, restarts: int = 4,
                     cmi_threshold: float = SKELETON_CMI_THRESHOLD,
                     cfg: SearchConfig = SearchConfig(), seed: int = 0,
                     smoothing: float = 0.0) -> Skeleton:
    """Prune the complete graph on ``t.columns`` pair by pair.

    Pairs are processed once, in lexicographic name order, each with a seed
    derived from ``(seed, var_x, var_y)``.
    """
    if len(t.columns) < 2:
        raise TableError("at least two columns are needed")
    names = sorted(t.columns)
    diags = []
    for a, b in combinations(names, 2):
        p = estimate_joint(t, a, b, smoothing)
        hx, hy = marginal_entropies(p)
        k = max(1, int(k_rule(*p.shape)))
        h, info = pairwise_hmin(p, k, betas, restarts, cmi_threshold,
                                replace(cfg, seed=_pair_seed(seed, a, b)))
        th = rule.evaluate(hx, hy)
        diags.append(PairDiagnostics(a, b, h, hx, hy, th, bool(h >= th), len(set(betas)),
                                     cmi_threshold, k, info["qualifying"]))
    return _assemble(t.columns, diags)


def load_edge_list(path) -> frozenset:
    """Read an undirected edge list (``a,b`` per line, ``#`` comments)."""
    edges = set()
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        a, b = (s.strip() for s in line.split(","))
        edges.add(frozenset((_clean(a), _clean(b))))
    return frozenset(edges)


def edge_diff(skel: Skeleton, reference: frozenset) -> dict:
    """Edges only in the recovered skeleton, only in ``reference``, and shared."""
    got = {frozenset(_clean(v) for v in e) for e in skel.edges}
    fmt = lambda es: sorted(tuple(sorted(e)) for e in es)  # noqa: E731
    return {"extra": fmt(got - reference), "missing": fmt(reference - got), "shared": fmt(got & reference)}


def planted_table(rows: int = 20_000, seed: int = 0) -> tuple[CategoricalTable, frozenset]:
    """Five categorical columns with two directly dependent pairs.

    ``b`` copies ``a`` and ``d`` copies ``c`` with probability 0.9 (otherwise
    a fresh uniform draw); ``e`` is independent of everything.  Returns the
    table and the planted edge set.
    """
    rng = np.random.default_rng(seed)

    def noisy_copy(src, card):
        keep = rng.random(rows) < 0.9
        return np.where(keep, src, rng.integers(card, size=rows))

    a = rng.integers(4, size=rows)
    c = rng.integers(3, size=rows)
    cols = {"a": a, "b": noisy_copy(a, 4), "c": c, "d": noisy_copy(c, 3), "e": rng.integers(3, size=rows)}
    names = tuple(cols)
    data = [[f"s{cols[nm][i]}" for nm in names] for i in range(rows)]
    planted = frozenset({frozenset(("a", "b")), frozenset(("c", "d"))})
    return CategoricalTable.from_rows(names, data), planted


def table_to_csv(t: CategoricalTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(t.columns)
    for row in t.codes:
        w.writerow([t.categories[c][v] for c, v in zip(t.columns, row)])
    return buf.getvalue()
