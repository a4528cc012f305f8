"""Deciding between the latent graph X<-Z->Y and the triangle graph.

``infer_graph`` pools LatentSearch runs over a (beta x restart) grid, keeps
those whose residual dependence I(X;Y|Z) is at most ``cmi_threshold`` and
compares the smallest latent entropy among them with a threshold ``theta``.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .prob import JointLike, as_probs, marginal_entropies
from .search import SearchConfig, TradeoffPoint, run_search_grid

# the only beta range stated for the experiments, at desk resolution
DEFAULT_BETAS = tuple(float(b) for b in np.linspace(0.0, 0.025, 6))


class Graph(str, enum.Enum):
    LATENT = "LatentGraph"
    TRIANGLE = "TriangleGraph"


@dataclass(frozen=True)
class ThresholdRule:
    """Entropy threshold as a function of the observed marginal entropies.

    ``kind`` is one of ``"const"`` (theta = a), ``"min"``
    (theta = a * min(H(X), H(Y))) or ``"minoff"``
    (theta = a * min(H(X), H(Y)) - b).  Negative values are clamped to 0.
    """

    kind: str
    a: float
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ("const", "min", "minoff"):
            raise ValueError(f"unknown threshold rule kind {self.kind!r}")

    @classmethod
    def constant(cls, c: float) -> "ThresholdRule":
        return cls("const", c)

    @classmethod
    def scaled_min(cls, a: float) -> "ThresholdRule":
        return cls("min", a)

    @classmethod
    def scaled_min_offset(cls, a: float, b: float) -> "ThresholdRule":
        return cls("minoff", a, b)

    @classmethod
    def parse(cls, text: str) -> "ThresholdRule":
        """Parse ``"const:2"``, ``"min:0.5"`` or ``"minoff:1:1"``."""
        parts = text.strip().split(":")
        try:
            if parts[0] == "const" and len(parts) == 2:
                return cls.constant(float(parts[1]))
            if parts[0] == "min" and len(parts) == 2:
                return cls.scaled_min(float(parts[1]))
            if parts[0] == "minoff" and len(parts) == 3:
                return cls.scaled_min_offset(float(parts[1]), float(parts[2]))
        except ValueError:
            pass
        raise ValueError(f"cannot parse threshold rule {text!r}")

    def evaluate(self, hx: float, hy: float) -> float:
        if self.kind == "const":
            theta = self.a
        elif self.kind == "min":
            theta = self.a * min(hx, hy)
        else:
            theta = self.a * min(hx, hy) - self.b
        return max(float(theta), 0.0)

    def __str__(self):
        if self.kind == "minoff":
            return f"minoff:{self.a:g}:{self.b:g}"
        return f"{self.kind}:{self.a:g}"


def apply_threshold_rule(rule: ThresholdRule, p: JointLike) -> float:
    """Evaluate ``rule`` on the marginal entropies of ``p`` (bits, >= 0)."""
    return rule.evaluate(*marginal_entropies(p))


Theta = Union[float, ThresholdRule]


@dataclass(frozen=True)
class InferGraphConfig:
    k: int
    theta: Theta = ThresholdRule("minoff", 1.0, 1.0)
    cmi_threshold: float = 1e-3
    restarts: int = 40
    betas: tuple = DEFAULT_BETAS
    search: SearchConfig = field(default_factory=SearchConfig)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not self.cmi_threshold > 0:
            raise ValueError("cmi_threshold must be positive")
        if not isinstance(self.theta, ThresholdRule) and self.theta < 0:
            raise ValueError("theta must be non-negative")
        if not self.betas:
            raise ValueError("at least one beta is required")

    def search_config(self) -> SearchConfig:
        s = self.search
        return SearchConfig(beta=s.beta, max_iters=s.max_iters, fixed_point_tol=s.fixed_point_tol,
                            restarts=self.restarts, seed=s.seed)


@dataclass(frozen=True)
class GraphVerdict:
    graph: Graph
    h_min: float
    qualifying_restarts: int
    theta_used: float

    def to_record(self, cfg: InferGraphConfig | None = None) -> dict:
        rec = {
            "graph": self.graph.value,
            "h_min_bits": None if np.isinf(self.h_min) else self.h_min,
            "theta_bits": self.theta_used,
            "qualifying_restarts": self.qualifying_restarts,
        }
        if cfg is not None:
            rec.update(cmi_threshold_bits=cfg.cmi_threshold, k=cfg.k,
                       restarts=cfg.restarts, seed=cfg.search.seed)
        return rec

    def to_json(self, cfg: InferGraphConfig | None = None) -> str:
        return json.dumps(self.to_record(cfg), indent=2)


def h_min_of(points: Sequence[TradeoffPoint], cmi_threshold: float) -> tuple[float, int]:
    """Smallest H(Z) among runs with I(X;Y|Z) <= threshold, and how many qualified.

    Returns ``inf`` when no run qualifies.
    """
    hs = [t.entropy_z for t in points if t.cmi <= cmi_threshold]
    return (min(hs) if hs else float("inf")), len(hs)


def decide(h_min: float, theta: float) -> Graph:
    return Graph.LATENT if h_min <= theta else Graph.TRIANGLE


def resolve_theta(theta: Theta, p: JointLike) -> float:
    if isinstance(theta, ThresholdRule):
        return apply_threshold_rule(theta, p)
    return float(theta)


def infer_graph(p: JointLike, cfg: InferGraphConfig) -> GraphVerdict:
    """Classify ``p`` as coming from the latent or the triangle graph.

    An empty qualifying set gives ``h_min = inf`` and hence the triangle graph.
    """
    p = as_probs(p)
    theta = resolve_theta(cfg.theta, p)
    grid = run_search_grid(p, cfg.k, cfg.betas, cfg.search_config())
    h, count = h_min_of(grid.points, cfg.cmi_threshold)
    return GraphVerdict(decide(h, theta), h, count, theta)


def numeric_rank(p: JointLike, rel_tol: float | None = None) -> int:
    p = as_probs(p)
    if rel_tol is None:
        rel_tol = max(p.shape) * 1e-12
    s = np.linalg.svd(p, compute_uv=False)
    return int(np.sum(s > rel_tol * s[0]))


def rank_test(p: JointLike, k: int, rel_tol: float | None = None) -> tuple[bool, int]:
    """Necessary condition for an exact k-state latent explaining ``p``.

    A latent Z with k states rendering X, Y conditionally independent writes
    ``p`` as a sum of k non-negative rank-one terms, so ``rank(p) <= k``.
    A failing test rules such a latent out.

    Returns
    -------
    passes : bool
        ``numeric_rank <= k``.
    numeric_rank : int
        Singular values above ``rel_tol * sigma_max``; ``rel_tol`` defaults to
        ``max(m, n) * 1e-12``.
    """
    if rel_tol is not None and not 0 < rel_tol < 1:
        raise ValueError("rel_tol must lie in (0, 1)")
    r = numeric_rank(p, rel_tol)
    return r <= k, r
