"""Random latent / triangle causal models and the synthetic experiments.

Both generators draw ``p(z)`` from a Dirichlet prior and every conditional
uniformly from its simplex.  The latent model factorises as
``p(z) p(x|z) p(y|z)``; the triangle model adds a direct edge X -> Y through
``p(y|x,z)``.
"""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .causal import Graph, GraphVerdict, InferGraphConfig, ThresholdRule, decide, h_min_of
from .prob import Joint2, _entropy, marginal_entropies, sample_simplex
from .search import run_search_grid

DEFAULT_DIRICHLET_PARAMS = (1.0, 0.5, 0.2, 0.1)

LATENT = Graph.LATENT
TRIANGLE = Graph.TRIANGLE


@dataclass(frozen=True)
class CausalModel:
    """Generative parameters of a latent or triangle model.

    ``y_given`` is ``k x n`` (p(y|z)) for the latent graph and ``k x m x n``
    (p(y|x,z)) for the triangle graph.
    """

    kind: Graph
    z_prior: np.ndarray
    x_given_z: np.ndarray
    y_given: np.ndarray

    def full_joint(self) -> np.ndarray:
        """``p(x, y, z)`` laid out as ``k x m x n``."""
        if self.kind is LATENT:
            return np.einsum("z,zx,zy->zxy", self.z_prior, self.x_given_z, self.y_given)
        return np.einsum("z,zx,zxy->zxy", self.z_prior, self.x_given_z, self.y_given)

    def joint(self) -> Joint2:
        full = self.full_joint().sum(axis=0)
        return Joint2(full / full.sum())

    @property
    def entropy_z(self) -> float:
        return float(max(_entropy(self.z_prior, None), 0.0))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "z_prior": self.z_prior.tolist(),
            "x_given_z": self.x_given_z.tolist(),
            "y_given": self.y_given.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CausalModel":
        return cls(Graph(d["kind"]), np.asarray(d["z_prior"], float),
                   np.asarray(d["x_given_z"], float), np.asarray(d["y_given"], float))


def _rows(shape, dim, rng):
    if dim == 1:
        return np.ones(shape + (1,))
    return rng.dirichlet(np.ones(dim), size=shape)


def _z_prior(k, alpha_z, rng):
    alpha = np.asarray(alpha_z, dtype=float)
    if alpha.ndim == 1 and alpha.size != k:
        # a short vector is tiled to length k
        alpha = np.resize(alpha, k)
    return sample_simplex(k, alpha, rng)


def sample_latent_model(m: int, n: int, k: int, alpha_z=1.0, rng: np.random.Generator | None = None):
    """Draw a model of the graph X <- Z -> Y.

    Returns ``(model, joint, true_entropy_z)``.
    """
    if min(m, n, k) < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng() if rng is None else rng
    model = CausalModel(LATENT, _z_prior(k, alpha_z, rng), _rows((k,), m, rng), _rows((k,), n, rng))
    return model, model.joint(), model.entropy_z


def sample_triangle_model(m: int, n: int, k: int, alpha_z=1.0, rng: np.random.Generator | None = None):
    """Draw a model of X <- Z -> Y with the extra edge X -> Y."""
    if min(m, n, k) < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng() if rng is None else rng
    model = CausalModel(TRIANGLE, _z_prior(k, alpha_z, rng), _rows((k,), m, rng), _rows((k, m), n, rng))
    return model, model.joint(), model.entropy_z


SAMPLERS = {LATENT: sample_latent_model, TRIANGLE: sample_triangle_model}


@dataclass(frozen=True)
class ExperimentRecord:
    model_kind: Graph
    true_entropy_z: float
    recovered_h_min: float
    verdict: GraphVerdict
    m: int
    n: int
    k_true: int
    k_search: int
    seed: int
    alpha: str = ""
    entropy_x: float = 0.0
    entropy_y: float = 0.0

    @property
    def correct(self) -> bool:
        return self.verdict.graph is self.model_kind


RECORD_COLUMNS = ("model_kind", "alpha", "m", "n", "k_true", "k_search", "seed", "true_entropy_z",
                  "entropy_x", "entropy_y", "recovered_h_min", "qualifying_restarts", "theta", "verdict")


def records_to_csv(records: Sequence[ExperimentRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in records:
        w.writerow([r.model_kind.value, r.alpha, r.m, r.n, r.k_true, r.k_search, r.seed,
                    repr(r.true_entropy_z), repr(r.entropy_x), repr(r.entropy_y),
                    "inf" if np.isinf(r.recovered_h_min) else repr(r.recovered_h_min),
                    r.verdict.qualifying_restarts, repr(r.verdict.theta_used), r.verdict.graph.value])
    return buf.getvalue()


def _alpha_label(a) -> str:
    a = np.atleast_1d(np.asarray(a, float))
    return ",".join(f"{v:g}" for v in a)


def _partition(samples: int, params: Sequence):
    """Spread ``samples`` draws over the Dirichlet settings as evenly as possible."""
    if not params:
        raise ValueError("at least one Dirichlet setting is required")
    base, extra = divmod(samples, len(params))
    out = []
    for i, a in enumerate(params):
        out += [a] * (base + (1 if i < extra else 0))
    return out


def _worker_count(workers):
    if workers is None:
        workers = int(os.environ.get("LATENTSEARCH_WORKERS", "1"))
    return max(1, workers)


def _record_seed(master: int, kind: Graph, index: int) -> int:
    ss = np.random.SeedSequence([master, 0 if kind is LATENT else 1, index])
    return int(ss.generate_state(1)[0])


def _run_one(args):
    kind, index, alpha, m, n, k_true, k_search, cfg, master = args
    seed = _record_seed(master, kind, index)
    rng = np.random.default_rng(seed)
    _, joint, h_true = SAMPLERS[kind](m, n, k_true, alpha, rng)
    scfg = replace(cfg.search_config(), seed=seed)
    grid = run_search_grid(joint, k_search, cfg.betas, scfg)
    h, count = h_min_of(grid.points, cfg.cmi_threshold)
    hx, hy = marginal_entropies(joint)
    return kind, index, alpha, h_true, h, count, seed, hx, hy


def _search_models(specs, workers):
    workers = _worker_count(workers)
    if workers == 1:
        return [_run_one(s) for s in specs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, specs, chunksize=1))


def _theta_for(rule, hx, hy):
    if isinstance(rule, ThresholdRule):
        return rule.evaluate(hx, hy)
    return float(rule)


def run_scatter_experiment(m: int, n: int, k_true: int, k_search: int, samples_per_graph: int,
                           dirichlet_params: Sequence = DEFAULT_DIRICHLET_PARAMS,
                           cfg: InferGraphConfig | None = None, seed: int = 0,
                           theta=None, workers: int | None = None) -> list[ExperimentRecord]:
    """Recovered minimum latent entropy against the true one, for both graphs.

    ``samples_per_graph`` models are drawn per graph kind, split evenly over
    ``dirichlet_params`` (each a scalar or a vector Dirichlet parameter for
    ``p(z)``).  ``theta`` may be a number, a :class:`ThresholdRule`, or
    ``None`` to use the largest true latent entropy among the sampled latent
    models as the InferGraph threshold.  Each record's seed is derived from
    ``(seed, graph kind, record index)`` so results do not depend on
    ``workers``.
    """
    if cfg is None:
        cfg = InferGraphConfig(k=k_search)
    alphas = _partition(samples_per_graph, list(dirichlet_params))
    specs = [(kind, i, a, m, n, k_true, k_search, cfg, seed)
             for kind in (LATENT, TRIANGLE) for i, a in enumerate(alphas)]
    results = _search_models(specs, workers)
    if theta is None:
        theta = max(r[3] for r in results if r[0] is LATENT)
    records = []
    for kind, _, alpha, h_true, h, count, rseed, hx, hy in results:
        th = _theta_for(theta, hx, hy)
        verdict = GraphVerdict(decide(h, th), h, count, th)
        records.append(ExperimentRecord(kind, h_true, h, verdict, m, n, k_true, k_search, rseed,
                                        _alpha_label(alpha), hx, hy))
    return records


def accuracy(records: Sequence[ExperimentRecord]) -> dict:
    """Overall accuracy and the two class-conditional detection rates."""
    lat = [r for r in records if r.model_kind is LATENT]
    tri = [r for r in records if r.model_kind is TRIANGLE]

    def rate(rs):
        return float(np.mean([r.correct for r in rs])) if rs else float("nan")

    return {"accuracy": rate(list(records)), "p_latent_given_latent": rate(lat),
            "p_triangle_given_triangle": rate(tri)}


@dataclass(frozen=True)
class AccuracyRow:
    n: int
    rule: str
    accuracy: float
    p_latent_given_latent: float
    p_triangle_given_triangle: float
    samples: int


def run_accuracy_experiment(sizes: Sequence[int], threshold_rules: Sequence[ThresholdRule],
                            samples: int, cfg_for_size=None, seed: int = 0,
                            dirichlet_params: Sequence = DEFAULT_DIRICHLET_PARAMS,
                            workers: int | None = None) -> list[AccuracyRow]:
    """InferGraph accuracy with m = n = k for each size and threshold rule.

    ``cfg_for_size`` maps ``n`` to an :class:`InferGraphConfig`; the default
    searches with ``k = n`` and the package defaults.  Every rule is applied to
    the same searches.  ``n = 1`` has no dependence to explain and is scored
    as accuracy 1 by convention.
    """
    rows = []
    for n in sizes:
        if n == 1:
            rows += [AccuracyRow(1, str(r), 1.0, 1.0, 1.0, 0) for r in threshold_rules]
            continue
        cfg = cfg_for_size(n) if cfg_for_size is not None else InferGraphConfig(k=n)
        base = run_scatter_experiment(n, n, n, cfg.k, samples, dirichlet_params, cfg,
                                      seed=seed + n, theta=0.0, workers=workers)
        for rule in threshold_rules:
            recs = [rethreshold(r, rule) for r in base]
            acc = accuracy(recs)
            rows.append(AccuracyRow(n, str(rule), acc["accuracy"], acc["p_latent_given_latent"],
                                    acc["p_triangle_given_triangle"], len(recs)))
    return rows


def rethreshold(record: ExperimentRecord, theta) -> ExperimentRecord:
    """Re-decide a record under another threshold without re-running the search."""
    th = _theta_for(theta, record.entropy_x, record.entropy_y)
    v = record.verdict
    return replace(record, verdict=GraphVerdict(decide(record.recovered_h_min, th),
                                                v.h_min, v.qualifying_restarts, th))


ACCURACY_COLUMNS = ("n", "rule", "accuracy", "p_latent_given_latent", "p_triangle_given_triangle", "samples")


def accuracy_to_csv(rows: Sequence[AccuracyRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ACCURACY_COLUMNS)
    for r in rows:
        w.writerow([r.n, r.rule, repr(r.accuracy), repr(r.p_latent_given_latent),
                    repr(r.p_triangle_given_triangle), r.samples])
    return buf.getvalue()


def model_to_json(model: CausalModel) -> str:
    return json.dumps(model.to_dict())
