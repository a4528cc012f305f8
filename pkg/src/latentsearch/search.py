"""LatentSearch: fixed-point minimisation of ``I(X;Y|Z) + beta H(Z)``.

The optimisation variable is the posterior ``q(z|x,y)``; the observed joint
``p(x,y)`` is held fixed so ``q(x,y,z) = q(z|x,y) p(x,y)`` always reproduces
it.  One update marginalises the current joint and re-forms the posterior as

    q'(z|x,y) ∝ q(z|x) q(z|y) / q(z)^(1-beta)

Restarts and beta values are independent runs; :func:`run_search_grid`
iterates all of them in one vectorised batch, freezing each run as soon as it
meets the stopping rule so a batched run follows the same trajectory as a
standalone one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .prob import (
    Q_FLOOR,
    JointLike,
    _cmi,
    _entropy,
    _marginals,
    as_probs,
    check_posterior,
    random_posterior,
)

# elements (batch * k * m * n) processed per vectorised chunk
_CHUNK_ELEMS = 1_500_000


@dataclass(frozen=True)
class SearchConfig:
    beta: float = 0.0
    max_iters: int = 1000
    fixed_point_tol: float = 1e-10
    restarts: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.fixed_point_tol > 0:
            raise ValueError("fixed_point_tol must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")


@dataclass
class SearchTrace:
    """Per-iteration diagnostics of one run.

    Record ``i`` describes the iterate after ``i`` updates; record 0 is the
    initial point and has ``change = nan``.
    """

    beta: float
    iteration: np.ndarray
    loss: np.ndarray
    cmi: np.ndarray
    entropy_z: np.ndarray
    change: np.ndarray
    converged: bool
    iterations_run: int
    diverged: bool = False

    def rows(self):
        for i in range(len(self.iteration)):
            yield (int(self.iteration[i]), float(self.loss[i]), float(self.cmi[i]),
                   float(self.entropy_z[i]), float(self.change[i]))


@dataclass(frozen=True)
class TradeoffPoint:
    beta: float
    entropy_z: float
    cmi: float
    restart_id: int
    iterations: int
    converged: bool

    @property
    def loss(self) -> float:
        return self.cmi + self.beta * self.entropy_z


def _loss_terms(q: np.ndarray, p: np.ndarray):
    j3 = q * p
    hz = _entropy(j3.sum(axis=(-2, -1)), -1)
    return _cmi(j3), np.maximum(hz, 0.0)


def _step(q: np.ndarray, p: np.ndarray, beta) -> np.ndarray:
    """One batched update; ``q`` is ``(..., k, m, n)``, ``beta`` broadcasts to ``...``.

    ``q(z)`` is divided by its largest entry before the power is taken.  The
    common factor cancels in the normalisation and keeps large ``beta`` from
    underflowing every state of a cell to zero.
    """
    _, zx, zy, qz = _marginals(q, p)
    beta = np.asarray(beta, dtype=float)
    qzf = np.maximum(qz, Q_FLOOR)
    qzf = qzf / qzf.max(axis=-1, keepdims=True)
    w = zx * (qzf ** (beta[..., None] - 1.0))[..., None]
    num = w[..., :, :, None] * zy[..., :, None, :]
    norm = num.sum(axis=-3, keepdims=True)
    live = (p > 0) & (norm > 0)
    new = np.where(live, num / np.where(live, norm, 1.0), q)
    # renormalise against drift over long runs
    return new / new.sum(axis=-3, keepdims=True)


def loss(p: JointLike, q, beta: float) -> float:
    """``I(X;Y|Z) + beta H(Z)`` in bits for the posterior ``q``."""
    p = as_probs(p)
    q = check_posterior(q, p.shape)
    cmi, hz = _loss_terms(q, p)
    return float(cmi + beta * hz)


def latent_search_step(p: JointLike, q, beta: float) -> np.ndarray:
    """Apply one LatentSearch update to the posterior ``q``.

    Cells with ``p(x,y) = 0`` keep their previous value.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    p = as_probs(p)
    q = check_posterior(q, p.shape)
    return _step(q, p, beta)


def stationarity_residual(p: JointLike, q, beta: float) -> float:
    """Max-abs change produced by one update, over cells with ``p(x,y) > 0``."""
    p = as_probs(p)
    q = check_posterior(q, p.shape)
    diff = np.abs(_step(q, p, beta) - q)
    return float(diff[:, p > 0].max(initial=0.0))


def _iterate(p, q, betas, max_iters, tol, record_trace):
    """Iterate a batch ``q`` of shape ``(B, k, m, n)`` until each run converges."""
    q = q.copy()
    B = q.shape[0]
    betas = np.asarray(betas, dtype=float)
    iters = np.zeros(B, dtype=int)
    converged = np.zeros(B, dtype=bool)
    active = np.ones(B, dtype=bool)
    mask = p > 0
    hist = None
    if record_trace:
        cmi0, hz0 = _loss_terms(q, p)
        hist = {"cmi": [cmi0], "hz": [hz0], "change": [np.full(B, np.nan)]}
    for _ in range(max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        cur = q[idx]
        new = _step(cur, p, betas[idx])
        change = np.abs(new - cur)[..., mask].max(axis=(-2, -1), initial=0.0)
        q[idx] = new
        iters[idx] += 1
        done = change < tol
        converged[idx[done]] = True
        active[idx[done]] = False
        if record_trace:
            cmi, hz = hist["cmi"][-1].copy(), hist["hz"][-1].copy()
            c_new, h_new = _loss_terms(new, p)
            cmi[idx], hz[idx] = c_new, h_new
            ch = np.full(B, np.nan)
            ch[idx] = change
            hist["cmi"].append(cmi)
            hist["hz"].append(hz)
            hist["change"].append(ch)
    return q, iters, converged, hist


def _traces_from_hist(hist, betas, iters, converged):
    cmi = np.array(hist["cmi"])
    hz = np.array(hist["hz"])
    change = np.array(hist["change"])
    out = []
    for b in range(cmi.shape[1]):
        n = iters[b] + 1
        out.append(SearchTrace(
            beta=float(betas[b]),
            iteration=np.arange(n),
            loss=cmi[:n, b] + betas[b] * hz[:n, b],
            cmi=cmi[:n, b],
            entropy_z=hz[:n, b],
            change=change[:n, b],
            converged=bool(converged[b]),
            iterations_run=int(iters[b]),
        ))
    return out


def latent_search(p: JointLike, k: int, cfg: SearchConfig = SearchConfig(), init=None,
                  rng: np.random.Generator | None = None, record_trace: bool = True):
    """Run LatentSearch from a single initial posterior.

    Parameters
    ----------
    p : Joint2 or array, shape (m, n)
        Observed joint distribution.
    k : int
        Cardinality of the latent variable.
    cfg : SearchConfig
        ``beta``, iteration budget and stopping tolerance are used; the run
        stops once the max-abs change of an update drops below
        ``cfg.fixed_point_tol``.
    init : array, shape (k, m, n), optional
        Initial posterior. Drawn uniformly per cell from the k-simplex when
        omitted, using ``rng`` (or a generator seeded with ``cfg.seed``).

    Returns
    -------
    q : ndarray, shape (k, m, n)
    trace : SearchTrace
    """
    if k < 1:
        raise ValueError("latent cardinality k must be at least 1")
    p = as_probs(p)
    m, n = p.shape
    if init is None:
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        init = random_posterior(k, m, n, rng)
    else:
        init = check_posterior(init, p.shape)
        if init.shape[0] != k:
            raise ValueError(f"init has {init.shape[0]} latent states, expected {k}")
    betas = np.array([cfg.beta])
    q, iters, conv, hist = _iterate(p, init[None], betas, cfg.max_iters,
                                    cfg.fixed_point_tol, True)
    traces = _traces_from_hist(hist, betas, iters, conv)
    trace = traces[0]
    if not record_trace:
        trace.iteration = trace.iteration[-1:]
        for name in ("loss", "cmi", "entropy_z", "change"):
            setattr(trace, name, getattr(trace, name)[-1:])
    return q[0], trace


def restart_init(k: int, m: int, n: int, seed: int, restart_id: int) -> np.ndarray:
    """Initial posterior for a restart; depends only on ``(seed, restart_id)``."""
    return random_posterior(k, m, n, np.random.default_rng([seed, restart_id]))


@dataclass
class GridResult:
    """Outcome of a (beta x restart) grid of LatentSearch runs."""

    points: list
    posteriors: np.ndarray = field(repr=False)  # (B, k, m, n) in the order of points


def run_search_grid(p: JointLike, k: int, betas: Sequence[float], cfg: SearchConfig = SearchConfig(),
                    keep_posteriors: bool = False) -> GridResult:
    """Run every ``(beta, restart)`` pair and collect the final trade-off points.

    Restart ``r`` starts from :func:`restart_init` with ``(cfg.seed, r)`` for
    every beta, so results do not depend on batching or ordering.
    """
    betas = [float(b) for b in betas]
    if not betas:
        raise ValueError("at least one beta is required")
    if any(b < 0 for b in betas):
        raise ValueError("beta must be non-negative")
    if k < 1:
        raise ValueError("latent cardinality k must be at least 1")
    p = as_probs(p)
    m, n = p.shape
    inits = np.stack([restart_init(k, m, n, cfg.seed, r) for r in range(cfg.restarts)])
    pairs = [(b, r) for b in sorted(set(betas)) for r in range(cfg.restarts)]
    chunk = max(1, _CHUNK_ELEMS // (k * m * n))
    points, kept = [], []
    for start in range(0, len(pairs), chunk):
        part = pairs[start:start + chunk]
        q0 = inits[[r for _, r in part]]
        bs = np.array([b for b, _ in part])
        q, iters, conv, _ = _iterate(p, q0, bs, cfg.max_iters, cfg.fixed_point_tol, False)
        cmi, hz = _loss_terms(q, p)
        for i, (b, r) in enumerate(part):
            points.append(TradeoffPoint(b, float(hz[i]), float(cmi[i]), r, int(iters[i]), bool(conv[i])))
        if keep_posteriors:
            kept.append(q)
    post = np.concatenate(kept) if keep_posteriors else np.empty((0, k, m, n))
    return GridResult(points, post)


def frontier_sweep(p: JointLike, k: int, betas: Sequence[float],
                   cfg: SearchConfig = SearchConfig()) -> list[TradeoffPoint]:
    """Trade-off points for every ``(beta, restart)`` pair, sorted by beta then restart."""
    return run_search_grid(p, k, betas, cfg).points


def best_point(points: Sequence[TradeoffPoint]) -> TradeoffPoint:
    """Lowest loss; ties go to lower ``H(Z)`` and then lower restart id."""
    if not points:
        raise ValueError("no points to choose from")
    return min(points, key=lambda t: (t.loss, t.entropy_z, t.restart_id))


def lower_envelope(points: Sequence[TradeoffPoint]) -> list[TradeoffPoint]:
    """Pareto-minimal points in the ``(H(Z), I(X;Y|Z))`` plane, by increasing entropy."""
    ordered = sorted(points, key=lambda t: (t.entropy_z, t.cmi))
    env, best_cmi = [], np.inf
    for t in ordered:
        if t.cmi < best_cmi:
            env.append(t)
            best_cmi = t.cmi
    return env


def projected_fd_gradient(p: JointLike, q, beta: float, h: float = 1e-6,
                          min_mass: float = 1e-4) -> float:
    """Largest in-simplex directional derivative of the loss, by central differences.

    For every cell with ``p(x,y) > 0`` and every pair of latent states, the
    loss is differentiated along ``e_a - e_b`` (which keeps the cell on the
    simplex).  Pairs where either coordinate is below ``min_mass`` are skipped
    since the perturbation would leave the simplex or the log-barrier
    curvature would swamp the difference quotient.
    """
    p = as_probs(p)
    q = check_posterior(q, p.shape)
    k = q.shape[0]
    worst = 0.0
    for x, y in zip(*np.nonzero(p)):
        for a in range(k):
            for b in range(a + 1, k):
                if min(q[a, x, y], q[b, x, y]) < min_mass:
                    continue
                qp, qm = q.copy(), q.copy()
                qp[a, x, y] += h
                qp[b, x, y] -= h
                qm[a, x, y] -= h
                qm[b, x, y] += h
                cp, hp = _loss_terms(qp, p)
                cm, hm = _loss_terms(qm, p)
                d = ((cp + beta * hp) - (cm + beta * hm)) / (2 * h)
                worst = max(worst, abs(float(d)))
    return worst
