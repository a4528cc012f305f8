"""Comparison algorithms: projected gradient descent, pLSA-EM and l1 NMF."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prob import JointLike, _entropy, as_probs, check_dist, check_posterior, random_posterior
from .search import SearchTrace, _loss_terms, _step

LN2 = np.log(2.0)


@dataclass(frozen=True)
class BaselineConfig:
    step_size: float = 1e-3
    max_iters: int = 10_000
    seed: int = 0
    nmf_inner_iters: int = 50
    nmf_step: str = "polyak"

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.nmf_step not in ("polyak", "diminishing"):
            raise ValueError("nmf_step must be 'polyak' or 'diminishing'")
        if self.max_iters < 1 or self.nmf_inner_iters < 1:
            raise ValueError("iteration budgets must be positive")


# --- gradient descent --------------------------------------------------------

def loss_gradient(p: JointLike, q, beta: float) -> np.ndarray:
    """Gradient of ``I(X;Y|Z) + beta H(Z)`` (bits) with respect to ``q(z|x,y)``.

    The loss is treated as a function of the unconstrained entries of
    ``q``:  ``p(x,y) [log2(q(x,y,z) q(z)^(1-beta) / (q(x,z) q(y,z))) - beta/ln 2]``.
    Entries with ``q = 0`` and ``p > 0`` give ``-inf``.
    """
    p = as_probs(p)
    q = np.asarray(q, dtype=float)
    return _gradient(q, p, beta)


def _gradient(q, p, beta):
    j3 = q * p
    qz = j3.sum(axis=(-2, -1))
    qxz = j3.sum(axis=-1)
    qyz = j3.sum(axis=-2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = j3 * (qz ** (1.0 - beta))[:, None, None] / (qxz[:, :, None] * qyz[:, None, :])
        g = p * (np.log2(ratio) - beta / LN2)
    return np.where(p > 0, g, 0.0)


def project_simplex(v: np.ndarray, axis: int = 0) -> np.ndarray:
    """Euclidean projection of each slice along ``axis`` onto the probability simplex."""
    v = np.moveaxis(np.asarray(v, dtype=float), axis, -1)
    k = v.shape[-1]
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    idx = np.arange(1, k + 1)
    cond = u - css / idx > 0
    rho = k - 1 - np.argmax(cond[..., ::-1], axis=-1)
    tau = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1.0)
    return np.moveaxis(np.maximum(v - tau, 0.0), -1, axis)


def gradient_descent_search(p: JointLike, k: int, beta: float, cfg: BaselineConfig = BaselineConfig(),
                            init=None, rng: np.random.Generator | None = None):
    """Constant-step projected gradient descent on the loss.

    Each iteration steps against :func:`loss_gradient` and projects every
    ``(x, y)`` cell back onto the simplex.  The gradient is unbounded where an
    entry reaches zero; a non-finite gradient or iterate stops the run and
    sets ``trace.diverged``.

    Returns ``(q, trace)``; ``trace.change`` holds the max-abs size of each
    step, and ``q`` is the last finite iterate.
    """
    if k < 1:
        raise ValueError("latent cardinality k must be at least 1")
    p = as_probs(p)
    m, n = p.shape
    if init is None:
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        q = random_posterior(k, m, n, rng)
    else:
        q = check_posterior(init, p.shape).copy()
    live = p > 0
    cmi0, hz0 = _loss_terms(q, p)
    cmis, hzs, changes = [float(cmi0)], [float(hz0)], [np.nan]
    diverged = False
    for _ in range(cfg.max_iters):
        g = _gradient(q, p, beta)
        if not np.all(np.isfinite(g)):
            diverged = True
            break
        new = project_simplex(q - cfg.step_size * g, axis=0)
        new = np.where(live, new, q)
        if not np.all(np.isfinite(new)):
            diverged = True
            break
        changes.append(float(np.abs(new - q).max()))
        q = new
        c, h = _loss_terms(q, p)
        cmis.append(float(c))
        hzs.append(float(h))
    cmis, hzs = np.array(cmis), np.array(hzs)
    trace = SearchTrace(beta=beta, iteration=np.arange(len(cmis)), loss=cmis + beta * hzs, cmi=cmis,
                        entropy_z=hzs, change=np.array(changes), converged=False,
                        iterations_run=len(cmis) - 1, diverged=diverged)
    return q, trace


# --- pLSA EM -----------------------------------------------------------------

@dataclass(frozen=True)
class PlsaFactors:
    """Symmetric pLSA model ``p(z) p(x|z) p(y|z)``."""

    z_prior: np.ndarray  # k
    x_given_z: np.ndarray  # k x m
    y_given_z: np.ndarray  # k x n

    def __post_init__(self):
        check_dist(self.z_prior)
        for row in np.atleast_2d(self.x_given_z):
            check_dist(row)
        for row in np.atleast_2d(self.y_given_z):
            check_dist(row)

    def model_joint(self) -> np.ndarray:
        return np.einsum("z,zx,zy->xy", self.z_prior, self.x_given_z, self.y_given_z)

    def responsibilities(self) -> np.ndarray:
        """Posterior ``r(z|x,y)`` of the model, ``k x m x n``."""
        num = np.einsum("z,zx,zy->zxy", self.z_prior, self.x_given_z, self.y_given_z)
        den = num.sum(axis=0, keepdims=True)
        k = num.shape[0]
        return np.divide(num, den, out=np.full_like(num, 1.0 / k), where=den > 0)

    @classmethod
    def from_posterior(cls, p: JointLike, q) -> "PlsaFactors":
        """Factors implied by ``q(x,y,z) = q(z|x,y) p(x,y)``."""
        p = as_probs(p)
        q = check_posterior(q, p.shape)
        return _m_step(q, p)


def _m_step(r, p):
    j3 = r * p
    z = j3.sum(axis=(1, 2))
    k, m, n = j3.shape
    zs = z[:, None]
    x = np.divide(j3.sum(axis=2), zs, out=np.full((k, m), 1.0 / m), where=zs > 0)
    y = np.divide(j3.sum(axis=1), zs, out=np.full((k, n), 1.0 / n), where=zs > 0)
    return PlsaFactors(z / z.sum(), x, y)


def plsa_log_likelihood(p: JointLike, f: PlsaFactors) -> float:
    """``sum p(x,y) log2 sum_z p(z) p(x|z) p(y|z)``."""
    p = as_probs(p)
    model = f.model_joint()
    pos = p > 0
    with np.errstate(divide="ignore"):
        return float(np.sum(p[pos] * np.log2(model[pos])))


@dataclass
class EMTrace:
    log_likelihood: np.ndarray
    cmi: np.ndarray
    entropy_z: np.ndarray


def em_plsa(p: JointLike, k: int, init, iters: int = 300):
    """Fit the symmetric pLSA model by EM.

    ``init`` is either :class:`PlsaFactors` or a posterior ``q(z|x,y)``; a
    posterior is first converted to the factors it implies.  The trace holds
    the weighted log-likelihood of every iterate (entry 0 is the
    initialisation) and the ``(I(X;Y|Z), H(Z))`` of the tensor
    ``r(z|x,y) p(x,y)`` formed from the model responsibilities.
    """
    p = as_probs(p)
    f = init if isinstance(init, PlsaFactors) else PlsaFactors.from_posterior(p, init)
    if f.z_prior.shape[0] != k:
        raise ValueError(f"init has {f.z_prior.shape[0]} latent states, expected {k}")
    lls, cmis, hzs = [], [], []

    def record(f):
        r = f.responsibilities()
        c, h = _loss_terms(r, p)
        lls.append(plsa_log_likelihood(p, f))
        cmis.append(float(c))
        hzs.append(float(h))
        return r

    r = record(f)
    for _ in range(iters):
        f = _m_step(r, p)
        r = record(f)
    return f, EMTrace(np.array(lls), np.array(cmis), np.array(hzs))


# --- NMF ---------------------------------------------------------------------

def _l1(M, U, V):
    return float(np.abs(M - U @ V).sum())


def _subgradient_half(M, U, V, steps, step_size, update_left, rule="polyak"):
    """Projected subgradient on one factor; the best iterate seen is returned.

    ``rule="polyak"`` uses the step ``f / |g|^2`` aimed at a zero residual;
    ``"diminishing"`` uses normalised subgradients scaled by
    ``step_size / sqrt(t + 1)``.
    """
    best = U if update_left else V
    best_val = _l1(M, U, V)
    cur = best.copy()
    for t in range(steps):
        R = M - (cur @ V if update_left else U @ cur)
        s = np.sign(R)
        g = -s @ V.T if update_left else -U.T @ s
        if rule == "polyak":
            gg = float((g * g).sum())
            f = float(np.abs(R).sum())
            if gg == 0 or f == 0:
                break
            cur = np.maximum(cur - (f / gg) * g, 0.0)
        else:
            gmax = np.abs(g).max()
            if gmax == 0:
                break
            cur = np.maximum(cur - (step_size / np.sqrt(t + 1.0)) * g / gmax, 0.0)
        val = _l1(M, cur, V) if update_left else _l1(M, U, cur)
        if val < best_val:
            best, best_val = cur.copy(), val
    return best


def _balance(U, V):
    nu = np.linalg.norm(U, axis=0)
    nv = np.linalg.norm(V, axis=1)
    ok = (nu > 0) & (nv > 0)
    s = np.ones_like(nu)
    s[ok] = np.sqrt(nv[ok] / nu[ok])
    return U * s, V / s[:, None]


def nmf_factorize(p: JointLike, k: int, cfg: BaselineConfig = BaselineConfig(max_iters=200),
                  rng: np.random.Generator | None = None, return_history: bool = False):
    """Alternating l1 non-negative factorisation ``p ≈ U V``.

    Each half-iteration runs ``cfg.nmf_inner_iters`` projected subgradient
    steps on one factor with the other fixed (step rule ``cfg.nmf_step``) and
    keeps the best iterate; the outer residual is therefore non-increasing.  ``cfg.max_iters`` outer iterations
    are run.

    Returns ``(U, V, l1_residual)`` and, with ``return_history``, the residual
    after every outer iteration.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    M = as_probs(p)
    m, n = M.shape
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    scale = np.sqrt(M.sum() / (m * n * k))
    U = rng.uniform(0.5, 1.5, size=(m, k)) * scale
    V = rng.uniform(0.5, 1.5, size=(k, n)) * scale
    hist = [_l1(M, U, V)]
    for _ in range(cfg.max_iters):
        U = _subgradient_half(M, U, V, cfg.nmf_inner_iters, cfg.step_size, True, cfg.nmf_step)
        V = _subgradient_half(M, U, V, cfg.nmf_inner_iters, cfg.step_size, False, cfg.nmf_step)
        U, V = _balance(U, V)
        hist.append(_l1(M, U, V))
    if return_history:
        return U, V, hist[-1], np.array(hist)
    return U, V, hist[-1]


def nmf_posterior(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """``q(z|x,y) ∝ U[x,z] V[z,y]``; cells with no support get uniform."""
    num = np.einsum("xz,zy->zxy", U, V)
    den = num.sum(axis=0, keepdims=True)
    k = num.shape[0]
    return np.divide(num, den, out=np.full_like(num, 1.0 / k), where=den > 0)


def nmf_latent_diagnostics(p: JointLike, U: np.ndarray, V: np.ndarray) -> tuple[float, float]:
    """``(H(Z), I(X;Y|Z))`` implied by an NMF of ``p``.

    ``H(Z)`` comes from the row sums of ``V`` after the columns of ``U`` are
    scaled to sum to one; the residual dependence is that of
    ``q(z|x,y) p(x,y)`` with the posterior of :func:`nmf_posterior`.
    """
    p = as_probs(p)
    colsum = U.sum(axis=0)
    mass = V.sum(axis=1) * colsum
    pz = mass / mass.sum() if mass.sum() > 0 else np.full(len(mass), 1.0 / len(mass))
    hz = float(max(_entropy(pz, None), 0.0))
    cmi, _ = _loss_terms(nmf_posterior(U, V), p)
    return hz, float(cmi)


def latent_search_converged(p, q, beta) -> float:
    """Max-abs LatentSearch step residual at ``q`` (helper for comparisons)."""
    p = as_probs(p)
    diff = np.abs(_step(np.asarray(q, float), p, beta) - q)
    return float(diff[:, p > 0].max(initial=0.0))
