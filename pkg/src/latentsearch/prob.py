"""Exact discrete-probability primitives.

All information quantities are in bits. ``0 log 0`` is taken as 0 and ratios
whose numerator mass is 0 contribute nothing.

Array conventions
-----------------
* a distribution (``Dist1``) is a 1-d array summing to one;
* an observed joint ``p(x, y)`` is an ``m x n`` array, optionally wrapped in
  :class:`Joint2` to carry state labels;
* a posterior ``q(z|x,y)`` is a ``k x m x n`` array whose z-axis sums to one in
  every cell;
* a three-way joint ``q(x,y,z)`` uses the same ``k x m x n`` layout.

The private helpers accept arbitrary leading batch axes so that many restarts
can be iterated in one vectorised pass.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

NORM_TOL = 1e-9
Q_FLOOR = 1e-12


class DistributionError(ValueError):
    """Raised when an array violates a probability invariant."""


def check_dist(d, tol: float = NORM_TOL) -> np.ndarray:
    """Validate a probability vector and return it as a float array."""
    d = np.asarray(d, dtype=float)
    if d.ndim != 1 or d.size == 0:
        raise DistributionError(f"expected a non-empty vector, got shape {d.shape}")
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise DistributionError("distribution has negative or non-finite entries")
    s = d.sum()
    if abs(s - 1.0) > tol:
        raise DistributionError(f"distribution sums to {float(s):.12g}, not 1")
    return d


def check_joint3(j3, tol: float = NORM_TOL) -> np.ndarray:
    j3 = np.asarray(j3, dtype=float)
    if j3.ndim != 3:
        raise DistributionError(f"expected a k x m x n tensor, got shape {j3.shape}")
    if not np.all(np.isfinite(j3)) or np.any(j3 < 0):
        raise DistributionError("joint has negative or non-finite entries")
    s = j3.sum()
    if abs(s - 1.0) > tol:
        raise DistributionError(f"joint sums to {float(s):.12g}, not 1")
    return j3


def check_posterior(q, shape: tuple[int, int] | None = None, tol: float = NORM_TOL) -> np.ndarray:
    """Validate ``q(z|x,y)``: non-negative, z-axis normalised in every cell."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 3 or q.shape[0] < 1:
        raise DistributionError(f"expected a k x m x n posterior, got shape {q.shape}")
    if shape is not None and q.shape[1:] != tuple(shape):
        raise DistributionError(f"posterior cells {q.shape[1:]} do not match joint {tuple(shape)}")
    if not np.all(np.isfinite(q)) or np.any(q < 0):
        raise DistributionError("posterior has negative or non-finite entries")
    worst = np.max(np.abs(q.sum(axis=0) - 1.0))
    if worst > tol:
        raise DistributionError(f"posterior cell sums deviate from 1 by {worst!r}")
    return q


@dataclass(frozen=True)
class Joint2:
    """Observed joint ``p(x, y)`` with optional state labels.

    Rows index X states and columns index Y states.
    """

    probs: np.ndarray
    labels_x: tuple = field(default=())
    labels_y: tuple = field(default=())

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 2 or 0 in probs.shape:
            raise DistributionError(f"expected a non-empty m x n matrix, got shape {probs.shape}")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise DistributionError("joint has negative or non-finite entries")
        s = probs.sum()
        if abs(s - 1.0) > NORM_TOL:
            raise DistributionError(f"joint sums to {float(s):.12g}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        m, n = probs.shape
        lx = tuple(self.labels_x) or tuple(str(i) for i in range(m))
        ly = tuple(self.labels_y) or tuple(str(j) for j in range(n))
        if len(lx) != m or len(ly) != n:
            raise DistributionError("label counts do not match the joint shape")
        object.__setattr__(self, "labels_x", lx)
        object.__setattr__(self, "labels_y", ly)

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape

    @property
    def px(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    @property
    def py(self) -> np.ndarray:
        return self.probs.sum(axis=0)


JointLike = Union[Joint2, np.ndarray, Sequence]


def as_probs(p: JointLike) -> np.ndarray:
    """Return the validated ``m x n`` probability matrix of ``p``."""
    if isinstance(p, Joint2):
        return p.probs
    return Joint2(p).probs


# --- unvalidated, batch-aware kernels -------------------------------------

def _xlogx(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a, dtype=float)
    pos = a > 0
    out[pos] = a[pos] * np.log2(a[pos])
    return out


def _entropy(a: np.ndarray, axes) -> np.ndarray:
    return -_xlogx(a).sum(axis=axes)


def _cmi(j3: np.ndarray) -> np.ndarray:
    """I(X;Y|Z) of ``(..., k, m, n)`` joints, by the direct log-ratio sum."""
    qz = j3.sum(axis=(-2, -1))
    qxz = j3.sum(axis=-1)
    qyz = j3.sum(axis=-2)
    num = j3 * qz[..., :, None, None]
    den = qxz[..., :, :, None] * qyz[..., :, None, :]
    # den can underflow for masses near the double-precision floor
    pos = (j3 > 0) & (den > 0) & (num > 0)
    ratio = np.ones_like(j3)
    np.divide(num, den, out=ratio, where=pos)
    terms = np.zeros_like(j3)
    np.multiply(j3, np.log2(ratio, out=np.zeros_like(j3), where=pos), out=terms, where=pos)
    return np.maximum(terms.sum(axis=(-3, -2, -1)), 0.0)


def _marginals(q: np.ndarray, p: np.ndarray):
    """Return ``(joint, q(z|x), q(z|y), q(z))`` for batched posteriors.

    Conditionals of zero-mass X or Y states are set to uniform.
    """
    j3 = q * p
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    k = q.shape[-3]
    sx = j3.sum(axis=-1)
    sy = j3.sum(axis=-2)
    zx = np.full_like(sx, 1.0 / k)
    zy = np.full_like(sy, 1.0 / k)
    np.divide(sx, px, out=zx, where=np.broadcast_to(px > 0, sx.shape))
    np.divide(sy, py, out=zy, where=np.broadcast_to(py > 0, sy.shape))
    qz = sx.sum(axis=-1)
    return j3, zx, zy, qz


def _normalizer_terms(zx, qz, beta):
    """``q(z|x) / q(z)^(1-beta)`` with q(z) floored away from zero."""
    beta = np.asarray(beta, dtype=float)
    qzf = np.maximum(qz, Q_FLOOR)
    qzf = qzf / qzf.sum(axis=-1, keepdims=True)
    scale = qzf ** (beta[..., None] - 1.0)
    return zx * scale[..., None]


# --- public operations ------------------------------------------------------

def entropy(d) -> float:
    """Shannon entropy of a probability vector, in bits.

    Examples
    --------
    >>> entropy([0.5, 0.25, 0.25])
    1.5
    """
    d = check_dist(d)
    return float(max(_entropy(d, None), 0.0))


def mutual_information(p: JointLike) -> float:
    """I(X;Y) in bits, computed as ``H(X) + H(Y) - H(X,Y)``."""
    p = as_probs(p)
    mi = _entropy(p.sum(axis=1), None) + _entropy(p.sum(axis=0), None) - _entropy(p, None)
    return float(max(mi, 0.0))


def conditional_mutual_information(j3) -> float:
    """I(X;Y|Z) in bits of a three-way joint laid out as ``k x m x n``.

    Evaluated as ``sum q(x,y,z) log[q(x,y,z) q(z) / (q(x,z) q(y,z))]``;
    tiny negative round-off is clamped to zero.
    """
    j3 = check_joint3(j3)
    return float(_cmi(j3))


def sample_simplex(dim: int, alpha=1.0, rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw one point from Dirichlet(alpha) on the ``dim``-simplex.

    ``alpha`` may be a scalar (broadcast to every coordinate) or a vector of
    length ``dim``; ``alpha = 1`` is the uniform measure on the simplex.
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (dim,))
    if np.any(alpha <= 0) or not np.all(np.isfinite(alpha)):
        raise ValueError("Dirichlet parameters must be positive")
    if dim == 1:
        return np.ones(1)
    rng = np.random.default_rng() if rng is None else rng
    return rng.dirichlet(alpha)


def random_posterior(k: int, m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """A ``k x m x n`` posterior with every cell uniform on the k-simplex."""
    if k < 1:
        raise ValueError("latent cardinality k must be at least 1")
    if k == 1:
        return np.ones((1, m, n))
    return np.moveaxis(rng.dirichlet(np.ones(k), size=(m, n)), -1, 0)


def joint_from_posterior(p: JointLike, q) -> np.ndarray:
    """Form ``q(x,y,z) = q(z|x,y) p(x,y)``."""
    p = as_probs(p)
    q = check_posterior(q, p.shape)
    return q * p


@dataclass(frozen=True)
class MarginalSet:
    """Marginals of a three-way joint plus the update normaliser ``N(x, y)``."""

    z_given_x: np.ndarray  # k x m
    z_given_y: np.ndarray  # k x n
    z: np.ndarray  # k
    normalizer: np.ndarray  # m x n


def marginal_set(j3, beta: float) -> MarginalSet:
    """Marginalise ``q(x,y,z)`` and evaluate ``N(x,y)`` at trade-off ``beta``.

    ``N(x,y) = sum_z q(z|x) q(z|y) / q(z)^(1-beta)``, with ``q(z)`` floored at
    ``1e-12`` before the power is taken.
    """
    j3 = check_joint3(j3)
    p = j3.sum(axis=0)
    k = j3.shape[0]
    # recover the posterior from the joint; empty cells get uniform
    q = np.full_like(j3, 1.0 / k)
    np.divide(j3, p, out=q, where=np.broadcast_to(p > 0, j3.shape))
    _, zx, zy, qz = _marginals(q, p)
    w = _normalizer_terms(zx, qz, beta)
    norm = np.einsum("zx,zy->xy", w, zy)
    return MarginalSet(zx, zy, qz, norm)


def marginal_entropies(p: JointLike) -> tuple[float, float]:
    """``(H(X), H(Y))`` of an observed joint."""
    p = as_probs(p)
    return float(_entropy(p.sum(axis=1), None)), float(_entropy(p.sum(axis=0), None))
