"""Objective families: multinomial logistic regression, geometric median,
the two-atom hard instance, and synthetic heavy-tailed data generation.

Each family is packaged as a :class:`Problem` exposing per-sample losses,
(sub)gradients, per-sample Lipschitz constants and per-sample minima.
Subgradients at kinks return the minimal-norm element.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .domains import UNCONSTRAINED


@dataclass
class Dataset:
    """Feature matrix with integer class labels."""

    features: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,)
    bias_appended: bool = False

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels must have the same length")
        if self.features.shape[0] < 1:
            raise ValueError("dataset must contain at least one sample")
        if np.any(self.labels < 0):
            raise ValueError("labels must be nonnegative integers")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1

    def with_bias(self) -> "Dataset":
        """Return a copy with a constant-1 coordinate appended to every row."""
        if self.bias_appended:
            raise ValueError("bias coordinate already appended")
        ones = np.ones((self.n, 1))
        return Dataset(np.hstack([self.features, ones]), self.labels.copy(), True)


def load_dataset_csv(path, append_bias: bool = False) -> Dataset:
    """Load rows of d floats plus a trailing integer label; header optional."""
    rows: list[list[str]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for record in csv.reader(fh):
            if record:
                rows.append(record)
    if not rows:
        raise ValueError(f"empty dataset file: {path}")
    try:
        [float(tok) for tok in rows[0]]
    except ValueError:
        rows = rows[1:]  # header row
        if not rows:
            raise ValueError(f"dataset file has a header but no rows: {path}")
    width = len(rows[0])
    if width < 2:
        raise ValueError("rows must contain at least one feature and a label")
    data = np.empty((len(rows), width))
    for i, record in enumerate(rows):
        if len(record) != width:
            raise ValueError(f"row {i} has {len(record)} fields, expected {width}")
        data[i] = [float(tok) for tok in record]
    labels_f = data[:, -1]
    labels = labels_f.astype(int)
    if np.any(labels_f != labels):
        raise ValueError("trailing column must hold integer labels")
    ds = Dataset(data[:, :-1], labels)
    return ds.with_bias() if append_bias else ds


@dataclass
class Problem:
    """An ERM objective bundle: f(w) = (1/n) sum_i f_i(w).

    ``lipschitz[i]`` upper-bounds the per-sample (sub)gradient norm over the
    domain; ``per_sample_min[i]``, when present, is min_w f_i(w). Optional
    vectorised ``batch_loss``/``batch_grad`` take (w, indices) and evaluate
    many samples at once; the scalar entry points remain authoritative.
    """

    n: int
    dim: int
    loss: Callable[[np.ndarray, int], float]
    grad: Callable[[np.ndarray, int], np.ndarray]
    lipschitz: np.ndarray
    per_sample_min: np.ndarray | None = None
    domain: object = field(default_factory=lambda: UNCONSTRAINED)
    smoothness: float | None = None
    batch_loss: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    batch_grad: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def per_sample_lipschitz(self, i: int) -> float:
        return float(self.lipschitz[i])

    def losses_at(self, w: np.ndarray, indices: np.ndarray | None = None) -> np.ndarray:
        idx = np.arange(self.n) if indices is None else np.asarray(indices)
        if self.batch_loss is not None:
            return self.batch_loss(w, idx)
        return np.array([self.loss(w, int(i)) for i in idx])

    def grads_at(self, w: np.ndarray, indices: np.ndarray | None = None) -> np.ndarray:
        idx = np.arange(self.n) if indices is None else np.asarray(indices)
        if self.batch_grad is not None:
            return self.batch_grad(w, idx)
        if len(idx) == 0:
            return np.zeros((0, self.dim))
        return np.stack([self.grad(w, int(i)) for i in idx])

    def objective(self, w: np.ndarray) -> float:
        return float(self.losses_at(w).mean())

    def full_gradient(self, w: np.ndarray) -> np.ndarray:
        return self.grads_at(w).sum(axis=0) / self.n


# ---------------------------------------------------------------------------
# Multinomial logistic regression
# ---------------------------------------------------------------------------


def _check_logistic_shapes(w: np.ndarray, x: np.ndarray, y: int) -> int:
    d = x.size
    if d == 0 or w.size % d != 0:
        raise ValueError(f"parameter size {w.size} is not a multiple of feature size {d}")
    m = w.size // d
    if m < 2:
        raise ValueError("at least two classes required")
    if not 0 <= y < m:
        raise ValueError(f"label {y} out of range for {m} classes")
    return m


def logistic_loss(w: np.ndarray, x: np.ndarray, y: int) -> float:
    """Softmax cross-entropy -log p_y with log-sum-exp stabilisation.

    ``w`` concatenates one d-dimensional block per class.
    """
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    m = _check_logistic_shapes(w, x, y)
    logits = w.reshape(m, x.size) @ x
    z = logits - logits.max()
    return float(np.log(np.exp(z).sum()) - z[y])


def logistic_grad(w: np.ndarray, x: np.ndarray, y: int) -> np.ndarray:
    """Gradient of the cross-entropy: block j equals (p_j - 1{j=y}) * x."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    m = _check_logistic_shapes(w, x, y)
    logits = w.reshape(m, x.size) @ x
    z = np.exp(logits - logits.max())
    p = z / z.sum()
    coeff = p.copy()
    coeff[y] -= 1.0
    return np.outer(coeff, x).ravel()


def logistic_grad_norm_exact(p: np.ndarray, y: int, x_norm: float) -> float:
    """Closed-form gradient norm sqrt(sum_{j != y} p_j^2 + (1-p_y)^2) * ||x||."""
    p = np.asarray(p, dtype=float)
    if abs(float(p.sum()) - 1.0) > 1e-8:
        raise ValueError("p must sum to 1")
    others = np.delete(p, y)
    return float(math.sqrt(float(others @ others) + (1.0 - p[y]) ** 2) * x_norm)


def per_sample_lipschitz_logistic(x: np.ndarray) -> float:
    """sqrt(2) * ||(x, 1)|| for a raw feature vector (bias appended)."""
    x = np.asarray(x, dtype=float)
    return float(math.sqrt(2.0) * math.sqrt(float(x @ x) + 1.0))


def logistic_problem(
    dataset: Dataset,
    num_classes: int | None = None,
    domain=UNCONSTRAINED,
) -> Problem:
    """Multinomial logistic ERM over the dataset's rows as stored.

    The per-sample Lipschitz constant is sqrt(2) times the stored row norm,
    so append the bias coordinate before calling when one is wanted. The
    per-sample infimum of the cross-entropy is 0.
    """
    X = dataset.features
    y = dataset.labels
    n, d = X.shape
    m = int(num_classes) if num_classes is not None else dataset.num_classes
    if m < 2:
        raise ValueError("at least two classes required")
    if int(y.max()) >= m:
        raise ValueError("labels exceed the declared number of classes")
    lipschitz = math.sqrt(2.0) * np.linalg.norm(X, axis=1)

    def one_loss(w: np.ndarray, i: int) -> float:
        return logistic_loss(w, X[i], int(y[i]))

    def one_grad(w: np.ndarray, i: int) -> np.ndarray:
        return logistic_grad(w, X[i], int(y[i]))

    def batch_loss(w: np.ndarray, idx: np.ndarray) -> np.ndarray:
        logits = X[idx] @ w.reshape(m, d).T
        zmax = logits.max(axis=1, keepdims=True)
        z = logits - zmax
        lse = np.log(np.exp(z).sum(axis=1))
        return lse - z[np.arange(len(idx)), y[idx]]

    def batch_grad(w: np.ndarray, idx: np.ndarray) -> np.ndarray:
        if len(idx) == 0:
            return np.zeros((0, m * d))
        logits = X[idx] @ w.reshape(m, d).T
        z = np.exp(logits - logits.max(axis=1, keepdims=True))
        p = z / z.sum(axis=1, keepdims=True)
        p[np.arange(len(idx)), y[idx]] -= 1.0
        return np.einsum("bm,bd->bmd", p, X[idx]).reshape(len(idx), m * d)

    return Problem(
        n=n,
        dim=m * d,
        loss=one_loss,
        grad=one_grad,
        lipschitz=lipschitz,
        per_sample_min=np.zeros(n),
        domain=domain,
        smoothness=0.5 * float(np.mean(np.sum(X * X, axis=1))),
        batch_loss=batch_loss,
        batch_grad=batch_grad,
    )


# ---------------------------------------------------------------------------
# Geometric median (sharpness example)
# ---------------------------------------------------------------------------


def geometric_median_problem(anchors: np.ndarray, domain=UNCONSTRAINED) -> Problem:
    """f_i(w) = ||w - anchor_i||, the canonical sharp nonsmooth convex family.

    Each f_i is 1-Lipschitz with infimum 0; the subgradient at an anchor is 0.
    """
    A = np.atleast_2d(np.asarray(anchors, dtype=float))
    n, d = A.shape

    def one_loss(w: np.ndarray, i: int) -> float:
        return float(np.linalg.norm(w - A[i]))

    def one_grad(w: np.ndarray, i: int) -> np.ndarray:
        delta = w - A[i]
        norm = float(np.linalg.norm(delta))
        if norm == 0.0:
            return np.zeros(d)
        return delta / norm

    def batch_loss(w: np.ndarray, idx: np.ndarray) -> np.ndarray:
        return np.linalg.norm(w - A[idx], axis=1)

    def batch_grad(w: np.ndarray, idx: np.ndarray) -> np.ndarray:
        delta = w - A[idx]
        norms = np.linalg.norm(delta, axis=1)
        out = np.zeros_like(delta)
        nz = norms > 0
        out[nz] = delta[nz] / norms[nz, None]
        return out

    return Problem(
        n=n,
        dim=d,
        loss=one_loss,
        grad=one_grad,
        lipschitz=np.ones(n),
        per_sample_min=np.zeros(n),
        domain=domain,
        batch_loss=batch_loss,
        batch_grad=batch_grad,
    )


def sharpness_radius(anchors: np.ndarray, w_star: np.ndarray) -> float:
    """Radius beyond which suboptimality grows at rate 1/4 of the distance.

    Given a minimizer estimate w*, returns
    max(2 ||mean - w*||, (4/n) sum_i ||mean - anchor_i||).
    """
    A = np.atleast_2d(np.asarray(anchors, dtype=float))
    centroid = A.mean(axis=0)
    return max(
        2.0 * float(np.linalg.norm(centroid - w_star)),
        4.0 * float(np.mean(np.linalg.norm(A - centroid, axis=1))),
    )


# ---------------------------------------------------------------------------
# Hard instance for the unconstrained lower bound
# ---------------------------------------------------------------------------


def lower_bound_loss(w: np.ndarray, x: np.ndarray) -> tuple[float, np.ndarray]:
    """-<w, x> + 2 ||x|| max(||w|| - 1, 0) and a subgradient.

    At ||w|| = 1 the hinge coefficient is taken as 0 (minimal-norm element).
    """
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    xnorm = float(np.linalg.norm(x))
    wnorm = float(np.linalg.norm(w))
    value = -float(w @ x) + 2.0 * xnorm * max(wnorm - 1.0, 0.0)
    sub = -x.copy()
    if wnorm > 1.0:
        sub = sub + (2.0 * xnorm / wnorm) * w
    return value, sub


@dataclass(frozen=True)
class QvSpec:
    """Two-atom distribution on {0, p^{-1/k} v} with P(nonzero atom) = p.

    ``v`` is binary with exactly half its coordinates equal to 1.
    """

    v: np.ndarray
    p: float
    k: float

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        object.__setattr__(self, "v", v)
        if not np.all((v == 0) | (v == 1)):
            raise ValueError("v must be a binary vector")
        d = v.size
        if d % 2 != 0 or int(v.sum()) != d // 2:
            raise ValueError("v must have exactly d/2 coordinates equal to 1")
        if not 0 < self.p < 0.5:
            raise ValueError("p must lie in (0, 1/2)")
        if not self.k > 1:
            raise ValueError("k must exceed 1")

    @property
    def heavy_atom(self) -> np.ndarray:
        return self.p ** (-1.0 / self.k) * self.v


def sample_Qv(spec: QvSpec, rng: np.random.Generator) -> np.ndarray:
    """One draw: the zero vector w.p. 1-p, else p^{-1/k} v."""
    if rng.random() < spec.p:
        return spec.heavy_atom.copy()
    return np.zeros(spec.v.size)


def sample_Qv_many(spec: QvSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorised draws, one per row."""
    mask = rng.random(count) < spec.p
    return np.outer(mask.astype(float), spec.heavy_atom)


def hard_instance_problem(xs: np.ndarray, domain=UNCONSTRAINED) -> Problem:
    """ERM over the hinge-penalised linear losses on the given samples.

    Per-sample Lipschitz constants are 3 ||x_i||; per-sample minima -||x_i||.
    """
    X = np.atleast_2d(np.asarray(xs, dtype=float))
    n, d = X.shape
    norms = np.linalg.norm(X, axis=1)

    def one_loss(w: np.ndarray, i: int) -> float:
        return lower_bound_loss(w, X[i])[0]

    def one_grad(w: np.ndarray, i: int) -> np.ndarray:
        return lower_bound_loss(w, X[i])[1]

    def batch_loss(w: np.ndarray, idx: np.ndarray) -> np.ndarray:
        hinge = max(float(np.linalg.norm(w)) - 1.0, 0.0)
        return -(X[idx] @ w) + 2.0 * norms[idx] * hinge

    def batch_grad(w: np.ndarray, idx: np.ndarray) -> np.ndarray:
        out = -X[idx].copy()
        wnorm = float(np.linalg.norm(w))
        if wnorm > 1.0:
            out = out + np.outer(2.0 * norms[idx] / wnorm, w)
        return out

    return Problem(
        n=n,
        dim=d,
        loss=one_loss,
        grad=one_grad,
        lipschitz=3.0 * norms,
        per_sample_min=-norms,
        domain=domain,
        batch_loss=batch_loss,
        batch_grad=batch_grad,
    )


# ---------------------------------------------------------------------------
# Synthetic dataset generators
# ---------------------------------------------------------------------------


def _planted_labels(X: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    # noiseless linear rule: labels are exactly realisable, so the relaxed
    # interpolation condition holds by construction
    w_true = rng.normal(size=(m, X.shape[1]))
    return np.argmax(X @ w_true.T, axis=1)


def heavy_tailed_logistic_dataset(
    n: int,
    d: int,
    m: int,
    tail_k: float,
    rng: np.random.Generator,
) -> Dataset:
    """Features r * u with u uniform on the sphere and r Pareto(1, tail_k + 1).

    The radius law has E[r^tail_k] = tail_k + 1 finite but unbounded support;
    ``tail_k = math.inf`` degenerates to unit radii. Labels come from a
    planted noiseless linear rule.
    """
    if not (tail_k > 1):
        raise ValueError("tail_k must exceed 1")
    u = rng.normal(size=(n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    if math.isinf(tail_k):
        r = np.ones(n)
    else:
        r = 1.0 + rng.pareto(tail_k + 1.0, size=n)
    X = u * r[:, None]
    return Dataset(X, _planted_labels(X, m, rng))


def planted_logistic_dataset(
    n: int,
    d: int,
    m: int,
    rng: np.random.Generator,
    norm_low: float = 1.0,
    norm_high: float = 1.0,
) -> Dataset:
    """Separable logistic data with log-uniform feature norms in [low, high].

    Spreading the norms spreads the per-sample Lipschitz constants, giving a
    controllable max/min ratio.
    """
    if not 0 < norm_low <= norm_high:
        raise ValueError("need 0 < norm_low <= norm_high")
    u = rng.normal(size=(n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = np.exp(rng.uniform(math.log(norm_low), math.log(norm_high), size=n))
    X = u * r[:, None]
    return Dataset(X, _planted_labels(X, m, rng))
