"""Kernel (Gram) matrix construction, normalization, and validation.

Supported kernel functions on feature vectors x, y:

    linear       <x, y>
    gaussian     exp(-||x - y||^2 / sigma)
    polynomial   (<x, y> + 1) ** degree
    bagofwords   <x, y> / (||x|| * ||y||)       (cosine similarity)
    identity     1 iff same training index      (index-based, no vectors)

The identity kernel exists only to absorb noise inside a kernel mixture:
it is the identity matrix over training samples, and its cross-kernel
values against unseen points are 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PSD_TOL = 1e-8

KERNEL_KINDS = ("linear", "gaussian", "polynomial", "bagofwords", "identity")


class KernelError(ValueError):
    """Invalid kernel specification or kernel evaluation input."""


@dataclass(frozen=True)
class KernelSpec:
    """Parameterized kernel function choice.

    sigma is required (> 0) for gaussian kernels, degree (>= 1) for
    polynomial kernels; the identity kind ignores all parameters.
    """

    kind: str
    sigma: float | None = None
    degree: int | None = None
    trace_normalize: bool = False

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise KernelError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.sigma is None or self.sigma <= 0:
                raise KernelError("gaussian kernel requires sigma > 0")
        if self.kind == "polynomial":
            if self.degree is None or int(self.degree) < 1:
                raise KernelError("polynomial kernel requires degree >= 1")

    def describe(self) -> dict:
        out: dict = {"kind": self.kind, "trace_normalize": self.trace_normalize}
        if self.kind == "gaussian":
            out["sigma"] = float(self.sigma)
        if self.kind == "polynomial":
            out["degree"] = int(self.degree)
        return out


@dataclass(frozen=True)
class GramMatrix:
    """Dense symmetric PSD matrix of pairwise kernel values.

    `scale` records the constant the raw kernel values were multiplied by
    (1/trace for trace-normalized matrices) so prediction-time kernel rows
    can be scaled consistently.
    """

    values: np.ndarray
    size: int = field(default=0)
    scale: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise KernelError("Gram matrix must be square")
        v = np.ascontiguousarray(v)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "size", v.shape[0])

    @property
    def trace(self) -> float:
        return float(np.trace(self.values))


@dataclass(frozen=True)
class PsdReport:
    min_eigenvalue: float
    max_eigenvalue: float
    tol: float
    passed: bool


def _check_pair(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise KernelError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return x, y


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Evaluate k(x, y) for one pair of feature vectors.

    The identity kind is defined only on indexed training samples and
    rejects raw vectors.
    """
    if spec.kind == "identity":
        raise KernelError("identity kernel is index-based; it has no value on raw vectors")
    x, y = _check_pair(x, y)
    if spec.kind == "linear":
        return float(x @ y)
    if spec.kind == "gaussian":
        d = x - y
        return float(np.exp(-(d @ d) / spec.sigma))
    if spec.kind == "polynomial":
        return float((x @ y + 1.0) ** int(spec.degree))
    # bagofwords: cosine similarity, undefined on zero vectors
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise KernelError("bagofwords kernel undefined for zero-norm vector")
    return float((x @ y) / (nx * ny))


def _as_matrix(samples) -> np.ndarray:
    X = np.asarray(samples, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise KernelError("need a nonempty list of equal-length feature vectors")
    return X


def _pairwise_sqdist(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    nx = np.sum(X * X, axis=1)
    ny = np.sum(Y * Y, axis=1)
    d2 = nx[:, None] + ny[None, :] - 2.0 * (X @ Y.T)
    return np.maximum(d2, 0.0)


def _raw_gram(spec: KernelSpec, X: np.ndarray) -> np.ndarray:
    if spec.kind == "linear":
        return X @ X.T
    if spec.kind == "gaussian":
        return np.exp(-_pairwise_sqdist(X, X) / spec.sigma)
    if spec.kind == "polynomial":
        return (X @ X.T + 1.0) ** int(spec.degree)
    if spec.kind == "bagofwords":
        norms = np.linalg.norm(X, axis=1)
        if np.any(norms == 0.0):
            raise KernelError("bagofwords kernel undefined for zero-norm vector")
        Xn = X / norms[:, None]
        return Xn @ Xn.T
    return np.eye(X.shape[0])


def gram_matrix(spec: KernelSpec, samples) -> GramMatrix:
    """Assemble the symmetric matrix of pairwise kernel values.

    Applies trace normalization (divide by the trace so trace = 1) when
    spec.trace_normalize is set.
    """
    X = _as_matrix(samples)
    G = _raw_gram(spec, X)
    G = 0.5 * (G + G.T)  # kill float asymmetry from BLAS
    scale = 1.0
    if spec.trace_normalize:
        tr = float(np.trace(G))
        if tr <= 0.0:
            raise KernelError("cannot trace-normalize a matrix with nonpositive trace")
        scale = 1.0 / tr
        G = G * scale
    return GramMatrix(values=G, scale=scale)


def kernel_row(spec: KernelSpec, train_samples, x, scale: float = 1.0) -> np.ndarray:
    """Vector of k(x_i, x) against the training samples, times `scale`.

    `scale` should be the GramMatrix.scale of the matching training Gram
    so that mixture weights trained on normalized kernels stay valid at
    prediction time. Identity-kind rows are all zeros: an unseen point has
    no identity overlap with any training sample.
    """
    X = _as_matrix(train_samples)
    if spec.kind == "identity":
        return np.zeros(X.shape[0])
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != X.shape[1]:
        raise KernelError(f"dimension mismatch: {X.shape[1]} vs {x.shape[0]}")
    if spec.kind == "linear":
        row = X @ x
    elif spec.kind == "gaussian":
        row = np.exp(-_pairwise_sqdist(X, x[None, :])[:, 0] / spec.sigma)
    elif spec.kind == "polynomial":
        row = (X @ x + 1.0) ** int(spec.degree)
    else:
        nx = np.linalg.norm(x)
        norms = np.linalg.norm(X, axis=1)
        if nx == 0.0 or np.any(norms == 0.0):
            raise KernelError("bagofwords kernel undefined for zero-norm vector")
        row = (X @ x) / (norms * nx)
    return row * scale


def cross_gram(spec: KernelSpec, train_samples, test_samples, scale: float = 1.0) -> np.ndarray:
    """(n_test, n_train) matrix of k(x_i, x) rows for a batch of test points.

    Identity-kind blocks are all zeros (unseen points share no index with
    training samples).
    """
    X = _as_matrix(train_samples)
    if spec.kind == "identity":
        T = np.asarray(test_samples)
        n_test = T.shape[0] if T.ndim >= 1 else 0
        return np.zeros((n_test, X.shape[0]))
    T = _as_matrix(test_samples)
    if T.shape[1] != X.shape[1]:
        raise KernelError(f"dimension mismatch: {X.shape[1]} vs {T.shape[1]}")
    if spec.kind == "linear":
        R = T @ X.T
    elif spec.kind == "gaussian":
        R = np.exp(-_pairwise_sqdist(T, X) / spec.sigma)
    elif spec.kind == "polynomial":
        R = (T @ X.T + 1.0) ** int(spec.degree)
    else:
        tn = np.linalg.norm(T, axis=1)
        xn = np.linalg.norm(X, axis=1)
        if np.any(tn == 0.0) or np.any(xn == 0.0):
            raise KernelError("bagofwords kernel undefined for zero-norm vector")
        R = (T @ X.T) / (tn[:, None] * xn[None, :])
    return R * scale


def median_sqdist(samples) -> float:
    """Median pairwise squared distance (gaussian bandwidth heuristic)."""
    X = _as_matrix(samples)
    d2 = _pairwise_sqdist(X, X)
    iu = np.triu_indices(X.shape[0], k=1)
    if iu[0].size == 0:
        return 1.0
    med = float(np.median(d2[iu]))
    return med if med > 0.0 else 1.0


def validate_psd(G: GramMatrix | np.ndarray, tol: float = PSD_TOL) -> PsdReport:
    """Check Mercer's condition: smallest eigenvalue >= -tol * largest.

    Raises on non-square or asymmetric input; returns an eigenvalue report
    otherwise.
    """
    v = G.values if isinstance(G, GramMatrix) else np.asarray(G, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise KernelError("PSD validation needs a square matrix")
    sym_err = float(np.max(np.abs(v - v.T))) if v.size else 0.0
    vmax = float(np.max(np.abs(v))) if v.size else 0.0
    if sym_err > 1e-10 * max(1.0, vmax):
        raise KernelError(f"matrix is not symmetric (max asymmetry {sym_err:.3e})")
    eig = np.linalg.eigvalsh(0.5 * (v + v.T))
    lo, hi = float(eig[0]), float(eig[-1])
    passed = lo >= -tol * max(hi, 0.0) if hi > 0.0 else lo >= -tol
    return PsdReport(min_eigenvalue=lo, max_eigenvalue=hi, tol=tol, passed=passed)
