"""Independent oracles and instance generators shared by the test suite.

Everything here recomputes results by a different route than the library
code under test: brute-force projected gradient for the SVM dual,
exhaustive simplex grids for MKL, finite differences for gradients, and
naive double loops for tf-idf and the performance measures.
"""

from __future__ import annotations

import math

import numpy as np

from newsmkl.kernels import KernelSpec, gram_matrix
from newsmkl.mkl import MklProblem, MklState, mkl_objective
from newsmkl.svm import TrainingSet, solve_dual

# ---------------------------------------------------------------------------
# SVM dual: spectral projected gradient on the box/hyperplane feasible set
# ---------------------------------------------------------------------------


def project_box_hyperplane(v: np.ndarray, y: np.ndarray, C: float, n_bisect: int = 64) -> np.ndarray:
    """Euclidean projection onto {0 <= a <= C, y'a = 0} by bisection on the
    hyperplane multiplier (the residual is monotone in it)."""
    lo = -(float(np.max(np.abs(v))) + C + 1.0)
    hi = -lo
    for _ in range(n_bisect):
        lam = 0.5 * (lo + hi)
        if float(np.clip(v - lam * y, 0.0, C) @ y) > 0.0:
            lo = lam
        else:
            hi = lam
    return np.clip(v - 0.5 * (lo + hi) * y, 0.0, C)


def qp_projected_gradient(K: np.ndarray, y: np.ndarray, C: float,
                          max_iter: int = 30000, tol: float = 1e-12) -> tuple[np.ndarray, float]:
    """Maximize e'a - 1/2 a'Qa over the feasible set by projected gradient
    (Barzilai-Borwein steps, nonmonotone backtracking). Returns (a, objective)."""
    Q = (y[:, None] * y[None, :]) * K
    L = max(float(np.linalg.norm(Q, 2)), 1e-12)
    a = project_box_hyperplane(np.full(y.shape[0], min(C, 1.0) / 2.0), y, C)
    g = Q @ a - 1.0

    def fval(x):
        return 0.5 * float(x @ (Q @ x)) - float(x.sum())

    step = 1.0 / L
    recent = [fval(a)]
    for _ in range(max_iter):
        cand = project_box_hyperplane(a - step * g, y, C)
        d = cand - a
        if float(np.linalg.norm(d)) <= tol * max(1.0, float(np.linalg.norm(a))):
            break
        gd = float(g @ d)
        fref = max(recent[-10:])
        t = 1.0
        while t > 1e-13:
            if fval(a + t * d) <= fref + 1e-4 * t * gd:
                break
            t *= 0.5
        a_new = a + t * d
        g_new = Q @ a_new - 1.0
        s = a_new - a
        dg = g_new - g
        sy = float(s @ dg)
        step = min(max(float(s @ s) / sy if sy > 1e-300 else 1.0 / L, 1e-10), 1e10)
        a, g = a_new, g_new
        recent.append(fval(a))
    return a, float(a.sum()) - 0.5 * float(a @ (Q @ a))


# ---------------------------------------------------------------------------
# MKL: exhaustive simplex grid
# ---------------------------------------------------------------------------


def simplex_grid(n: int, step: float):
    """All weight vectors on the unit simplex with the given grid step."""
    k = int(round(1.0 / step))

    def rec(prefix, remaining, slots):
        if slots == 1:
            yield prefix + [remaining]
            return
        for i in range(remaining + 1):
            yield from rec(prefix + [i], remaining - i, slots - 1)

    for combo in rec([], k, n):
        d = np.array(combo, dtype=np.float64) * step
        yield d / d.sum()


def grid_mkl_oracle(problem: MklProblem, step: float = 0.01) -> tuple[float, np.ndarray]:
    """Exhaustive mix-then-solve search over the simplex grid."""
    state = MklState()
    best_J, best_d = np.inf, None
    for d in simplex_grid(problem.n_kernels, step):
        J, _ = mkl_objective(problem, d, state)
        if J < best_J:
            best_J, best_d = J, d
    return best_J, best_d


def central_difference_directional(problem: MklProblem, d: np.ndarray, v: np.ndarray,
                                   h: float = 1e-5) -> float:
    """[J(d + h v) - J(d - h v)] / 2h with independent cold inner solves."""
    J_plus, _ = mkl_objective(problem, d + h * v)
    J_minus, _ = mkl_objective(problem, d - h * v)
    return (J_plus - J_minus) / (2.0 * h)


def barrier_grid_center(A: np.ndarray, b: np.ndarray, lo, hi, n_grid: int = 400) -> np.ndarray:
    """Brute-force 2-d grid minimizer of -sum log(b - Az) over [lo,hi]^2."""
    xs = np.linspace(lo, hi, n_grid)
    best, best_z = np.inf, None
    for x in xs:
        for yv in xs:
            z = np.array([x, yv])
            s = b - A @ z
            if np.all(s > 0):
                f = -float(np.sum(np.log(s)))
                if f < best:
                    best, best_z = f, z
    return best_z


# ---------------------------------------------------------------------------
# Naive recomputations (tf-idf, performance measures, percentile)
# ---------------------------------------------------------------------------


def naive_tfidf(counts: np.ndarray, doc_lengths: np.ndarray) -> np.ndarray:
    """Double-loop tf-idf: TF = count/len, IDF = ln(N/DF), DF=0 -> IDF=0."""
    n_docs, n_terms = counts.shape
    df = [sum(1 for j in range(n_docs) if counts[j][i] > 0) for i in range(n_terms)]
    out = np.zeros((n_docs, n_terms))
    for j in range(n_docs):
        for i in range(n_terms):
            idf = math.log(n_docs / df[i]) if df[i] > 0 else 0.0
            out[j, i] = (counts[j][i] / doc_lengths[j]) * idf
    return out


def naive_accuracy_recall(preds, labels) -> tuple[float, float | None]:
    tp = sum(1 for p, y in zip(preds, labels) if p == 1 and y == 1)
    tn = sum(1 for p, y in zip(preds, labels) if p == -1 and y == -1)
    fp = sum(1 for p, y in zip(preds, labels) if p == 1 and y == -1)
    fn = sum(1 for p, y in zip(preds, labels) if p == -1 and y == 1)
    acc = (tp + tn) / (tp + tn + fp + fn)
    rec = tp / (tp + fn) if (tp + fn) > 0 else None
    return acc, rec


def naive_sharpe(returns, periods: int = 252) -> float | None:
    n = len(returns)
    mean = sum(returns) / n
    var = sum((r - mean) ** 2 for r in returns) / (n - 1)
    if var == 0.0:
        return None
    return math.sqrt(periods) * mean / math.sqrt(var)


def nearest_rank(values, p: float) -> float:
    ordered = sorted(values)
    rank = max(1, math.ceil(p * len(ordered) / 100.0))
    return ordered[min(rank, len(ordered)) - 1]


# ---------------------------------------------------------------------------
# Instance generators
# ---------------------------------------------------------------------------


def make_svm_problem(seed: int, l: int = 20, C: float | None = None,
                     label_noise: float = 0.5) -> tuple[TrainingSet, float]:
    """Random labeled problem with a kernel kind cycling by seed."""
    rng = np.random.default_rng(1000 + seed)
    X = rng.standard_normal((l, 5))
    w = rng.standard_normal(5)
    y = np.where(X @ w + label_noise * rng.standard_normal(l) >= 0, 1.0, -1.0)
    if abs(float(y.sum())) == l:
        y[0] = -y[0]
    kind = ("linear", "gaussian", "polynomial")[seed % 3]
    spec = KernelSpec(kind=kind, sigma=10.0 if kind == "gaussian" else None,
                      degree=2 if kind == "polynomial" else None)
    if C is None:
        C = 1.0 if seed % 2 == 0 else 1000.0
    return TrainingSet(labels=y, gram=gram_matrix(spec, X)), C


def solve_tight(ts: TrainingSet, C: float):
    return solve_dual(ts, C, tol=1e-10)
