"""Multiple kernel learning: simplex weights over predefined kernels.

Minimizes J(d) = max_a { e'a - 1/2 a' diag(y) (sum_i d_i K_i) diag(y) a }
over the unit simplex (sum d_i = 1, d >= 0). Each evaluation of J is one
SVM solve on the mixed kernel.

Two solvers:

  * solve_accpm: analytic center cutting plane method. The simplex
    equality is eliminated by the parameterization
    d = (z_1, ..., z_{n-1}, 1 - sum z), so the localization polyhedron
    {z : A z <= b} lives in n-1 dimensions. Each iteration computes the
    analytic center (damped Newton on the log barrier), evaluates J and
    its gradient there (one SVM), adds the halfspace that keeps every
    point at least as good as the center, prunes to at most 3n
    constraints by a barrier-Hessian relevance score, and stops when the
    explicit duality gap falls below gap_tol.

  * solve_reduced_gradient: projected reduced-gradient descent on the
    simplex with a backtracking line search; every trial step is one SVM
    solve. Serves as the baseline for SVM-call-count benchmarking.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .kernels import GramMatrix, validate_psd
from .svm import SvmModel, TrainingSet, solve_dual

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-8
BACKTRACK_ALPHA = 0.25
BACKTRACK_BETA = 0.5
WEIGHT_THRESHOLD = 1e-4
DEFAULT_GAP_TOL = 0.01
DEFAULT_C = 1000.0


class MklError(ValueError):
    """Malformed MKL problem or degenerate localization set."""


@dataclass
class MklProblem:
    """A fixed set of kernels, labels, and solver tolerances."""

    kernels: list[GramMatrix]
    labels: np.ndarray
    C: float = DEFAULT_C
    gap_tol: float = DEFAULT_GAP_TOL
    max_iters: int = 200
    svm_tol: float | None = None  # inner SMO KKT tolerance; derived from gap_tol if None
    validate_psd: bool = False

    def __post_init__(self):
        if len(self.kernels) < 1:
            raise MklError("need at least one kernel")
        size = self.kernels[0].size
        if any(k.size != size for k in self.kernels):
            raise MklError("all kernels must have the same size")
        y = np.asarray(self.labels, dtype=np.float64).ravel()
        if y.shape[0] != size:
            raise MklError("label count does not match kernel size")
        self.labels = y
        if self.gap_tol <= 0 or self.C <= 0:
            raise MklError("C and gap_tol must be positive")
        if self.validate_psd:
            for i, k in enumerate(self.kernels):
                rep = validate_psd(k)
                if not rep.passed:
                    raise MklError(f"kernel {i} fails the PSD check (min eig {rep.min_eigenvalue:.3e})")

    @property
    def n_kernels(self) -> int:
        return len(self.kernels)

    @property
    def inner_tol(self) -> float:
        """SMO KKT tolerance for the inner solves.

        The duality gap is an absolute quantity on the scale of the kernel
        quadratic forms, which grows with C, so the inner precision
        tightens both with gap_tol and with C; otherwise alpha noise puts
        a floor under the computable gap.
        """
        if self.svm_tol is not None:
            return self.svm_tol
        return max(1e-10, min(1e-3, self.gap_tol * 1e-2 * min(1.0, 10.0 / self.C)))


@dataclass
class MklState:
    """Warm-start carrier and SVM-call counter for one MKL solve."""

    svm_solves: int = 0
    warm_alpha: np.ndarray | None = None


@dataclass
class MklSolution:
    d: np.ndarray
    model: SvmModel
    objective: float
    gap: float
    iterations: int
    svm_solves: int
    status: str  # converged | flat_gradient | stalled | max_iters | degenerate_localization
    gap_history: list[float] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status in ("converged", "flat_gradient")


# ---------------------------------------------------------------------------
# Objective, gradient, duality gap
# ---------------------------------------------------------------------------


def mix_kernels(problem: MklProblem, d) -> GramMatrix:
    """Convex combination sum_i d_i K_i as a GramMatrix."""
    d = np.asarray(d, dtype=np.float64)
    G = np.zeros_like(problem.kernels[0].values)
    for w, k in zip(d, problem.kernels):
        if w != 0.0:
            G = G + w * k.values
    return GramMatrix(values=G)


def _check_simplex(d, n: int) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64).ravel()
    if d.shape[0] != n:
        raise MklError(f"weight vector has length {d.shape[0]}, expected {n}")
    if np.any(d < -1e-10) or abs(float(d.sum()) - 1.0) > 1e-8:
        raise MklError("weights must lie on the unit simplex")
    return np.maximum(d, 0.0)


def _objective_model(problem: MklProblem, d, state: MklState | None = None) -> tuple[float, SvmModel]:
    d = _check_simplex(d, problem.n_kernels)
    ts = TrainingSet(labels=problem.labels, gram=mix_kernels(problem, d))
    warm = state.warm_alpha if state is not None else None
    model = solve_dual(ts, problem.C, tol=problem.inner_tol, warm_start=warm)
    if state is not None:
        state.svm_solves += 1
        state.warm_alpha = np.array(model.alpha)
    return model.objective, model


def mkl_objective(problem: MklProblem, d, state: MklState | None = None) -> tuple[float, np.ndarray]:
    """J(d) and the maximizing alpha from one SVM solve on the mixture."""
    J, model = _objective_model(problem, d, state)
    return J, np.array(model.alpha)


def kernel_quad_forms(problem: MklProblem, alpha_star) -> np.ndarray:
    """q_i = a' diag(y) K_i diag(y) a for each kernel."""
    v = problem.labels * np.asarray(alpha_star, dtype=np.float64).ravel()
    if v.shape[0] != problem.kernels[0].size:
        raise MklError("alpha length does not match kernel size")
    return np.array([float(v @ (k.values @ v)) for k in problem.kernels])


def mkl_gradient(alpha_star, problem: MklProblem) -> np.ndarray:
    """dJ/dd_i = -1/2 a' diag(y) K_i diag(y) a at the mixture optimum a."""
    return -0.5 * kernel_quad_forms(problem, alpha_star)


def duality_gap(problem: MklProblem, d, alpha_star) -> float:
    """Explicit MKL duality gap: max_i q_i - sum_i d_i q_i (>= 0 at a valid a)."""
    d = _check_simplex(d, problem.n_kernels)
    q = kernel_quad_forms(problem, alpha_star)
    gap = float(np.max(q) - d @ q)
    scale = max(1.0, float(np.max(np.abs(q))))
    if gap < -max(1e-10, 1e-14 * scale):
        raise MklError(f"negative duality gap {gap:.3e}: alpha is stale for this mixture")
    return gap


def _gap_from_quads(d: np.ndarray, q: np.ndarray) -> float:
    return float(np.max(q) - d @ q)


# ---------------------------------------------------------------------------
# Localization set in reduced simplex coordinates
# ---------------------------------------------------------------------------


@dataclass
class LocalizationSet:
    """Polyhedron {z in R^(n-1) : A z <= b} with per-row provenance.

    Rows are unit-normalized; 'face' rows encode the simplex itself and
    are never pruned, 'cut' rows come from objective gradients.
    """

    A: np.ndarray
    b: np.ndarray
    origins: list[str]

    @classmethod
    def initial_simplex(cls, n: int) -> "LocalizationSet":
        """Faces of the reduced simplex: z_i >= 0 and sum z <= 1."""
        k = n - 1
        if k < 1:
            raise MklError("reduced simplex needs n >= 2 kernels")
        A = np.vstack([-np.eye(k), np.ones((1, k)) / np.sqrt(k)])
        b = np.concatenate([np.zeros(k), [1.0 / np.sqrt(k)]])
        return cls(A=A, b=b, origins=["face"] * (k + 1))

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def slacks(self, z: np.ndarray) -> np.ndarray:
        return self.b - self.A @ z

    def is_interior(self, z: np.ndarray) -> bool:
        return bool(np.all(self.slacks(z) > 0.0))


def reduced_to_full(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64).ravel()
    return np.concatenate([z, [1.0 - float(z.sum())]])


def uniform_reduced(n: int) -> np.ndarray:
    return np.full(n - 1, 1.0 / n)


def barrier_value(loc: LocalizationSet, z: np.ndarray) -> float:
    s = loc.slacks(z)
    if np.any(s <= 0.0):
        return np.inf
    return float(-np.sum(np.log(s)))


def barrier_hessian(loc: LocalizationSet, z: np.ndarray) -> np.ndarray:
    s = loc.slacks(z)
    if np.any(s <= 0.0):
        raise MklError("barrier Hessian requested at a non-interior point")
    W = loc.A / s[:, None]
    return W.T @ W


def analytic_center(loc: LocalizationSet, z0: np.ndarray | None = None, newton_tol: float = NEWTON_TOL,
                    max_newton: int = 200) -> np.ndarray:
    """Minimize -sum log(b_i - a_i'z) by damped Newton with backtracking.

    Needs a strictly interior starting point; defaults to the uniform
    mixture, which is interior to the initial simplex faces. Raises
    MklError when the interior is (numerically) empty at the start.
    """
    if z0 is None:
        z0 = uniform_reduced(loc.dim + 1)
    z = np.asarray(z0, dtype=np.float64).copy()
    if not loc.is_interior(z):
        raise MklError("analytic centering needs a strictly interior start (empty interior?)")
    fz = barrier_value(loc, z)
    for _ in range(max_newton):
        s = loc.slacks(z)
        inv_s = 1.0 / s
        g = loc.A.T @ inv_s
        W = loc.A * inv_s[:, None]
        H = W.T @ W
        try:
            p = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            p = np.linalg.lstsq(H, -g, rcond=None)[0]
        decrement2 = float(-g @ p)
        if decrement2 < 0.0:  # numerical: H not PD at float precision
            decrement2 = abs(decrement2)
        if np.sqrt(decrement2) <= newton_tol:
            return z
        t = 1.0
        gTp = float(g @ p)
        while t > 1e-16:
            cand = z + t * p
            fc = barrier_value(loc, cand)
            if fc <= fz + BACKTRACK_ALPHA * t * gTp:
                break
            t *= BACKTRACK_BETA
        else:
            return z  # no further progress possible at float precision
        z = z + t * p
        fz = barrier_value(loc, z)
    return z


def reduce_gradient(full_gradient: np.ndarray) -> np.ndarray:
    """Map a full-coordinate gradient onto the reduced parameterization."""
    g = np.asarray(full_gradient, dtype=np.float64).ravel()
    return g[:-1] - g[-1]


def add_cut(loc: LocalizationSet, center_z: np.ndarray, full_gradient: np.ndarray) -> tuple[LocalizationSet, bool]:
    """Append the objective cut through the center.

    Keeps the halfspace {z : g_r'(z - center) <= 0}: by convexity of J
    every point with J <= J(center) satisfies it, so the minimizer stays
    inside the localization set. A zero reduced gradient means J is flat
    along the simplex and the center is already optimal: no cut is added
    and the flag comes back False.
    """
    g_r = reduce_gradient(full_gradient)
    norm = float(np.linalg.norm(g_r))
    gscale = float(np.linalg.norm(np.asarray(full_gradient, dtype=np.float64)))
    if norm <= 1e-14 * max(1.0, gscale):
        return loc, False
    a = g_r / norm
    b_new = float(a @ center_z)
    A = np.vstack([loc.A, a[None, :]])
    b = np.concatenate([loc.b, [b_new]])
    return LocalizationSet(A=A, b=b, origins=loc.origins + ["cut"]), True


def cut_relevance(loc: LocalizationSet, center_z: np.ndarray, hessian: np.ndarray) -> np.ndarray:
    """Relevance of each row: a' H^{-1} a / (a'z - b)^2, +inf at zero slack."""
    s = loc.slacks(center_z)
    X = np.linalg.solve(hessian, loc.A.T)
    num = np.einsum("ij,ji->i", loc.A, X)
    with np.errstate(divide="ignore"):
        rel = np.where(s == 0.0, np.inf, num / np.square(s))
    return rel


def prune_cuts(loc: LocalizationSet, center_z: np.ndarray, hessian: np.ndarray,
               budget: int | None = None) -> LocalizationSet:
    """Keep at most 3n constraints, ranked by relevance at the center.

    Simplex faces are never pruned (dropping them can unbound the
    barrier); the budget is filled with the most relevant objective cuts,
    earliest-first on ties. `hessian` is the barrier Hessian of the set
    the center was computed in, so a freshly added zero-slack cut gets
    infinite relevance and survives automatically.
    """
    n = loc.dim + 1
    if budget is None:
        budget = 3 * n
    if loc.n_rows <= budget:
        return loc
    origins = np.array(loc.origins)
    face_idx = np.flatnonzero(origins == "face")
    cut_idx = np.flatnonzero(origins == "cut")
    n_keep_cuts = max(budget - face_idx.size, 0)
    if cut_idx.size <= n_keep_cuts:
        return loc
    rel = cut_relevance(loc, center_z, hessian)[cut_idx]
    order = np.argsort(-rel, kind="stable")  # stable: earliest row wins ties
    kept_cuts = np.sort(cut_idx[order[:n_keep_cuts]])
    keep = np.sort(np.concatenate([face_idx, kept_cuts]))
    return LocalizationSet(A=loc.A[keep], b=loc.b[keep], origins=[loc.origins[i] for i in keep])


def _push_inside(loc: LocalizationSet, z: np.ndarray, new_row: int, cap: float = 0.1) -> np.ndarray:
    """Step off the zero-slack newest cut into the interior."""
    a = loc.A[new_row]
    s = loc.slacks(z)
    proj = loc.A @ a  # slack change rate along -a is +proj
    shrink = proj < 0.0
    t_max = cap
    if np.any(shrink):
        t_max = min(t_max, 0.5 * float(np.min(s[shrink] / -proj[shrink])))
    return z - max(t_max, 0.0) * a


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------


def _single_kernel_solution(problem: MklProblem, state: MklState) -> MklSolution:
    d = np.array([1.0])
    J, model = _objective_model(problem, d, state)
    return MklSolution(d=d, model=model, objective=J, gap=0.0, iterations=1,
                       svm_solves=state.svm_solves, status="converged", gap_history=[0.0])


def _threshold_and_finalize(problem: MklProblem, d: np.ndarray, J: float, model: SvmModel,
                            gap: float, state: MklState) -> tuple[np.ndarray, float, SvmModel, float]:
    """Zero out weights below WEIGHT_THRESHOLD, renormalize, re-solve if changed."""
    d = np.maximum(np.asarray(d, dtype=np.float64), 0.0)
    small = d < WEIGHT_THRESHOLD
    if np.any(small & (d > 0.0)):
        d = np.where(small, 0.0, d)
        d = d / d.sum()
        J, model = _objective_model(problem, d, state)
        q = kernel_quad_forms(problem, model.alpha)
        gap = _gap_from_quads(d, q)
    d = d / d.sum()
    return d, J, model, gap


def solve_accpm(problem: MklProblem) -> MklSolution:
    """Analytic center cutting plane method (one SVM solve per iteration)."""
    state = MklState()
    n = problem.n_kernels
    if n == 1:
        return _single_kernel_solution(problem, state)

    loc = LocalizationSet.initial_simplex(n)
    z_start: np.ndarray | None = uniform_reduced(n)
    gap_history: list[float] = []
    best: tuple[float, np.ndarray, SvmModel, float] | None = None
    status = "max_iters"
    iterations = 0

    for iterations in range(1, problem.max_iters + 1):
        try:
            z_c = analytic_center(loc, z0=z_start)
        except MklError:
            status = "degenerate_localization"
            iterations -= 1
            break
        d = np.maximum(reduced_to_full(z_c), 0.0)
        d = d / d.sum()
        J, model = _objective_model(problem, d, state)
        q = kernel_quad_forms(problem, model.alpha)
        gap = _gap_from_quads(d, q)
        gap_history.append(gap)
        if best is None or J < best[0]:
            best = (J, d, model, gap)
        if gap <= problem.gap_tol:
            best = (J, d, model, gap)
            status = "converged"
            break
        grad = -0.5 * q
        hess = barrier_hessian(loc, z_c)
        loc, added = add_cut(loc, z_c, grad)
        if not added:
            best = (J, d, model, gap)
            status = "flat_gradient"
            break
        loc = prune_cuts(loc, z_c, hess)
        z_start = _push_inside(loc, z_c, new_row=loc.n_rows - 1)
        if not loc.is_interior(z_start):
            status = "degenerate_localization"
            break

    if best is None:
        raise MklError("ACCPM made no iterations; increase max_iters")
    J, d, model, gap = best
    if status == "max_iters":
        log.warning("ACCPM stopped at max_iters=%d with gap %.3e > %.3e",
                    problem.max_iters, gap, problem.gap_tol)
    d, J, model, gap = _threshold_and_finalize(problem, d, J, model, gap, state)
    return MklSolution(d=d, model=model, objective=J, gap=gap, iterations=iterations,
                       svm_solves=state.svm_solves, status=status, gap_history=gap_history)


def _simplex_step(d: np.ndarray, D: np.ndarray, t: float) -> np.ndarray:
    cand = np.maximum(d + t * D, 0.0)
    cand[cand < 1e-12] = 0.0  # snap float dust so step caps stay meaningful
    return cand / cand.sum()


_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def solve_reduced_gradient(problem: MklProblem, line_tol: float = 0.05,
                           armijo_c: float = 1e-4) -> MklSolution:
    """Reduced-gradient descent on the simplex (the baseline MKL method).

    Each outer iteration backtracks along the reduced descent direction
    with a golden-section search over the admissible step interval, so one
    iteration costs several warm-started SVM solves (that is the point of
    the benchmark against ACCPM, which needs exactly one per iteration).
    Termination uses the same duality gap as ACCPM.
    """
    state = MklState()
    n = problem.n_kernels
    if n == 1:
        return _single_kernel_solution(problem, state)

    d = np.full(n, 1.0 / n)
    gap_history: list[float] = []
    best: tuple[float, np.ndarray, SvmModel, float] | None = None
    status = "max_iters"
    iterations = 0
    J, model = _objective_model(problem, d, state)

    for iterations in range(1, problem.max_iters + 1):
        q = kernel_quad_forms(problem, model.alpha)
        gap = _gap_from_quads(d, q)
        gap_history.append(gap)
        if best is None or J < best[0]:
            best = (J, np.array(d), model, gap)
        if gap <= problem.gap_tol:
            best = (J, np.array(d), model, gap)
            status = "converged"
            break

        grad = -0.5 * q
        mu = int(np.argmax(d))
        red = grad - grad[mu]
        D = -red
        D[(d <= 0.0) & (D < 0.0)] = 0.0  # cannot leave the simplex at a zero weight
        D[mu] = 0.0
        D[mu] = -float(D.sum())
        descent = float(grad @ D)
        if descent >= -1e-15 * max(1.0, float(np.abs(grad).max())):
            status = "stalled"
            break

        neg = D < 0.0
        t_max = float(np.min(d[neg] / -D[neg]))  # some D_i < 0 since sum(D) = 0

        trials: dict[float, tuple[float, SvmModel, np.ndarray]] = {}

        def evaluate(t: float):
            if t not in trials:
                cand = _simplex_step(d, D, t)
                J_t, model_t = _objective_model(problem, cand, state)
                trials[t] = (J_t, model_t, cand)
            return trials[t][0]

        # probe the full admissible step (a weight hits zero there), then
        # golden-section the interval down to line_tol of its width
        evaluate(t_max)
        lo, hi = 0.0, t_max
        x1 = hi - _GOLDEN * (hi - lo)
        x2 = lo + _GOLDEN * (hi - lo)
        f1, f2 = evaluate(x1), evaluate(x2)
        while (hi - lo) > line_tol * t_max:
            if f1 <= f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - _GOLDEN * (hi - lo)
                f1 = evaluate(x1)
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + _GOLDEN * (hi - lo)
                f2 = evaluate(x2)

        t_best = min(trials, key=lambda t: trials[t][0])
        J_best = trials[t_best][0]
        if J_best <= J + armijo_c * t_best * descent:
            J, model = J_best, trials[t_best][1]
            d = trials[t_best][2]
        else:
            status = "stalled"
            break

    if best is None:
        raise MklError("reduced gradient made no iterations")
    J, d, model, gap = best
    if status in ("stalled", "max_iters"):
        log.info("reduced gradient stopped (%s) at gap %.3e", status, gap)
    d, J, model, gap = _threshold_and_finalize(problem, d, J, model, gap, state)
    return MklSolution(d=d, model=model, objective=J, gap=gap, iterations=iterations,
                       svm_solves=state.svm_solves, status=status, gap_history=gap_history)
