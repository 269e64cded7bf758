"""Entropic optimal transport: objective, log-domain Sinkhorn, semi-relaxed closed form."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .core import COUPLING_TOL, CostMatrix, Coupling, ProbabilityVector
from .divergences import gibbs_log_rows, kl_to_product
from .errors import DegenerateMarginal, NonFiniteCost, ShapeMismatch


@dataclass(frozen=True)
class SinkhornSettings:
    """Stopping rule and regularization for :func:`sinkhorn`.

    ``newton_after``: number of plain Sinkhorn iterations after which the
    remaining iterations are Newton steps on the column potential; ``None``
    runs plain Sinkhorn throughout.
    """

    epsilon: float = 1.0
    max_iterations: int = 10_000
    # L1 deviation of the column sums from b
    marginal_tolerance: float = 1e-9
    newton_after: int | None = 100

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.marginal_tolerance > 0:
            raise ValueError("marginal_tolerance must be positive")
        if self.newton_after is not None and self.newton_after < 0:
            raise ValueError("newton_after must be nonnegative or None")


@dataclass(frozen=True)
class EotSolution:
    """A coupling together with the objective value attained at it.

    ``objective_history`` is filled by iterative solvers that track the
    objective across outer steps (empty otherwise).
    """

    coupling: Coupling
    value: float
    iterations_used: int
    converged: bool
    objective_history: tuple[float, ...] = field(default=())


def _costs(C) -> np.ndarray:
    if isinstance(C, CostMatrix):
        return C.costs
    C = np.asarray(C, dtype=float)
    if C.ndim != 2:
        raise ShapeMismatch(f"cost matrix must be 2-D, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise NonFiniteCost("cost matrix has non-finite entries")
    return C


def eot_objective(P, C, a, b, epsilon: float = 1.0) -> float:
    """``<C, P> + epsilon * KL(P | a b^T)`` in nats."""
    P = np.asarray(P, dtype=float)
    C = np.asarray(C, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if P.shape != C.shape or P.shape != (a.size, b.size):
        raise ShapeMismatch(f"P {P.shape}, C {C.shape}, a {a.shape}, b {b.shape} disagree")
    transport = float(np.sum(np.ascontiguousarray(np.where(P > 0, C * P, 0.0)).ravel()))
    return transport + epsilon * kl_to_product(P, a, b)


def sinkhorn(a, b, C, settings: SinkhornSettings | None = None) -> EotSolution:
    """Solve the entropic OT problem between ``a`` and ``b`` with log-domain Sinkhorn.

    The plan is parametrized as ``P_ij = a_i b_j exp((f_i + g_j - C_ij) / eps)``
    and the dual potentials ``f``, ``g`` are updated alternately, column
    potential first, so the returned plan matches ``a`` up to rounding and
    ``b`` up to ``settings.marginal_tolerance`` in L1. Zero-mass rows and
    columns are removed before iterating and restored as zeros.

    Plain Sinkhorn contracts very slowly when the cost nearly splits into
    blocks (well separated clusters). After ``settings.newton_after``
    iterations the column update is therefore replaced by a damped Newton
    step on the semi-dual in ``g``; the row update stays an exact
    normalization.
    """
    settings = settings or SinkhornSettings()
    a = ProbabilityVector(a) if not isinstance(a, ProbabilityVector) else a
    b = ProbabilityVector(b) if not isinstance(b, ProbabilityVector) else b
    C = _costs(C)
    n, K = C.shape
    if (len(a), len(b)) != (n, K):
        raise ShapeMismatch(f"marginals ({len(a)}, {len(b)}) do not match cost shape {C.shape}")
    rows = np.flatnonzero(a.weights > 0)
    cols = np.flatnonzero(b.weights > 0)
    if rows.size == 0 or cols.size == 0:
        raise DegenerateMarginal("a marginal has no mass")

    eps = settings.epsilon
    log_a = np.log(a.weights[rows])
    log_b = np.log(b.weights[cols])
    b_sub = b.weights[cols]
    # potentials are kept divided by eps
    C_eps = C[np.ix_(rows, cols)] / eps
    scores = log_b[None, :] - C_eps
    v = np.zeros(cols.size)

    def row_fit(v):
        # row potential making the row sums exactly a, and the resulting log-plan
        s = scores + v[None, :]
        lse = logsumexp(s, axis=1)
        return lse, log_a[:, None] + s - lse[:, None]

    def semi_dual(v, lse):
        return float(b_sub @ v - a.weights[rows] @ lse)

    lse, log_plan = row_fit(v)
    converged = False
    it = 0
    for it in range(1, settings.max_iterations + 1):
        v_next = None
        if settings.newton_after is not None and it > settings.newton_after and cols.size > 1:
            v_next = _newton_step(v, lse, np.exp(log_plan), b_sub, a.weights[rows], row_fit, semi_dual)
        if v_next is None:
            # plain Sinkhorn: column update given the current row potential -lse
            v_next = -logsumexp(log_a[:, None] - lse[:, None] - C_eps, axis=0)
        v = v_next
        lse, log_plan = row_fit(v)
        plan_sub = np.exp(log_plan)
        residual = np.sum(np.abs(plan_sub.sum(axis=0) - b_sub))
        if residual <= settings.marginal_tolerance:
            converged = True
            break

    plan = np.zeros((n, K))
    plan[np.ix_(rows, cols)] = plan_sub
    if converged:
        coupling = Coupling(
            plan, a, b, column_tol=max(COUPLING_TOL, settings.marginal_tolerance)
        )
    else:
        coupling = Coupling(plan, a)
    value = eot_objective(coupling.plan, C, a.weights, b.weights, eps)
    return EotSolution(coupling, value, it, converged)


def _newton_step(v, lse, plan, b, a, row_fit, semi_dual, max_step: float = 10.0, max_halvings: int = 40):
    """Damped Newton ascent step on the semi-dual in the column potential.

    Returns the new potential, or ``None`` when no damped step improves
    either the semi-dual value or the column residual.
    """
    c = plan.sum(axis=0)
    r = b - c
    # negative Hessian sum_i a_i (diag(s_i) - s_i s_i^T), s_i = plan row / a_i; the
    # diagonal uses s_ij * sum_{k != j} s_ik to avoid cancellation on near one-hot rows
    S = plan / a[:, None]
    K = S.shape[1]
    others = S @ (np.ones((K, K)) - np.eye(K))
    M = -(plan.T @ S)
    M[np.diag_indices(K)] = np.sum(plan * others, axis=0)
    # gauge fixed by pinning the last entry
    try:
        d = np.linalg.solve(M[:-1, :-1], r[:-1])
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(d)):
        return None
    direction = np.append(d, 0.0)
    value = semi_dual(v, lse)
    slope = float(r @ direction)
    res = np.sum(np.abs(r))
    # near-decoupled columns give tiny curvature and huge raw steps: cap the
    # move in log-scaling space before backtracking
    t = min(1.0, max_step / max(np.max(np.abs(direction)), 1e-300))
    # Armijo on the semi-dual; near convergence its increase drowns in rounding, so a
    # step that keeps the value within rounding and shrinks the residual also counts
    noise = 1e-13 * max(1.0, abs(value))
    for _ in range(max_halvings):
        trial = v + t * direction
        trial_lse, trial_log_plan = row_fit(trial)
        trial_value = semi_dual(trial, trial_lse)
        if trial_value >= value + 1e-4 * t * slope:
            return trial
        if trial_value >= value - noise and np.sum(np.abs(b - np.exp(trial_log_plan).sum(axis=0))) < res:
            return trial
        t *= 0.5
    return None


def semi_relaxed_solve(pi, C, a=None) -> EotSolution:
    """Minimize ``<C, P> + KL(P | a pi^T)`` over plans with row marginal ``a``.

    ``a`` defaults to the uniform vector ``1_n / n``. The problem separates
    over rows: row ``i`` is ``a_i`` times the Gibbs maximizer for weights
    ``pi`` and scores ``-C_i``. Columns with ``pi_j = 0`` get no mass.
    """
    C = _costs(C)
    n, K = C.shape
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (K,):
        raise ShapeMismatch(f"pi has shape {pi.shape}, cost matrix has {K} columns")
    a = ProbabilityVector.uniform(n) if a is None else a
    a = ProbabilityVector(a) if not isinstance(a, ProbabilityVector) else a
    if len(a) != n:
        raise ShapeMismatch(f"a has length {len(a)}, cost matrix has {n} rows")
    support = np.flatnonzero(pi > 0)
    if support.size == 0 or np.any(pi < 0):
        raise DegenerateMarginal("pi must be nonnegative with some positive entry")

    log_p, _ = gibbs_log_rows(pi[support], -C[:, support])
    plan = np.zeros((n, K))
    plan[:, support] = a.weights[:, None] * np.exp(log_p)
    coupling = Coupling(plan, a)
    value = eot_objective(plan, C, a.weights, pi)
    return EotSolution(coupling, value, 1, True)


def min_over_pi_semi_relaxed(
    C,
    pi0=None,
    tol: float = 1e-12,
    max_alternations: int = 100_000,
) -> tuple[ProbabilityVector, EotSolution]:
    """Jointly minimize the semi-relaxed objective over the plan and the weights.

    Alternates the exact plan step (the closed form of
    :func:`semi_relaxed_solve`) with the exact weight step ``pi <- P^T 1_n``
    until the weights move by less than ``tol`` in L1 or ``max_alternations``
    plan steps have run. Each step is an exact block minimization, so
    ``objective_history`` (the plan-step optimum at each visited ``pi``) is
    non-increasing.

    Near a boundary optimum or with overlapping components the alternation
    contracts slowly (thousands of steps), so the loop runs on a
    precomputed row-normalized kernel rather than calling the full solver.

    Returns ``(pi_hat, solution)`` where ``pi_hat`` is the column marginal of
    the final plan; the plan is therefore a full coupling between ``1_n / n``
    and ``pi_hat`` and ``solution.value`` is the objective at that pair.
    """
    C = _costs(C)
    n, K = C.shape
    pi = np.full(K, 1.0 / K) if pi0 is None else np.asarray(pi0, dtype=float)
    if pi.shape != (K,) or np.any(pi < 0) or not pi.sum() > 0:
        raise DegenerateMarginal("pi0 must be a nonnegative length-K vector with positive mass")
    shift = (-C).max(axis=1)
    kernel = np.exp(-C - shift[:, None])
    history = []
    converged = False
    t = 0
    for t in range(1, max_alternations + 1):
        mix = kernel @ pi
        history.append(-float(np.mean(np.log(mix) + shift)))
        new_pi = pi * (kernel.T @ (1.0 / mix)) / n
        change = float(np.sum(np.abs(new_pi - pi)))
        pi = new_pi
        if change < tol:
            converged = True
            break

    # final plan step at the last visited weights, in log domain
    sol = semi_relaxed_solve(pi, C)
    plan = sol.coupling.plan
    col = plan.sum(axis=0)
    pi_hat = ProbabilityVector(col / col.sum())
    a = ProbabilityVector.uniform(n)
    coupling = Coupling(plan, a, pi_hat)
    value = eot_objective(plan, C, a.weights, pi_hat.weights)
    return pi_hat, EotSolution(coupling, value, t, converged, tuple(history))
