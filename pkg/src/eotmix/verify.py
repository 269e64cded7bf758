"""Randomized end-to-end checks of the likelihood / entropic-OT identities.

Each ``check_*`` function draws its own instances from seeded generators and
returns one or more :class:`CheckRecord`; :func:`run_all` assembles them into
a :class:`VerificationReport`. Instance ``t`` of a check started with
``seed`` is always built from seed ``seed + t``, so a check run with
``(seed=0, trials=200)`` covers seeds 0 to 199.

The oracles used here (grid scans, random simplex search, finite
differences, scipy-based EM) are deliberately independent of the code paths
they check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bcd import (
    bcd_sweep,
    reference_em_sweep,
    update_covariance,
    update_means,
    update_plan,
    update_weights,
)
from .core import GmmParams, ProbabilityVector
from .divergences import (
    gibbs_objective,
    gibbs_optimum,
    kl_matrix,
    kl_three_term_decomposition,
    weighted_logsumexp,
)
from .eot import SinkhornSettings, min_over_pi_semi_relaxed, semi_relaxed_solve, sinkhorn
from .errors import EmptyComponent
from .mixture import cost_matrix, nll, sample_gmm

IDENTITY_TOL = 1e-8
ADVERSARIAL_IDENTITY_TOL = 1e-6
UPPER_BOUND_TOL = 1e-7
TIGHTNESS_TOL = 1e-7
MIN_OVER_PI_TOL = 1e-7
PI_GRID_TOL = 1e-6
PI_GRID_STEP = 1e-4
GIBBS_MAX_TOL = 1e-12
GIBBS_EQUALITY_TOL = 1e-10
GIBBS_GRID_TOL = 1e-6
GIBBS_RANDOM_POINTS = 1000
KL_SPLIT_TOL = 1e-10
EM_PARAM_TOL = 1e-10
EM_NLL_TOL = 1e-9
EM_SWEEPS = 20
MONOTONE_TOL = 1e-9
STATIONARITY_TOL = 1e-4
FD_STEP = 1e-5
# alternation cap for the BCD-side weight minimization in check_min_over_pi_equality
WEIGHT_ALTERNATIONS = 100_000


@dataclass(frozen=True)
class CheckRecord:
    name: str
    instances_run: int
    max_residual: float
    tolerance: float
    passed: bool
    observations: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class VerificationReport:
    checks: list[CheckRecord]
    seed: int
    trials: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _record(name: str, residuals, tolerance: float, **observations) -> CheckRecord:
    residuals = np.asarray(residuals, dtype=float)
    worst = float(np.max(residuals)) if residuals.size else 0.0
    passed = bool(np.all(residuals <= tolerance))
    return CheckRecord(name, int(residuals.size), worst, tolerance, passed, dict(observations))


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------


def random_params(rng: np.random.Generator, K: int, d: int) -> GmmParams:
    """Means uniform in ``[-3, 3]^d``, ``Sigma = A A^T + 0.1 I``, flat-Dirichlet weights."""
    means = rng.uniform(-3.0, 3.0, size=(K, d))
    A = rng.standard_normal((d, d))
    cov = A @ A.T + 0.1 * np.eye(d)
    return GmmParams(means, 0.5 * (cov + cov.T), rng.dirichlet(np.ones(K)))


def random_instance(seed: int, K: int | None = None, d: int | None = None):
    """A random shared-covariance GMM and ``10 <= n <= 50`` points drawn from it."""
    rng = np.random.default_rng(seed)
    K = int(rng.integers(1, 5)) if K is None else K
    d = int(rng.integers(1, 4)) if d is None else d
    n = int(rng.integers(10, 51))
    params = random_params(rng, K, d)
    data = sample_gmm(params, n, int(rng.integers(2**32)))
    return params, data


def adversarial_instance(seed: int):
    """Two tight clusters far apart: means at +-100 e_1, ``Sigma = 0.01 I``."""
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    means = np.zeros((2, d))
    means[0, 0], means[1, 0] = -100.0, 100.0
    params = GmmParams(means, 0.01 * np.eye(d), rng.dirichlet(np.ones(2)))
    data = sample_gmm(params, int(rng.integers(10, 51)), int(rng.integers(2**32)))
    return params, data


def random_simplex(rng: np.random.Generator, K: int, size: int) -> np.ndarray:
    return rng.dirichlet(np.ones(K), size=size)


# ---------------------------------------------------------------------------
# grid oracles
# ---------------------------------------------------------------------------


def simplex_grid(K: int, step: float) -> np.ndarray:
    """All points of the simplex with coordinates on a ``step`` lattice (K = 2 or 3)."""
    m = int(round(1.0 / step))
    if K == 2:
        t = np.arange(m + 1) / m
        return np.column_stack([t, 1.0 - t])
    if K == 3:
        i, j = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
        keep = i + j <= m
        p1, p2 = i[keep] / m, j[keep] / m
        return np.column_stack([p1, p2, np.clip(1.0 - p1 - p2, 0.0, None)])
    raise ValueError("grid scans are only implemented for K = 2 and K = 3")


def zoom_grid_argmax(
    f: Callable[[np.ndarray], np.ndarray],
    K: int,
    start_step: float = 1e-3,
    final_step: float = 1e-10,
    points_per_side: int = 41,
) -> tuple[np.ndarray, float]:
    """Maximize ``f`` over the simplex by a grid scan followed by zoomed re-scans.

    ``f`` maps an ``(m, K)`` array of simplex points to ``m`` values. The
    first scan covers the whole simplex at ``start_step``; each further scan
    covers two cells around the incumbent at a tenth of the previous step.
    Meant for concave objectives, where the maximizer stays inside the
    zoom window.
    """
    pts = simplex_grid(K, start_step)
    vals = f(pts)
    best = int(np.argmax(vals))
    x, fx = pts[best], float(vals[best])
    step = start_step
    while step > final_step:
        lo = x[: K - 1] - 2 * step
        hi = x[: K - 1] + 2 * step
        step /= 10.0
        axes = [np.linspace(l, h, points_per_side) for l, h in zip(lo, hi)]
        free = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        last = 1.0 - free.sum(axis=1, keepdims=True)
        cand = np.hstack([free, last])
        cand = cand[np.all(cand >= 0, axis=1)]
        cand = np.clip(cand, 0.0, 1.0)
        vals = f(cand)
        i = int(np.argmax(vals))
        if vals[i] >= fx:
            x, fx = cand[i], float(vals[i])
    return x, fx


def _gibbs_values(pi: np.ndarray, h: np.ndarray, P: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(P > 0, P * np.log(P / pi), 0.0)
    return P @ h - ent.sum(axis=1)


def mean_nll_over_weight_grid(C: np.ndarray, step: float = PI_GRID_STEP) -> tuple[float, float]:
    """Scan ``pi = (t, 1 - t)`` on a ``step`` lattice; return the minimum of ``NLL/n`` and its ``t``."""
    C = np.asarray(C, dtype=float)
    t = np.arange(int(round(1.0 / step)) + 1) * step
    t[-1] = 1.0
    with np.errstate(divide="ignore"):
        log_t, log_1mt = np.log(t), np.log1p(-t)
    vals = -np.mean(
        np.logaddexp(log_t[:, None] - C[None, :, 0], log_1mt[:, None] - C[None, :, 1]), axis=1
    )
    i = int(np.argmin(vals))
    return float(vals[i]), float(t[i])


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def check_identity_nll(seed: int, trials: int) -> list[CheckRecord]:
    """``NLL / n`` equals the semi-relaxed entropic OT value."""
    residuals = []
    for t in range(trials):
        params, data = random_instance(seed + t)
        C = cost_matrix(params, data)
        value = semi_relaxed_solve(params.weights.weights, C).value
        residuals.append(abs(nll(params, data) / data.n - value))
    adversarial = []
    for t in range(min(trials, 5)):
        params, data = adversarial_instance(seed + t)
        C = cost_matrix(params, data)
        value = semi_relaxed_solve(params.weights.weights, C).value
        adversarial.append(abs(nll(params, data) / data.n - value))
    return [
        _record("identity_nll", residuals, IDENTITY_TOL),
        _record("identity_nll_adversarial", adversarial, ADVERSARIAL_IDENTITY_TOL),
    ]


def check_upper_bound(seed: int, trials: int, settings: SinkhornSettings | None = None) -> list[CheckRecord]:
    """``NLL / n <= OT_1(1_n/n, pi, C)``, with equality at the weight minimizer.

    The strictness of the bound at generic weights is reported as an
    observation, not asserted.
    """
    settings = settings or SinkhornSettings()
    bound, marginal, tight, gaps = [], [], [], []
    for t in range(trials):
        params, data = random_instance(seed + t)
        n = data.n
        C = cost_matrix(params, data)
        a = np.full(n, 1.0 / n)
        sol = sinkhorn(a, params.weights, C, settings)
        lhs = nll(params, data) / n
        bound.append(max(0.0, lhs - sol.value))
        gaps.append(sol.value - lhs)
        res = float(np.sum(np.abs(sol.coupling.plan.sum(axis=0) - params.weights.weights)))
        marginal.append(res if sol.converged else np.inf)

        pi_hat, _ = min_over_pi_semi_relaxed(C)
        at_hat = GmmParams(params.means, params.covariance, pi_hat)
        sol_hat = sinkhorn(a, pi_hat, C, settings)
        tight.append(abs(sol_hat.value - nll(at_hat, data) / n))
    gaps = np.asarray(gaps)
    return [
        _record(
            "upper_bound",
            bound,
            UPPER_BOUND_TOL + settings.marginal_tolerance,
            min_gap=float(gaps.min()) if gaps.size else 0.0,
            strict_fraction=float(np.mean(gaps > 1e-9)) if gaps.size else 0.0,
        ),
        _record("sinkhorn_marginal", marginal, settings.marginal_tolerance),
        _record("upper_bound_tightness", tight, TIGHTNESS_TOL),
    ]


def minimize_weights_by_bcd(params: GmmParams, C, tol: float = 1e-12, max_steps: int = WEIGHT_ALTERNATIONS) -> ProbabilityVector:
    """Minimize ``NLL`` over the weights with the fitter's plan and weight steps, theta fixed."""
    pi = params.weights
    for _ in range(max_steps):
        P = update_plan(GmmParams(params.means, params.covariance, pi), C)
        new = update_weights(P)
        change = float(np.sum(np.abs(new.weights - pi.weights)))
        pi = new
        if change < tol:
            break
    return pi


def check_min_over_pi_equality(seed: int, trials: int, K: int | None = None) -> list[CheckRecord]:
    """``min_pi NLL / n`` equals ``min_pi OT_1``; K = 2 instances are also grid-scanned."""
    settings = SinkhornSettings()
    sides, grid = [], []
    for t in range(trials):
        params, data = random_instance(seed + t, K=K)
        n = data.n
        C = cost_matrix(params, data)
        start = GmmParams(params.means, params.covariance, ProbabilityVector.uniform(params.n_components))
        pi_left = minimize_weights_by_bcd(start, C)
        left = nll(GmmParams(params.means, params.covariance, pi_left), data) / n
        pi_right, _ = min_over_pi_semi_relaxed(C)
        right = sinkhorn(np.full(n, 1.0 / n), pi_right, C, settings).value
        sides.append(abs(left - right))
        if params.n_components == 2:
            g, _ = mean_nll_over_weight_grid(C.costs)
            grid.append(max(abs(left - g), abs(right - g)))
    return [
        _record("min_over_pi_equality", sides, MIN_OVER_PI_TOL),
        _record("min_over_pi_grid", grid, PI_GRID_TOL),
    ]


def check_variational_identities(seed: int, trials: int) -> list[CheckRecord]:
    """Gibbs variational principle and the three-term KL split."""
    beats, equal, grid_value, grid_loc = [], [], [], []
    split, product = [], []
    for t in range(trials):
        rng = np.random.default_rng(seed + t)
        K = int(rng.integers(1, 7))
        pi = rng.dirichlet(np.ones(K))
        h = rng.uniform(-5.0, 5.0, size=K)
        lse = weighted_logsumexp(pi, h)
        p_star = gibbs_optimum(pi, h).weights
        P = random_simplex(rng, K, GIBBS_RANDOM_POINTS)
        beats.append(max(0.0, float(np.max(_gibbs_values(pi, h, P))) - lse))
        equal.append(abs(gibbs_objective(pi, h, p_star) - lse))

        for Kg in (2, 3):
            pi_g = rng.dirichlet(np.ones(Kg))
            h_g = rng.uniform(-5.0, 5.0, size=Kg)
            x, fx = zoom_grid_argmax(lambda Q: _gibbs_values(pi_g, h_g, Q), Kg)
            grid_loc.append(float(np.max(np.abs(x - gibbs_optimum(pi_g, h_g).weights))))
            grid_value.append(abs(fx - weighted_logsumexp(pi_g, h_g)))

        n, m = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        Pm = rng.uniform(0.01, 1.0, size=(n, m))
        a = rng.uniform(0.01, 1.0, size=n)
        b = rng.uniform(0.01, 1.0, size=m)
        split.append(abs(sum(kl_three_term_decomposition(Pm, a, b)) - kl_matrix(Pm, np.outer(a, b))))
        a, b = a / a.sum(), b / b.sum()
        product.append(max(abs(x) for x in kl_three_term_decomposition(np.outer(a, b), a, b)))
    return [
        _record("gibbs_max_property", beats, GIBBS_MAX_TOL),
        _record("gibbs_equality", equal, GIBBS_EQUALITY_TOL),
        _record("gibbs_grid_argmax", grid_loc, GIBBS_GRID_TOL),
        _record("gibbs_grid_value", grid_value, GIBBS_GRID_TOL),
        _record("kl_decomposition", split, KL_SPLIT_TOL),
        _record("kl_decomposition_product", product, KL_SPLIT_TOL),
    ]


def em_start(rng: np.random.Generator, data, K: int) -> GmmParams:
    """Random starting state: data points as means, random covariance and weights."""
    X = np.asarray(data)
    means = X[rng.choice(X.shape[0], size=K, replace=False)]
    d = X.shape[1]
    A = rng.standard_normal((d, d))
    cov = A @ A.T + 0.1 * np.eye(d)
    return GmmParams(means, 0.5 * (cov + cov.T), rng.dirichlet(np.ones(K)))


def paired_trajectories(start: GmmParams, data, sweeps: int = EM_SWEEPS):
    """Run BCD sweeps and reference EM sweeps side by side from ``start``."""
    bcd, em = start, start
    param_dev, nll_dev, bcd_nll = [], [], [nll(start, data)]
    for _ in range(sweeps):
        bcd = bcd_sweep(bcd, data).params
        em = reference_em_sweep(em, data)
        param_dev.append(
            max(
                float(np.max(np.abs(bcd.means - em.means))),
                float(np.max(np.abs(bcd.covariance - em.covariance))),
                float(np.max(np.abs(bcd.weights.weights - em.weights.weights))),
            )
        )
        l_bcd, l_em = nll(bcd, data), nll(em, data)
        nll_dev.append(abs(l_bcd - l_em))
        bcd_nll.append(l_bcd)
    return param_dev, nll_dev, bcd_nll


def check_em_equivalence(seed: int, trials: int) -> list[CheckRecord]:
    """BCD sweeps reproduce textbook EM sweeps; the NLL never increases."""
    params_dev, nll_dev, monotone = [], [], []
    skipped = 0
    for t in range(trials):
        rng = np.random.default_rng(seed + t)
        params, data = random_instance(seed + t)
        start = em_start(rng, data, params.n_components)
        try:
            p_dev, l_dev, traj = paired_trajectories(start, data)
        except EmptyComponent:
            skipped += 1
            continue
        params_dev.append(max(p_dev))
        nll_dev.append(max(l_dev))
        monotone.append(max(0.0, float(np.max(np.diff(traj)))))
    return [
        _record("em_equivalence_params", params_dev, EM_PARAM_TOL, skipped_empty_component=skipped),
        _record("em_equivalence_nll", nll_dev, EM_NLL_TOL),
        _record("nll_monotonicity", monotone, MONOTONE_TOL),
    ]


def m_step_objective(P, X, means, cov) -> float:
    """``n <C(theta), P>`` up to a constant: the quadratic term weighted by ``n P`` plus
    ``(n/2) * mass(P) * log det Sigma``."""
    P = np.asarray(P)
    n = P.shape[0]
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        return np.inf
    prec = np.linalg.inv(cov)
    quad = 0.0
    for j in range(means.shape[0]):
        D = X - means[j]
        quad += float(np.sum(n * P[:, j] * np.einsum("ik,kl,il->i", D, prec, D)))
    return 0.5 * quad + 0.5 * n * float(P.sum()) * logdet


def m_step_gradient_fd(P, X, means, cov, step: float = FD_STEP) -> np.ndarray:
    """Central differences of :func:`m_step_objective` in every mean entry and
    every symmetric covariance entry pair."""
    grads = []
    for j in range(means.shape[0]):
        for k in range(means.shape[1]):
            e = np.zeros_like(means)
            e[j, k] = step
            grads.append(
                (m_step_objective(P, X, means + e, cov) - m_step_objective(P, X, means - e, cov)) / (2 * step)
            )
    d = cov.shape[0]
    for k in range(d):
        for l in range(k, d):
            E = np.zeros_like(cov)
            E[k, l] = E[l, k] = step
            grads.append(
                (m_step_objective(P, X, means, cov + E) - m_step_objective(P, X, means, cov - E)) / (2 * step)
            )
    return np.asarray(grads)


def check_m_step_stationarity(seed: int, trials: int) -> list[CheckRecord]:
    """Finite-difference gradients vanish at the mean and covariance updates."""
    worst = []
    for t in range(trials):
        rng = np.random.default_rng(seed + t)
        params, data = random_instance(seed + t)
        X = np.asarray(data)
        state = em_start(rng, data, params.n_components)
        P = update_plan(state, cost_matrix(state, data))
        means = update_means(P, X)
        cov = update_covariance(P, X, means)
        worst.append(float(np.max(np.abs(m_step_gradient_fd(P.plan, X, means, cov)))))
    return [_record("m_step_stationarity", worst, STATIONARITY_TOL)]


CHECKS = (
    check_identity_nll,
    check_upper_bound,
    check_min_over_pi_equality,
    check_variational_identities,
    check_em_equivalence,
    check_m_step_stationarity,
)


def run_all(seed: int, trials: int) -> VerificationReport:
    if trials < 1:
        raise ValueError("trials must be positive")
    records: list[CheckRecord] = []
    for check in CHECKS:
        records.extend(check(seed, trials))
    return VerificationReport(records, seed, trials)
