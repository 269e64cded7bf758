"""Fitting a shared-covariance GMM by block-coordinate descent on the EOT loss.

The loss over ``(P, pi, theta)`` is ``<C(theta), P> + KL(P | (1_n/n) pi^T)``
with ``P`` constrained to row sums ``1/n``. Each sweep minimizes it exactly
in the plan, then the weights, then the means, then the covariance; this
is the EM algorithm written in transport form.

:func:`reference_em_sweep` is an independent textbook EM step (posterior
responsibilities, scipy densities) kept as an oracle for the equivalence.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from .core import CostMatrix, Coupling, Dataset, GmmParams, ProbabilityVector
from .divergences import kl_matrix
from .errors import EmptyComponent, NonPositiveDefiniteCovariance
from .mixture import cost_matrix, nll

MASS_FLOOR = 1e-12


class Termination(str, enum.Enum):
    TOLERANCE = "tolerance"
    MAX_SWEEPS = "max_sweeps"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class FitSettings:
    max_sweeps: int = 500
    nll_tolerance: float = 1e-8
    covariance_floor: float = 0.0
    init_strategy: str = "random-points"
    seed: int = 0

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if not self.nll_tolerance > 0:
            raise ValueError("nll_tolerance must be positive")
        if self.covariance_floor < 0:
            raise ValueError("covariance_floor must be nonnegative")
        if self.init_strategy not in ("random-points", "provided"):
            raise ValueError(f"unknown init_strategy {self.init_strategy!r}")


@dataclass(frozen=True)
class FitReport:
    """Outcome of :func:`fit`.

    ``nll_trajectory[s]`` is the total negative log-likelihood after sweep
    ``s + 1``; ``eot_value_trajectory[s]`` is the transport loss at the
    plan, weights and parameters held at the end of that sweep.
    """

    final_params: GmmParams
    nll_trajectory: tuple[float, ...]
    eot_value_trajectory: tuple[float, ...]
    sweeps_used: int
    converged: bool
    termination_reason: Termination
    initial_nll: float


def _plan(P) -> np.ndarray:
    return np.asarray(P, dtype=float)


def update_plan(params: GmmParams, C) -> Coupling:
    """Plan step: ``P_ij = (1/n) pi_j exp(-C_ij) / sum_k pi_k exp(-C_ik)``."""
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    with np.errstate(divide="ignore"):
        s = np.log(params.weights.weights)[None, :] - C
    s = s - s.max(axis=1, keepdims=True)
    R = np.exp(s)
    R /= R.sum(axis=1, keepdims=True)
    return Coupling.semi_relaxed(R / n)


def update_weights(P) -> ProbabilityVector:
    """Weight step: ``pi = P^T 1_n``."""
    return ProbabilityVector(_plan(P).sum(axis=0))


def update_means(P, data, mass_floor: float = MASS_FLOOR) -> np.ndarray:
    """Mean step: each mean is the ``P``-weighted average of the data.

    Raises:
        EmptyComponent: if some column of ``P`` carries mass below ``mass_floor``.
    """
    P = _plan(P)
    X = np.asarray(data, dtype=float)
    mass = P.sum(axis=0)
    for j, m in enumerate(mass):
        if not m > mass_floor:
            raise EmptyComponent(j + 1, float(m))
    return (P.T @ X) / mass[:, None]


def _scatter(P: np.ndarray, X: np.ndarray, means: np.ndarray) -> np.ndarray:
    d = X.shape[1]
    S = np.zeros((d, d))
    for j in range(means.shape[0]):
        D = X - means[j]
        S += (D * P[:, j : j + 1]).T @ D
    return 0.5 * (S + S.T)


def _floor_eigenvalues(S: np.ndarray, floor: float) -> tuple[np.ndarray, bool]:
    vals, vecs = np.linalg.eigh(S)
    if floor <= 0:
        if vals.min() <= 0:
            raise NonPositiveDefiniteCovariance(
                f"covariance update has eigenvalue {vals.min():.3e}; set a covariance floor"
            )
        return S, False
    if vals.min() >= floor:
        return S, False
    vals = np.maximum(vals, floor)
    S = (vecs * vals) @ vecs.T
    return 0.5 * (S + S.T), True


def update_covariance(P, data, means, covariance_floor: float = 0.0) -> np.ndarray:
    """Covariance step: ``Sigma = sum_ij P_ij (x_i - mu_j)(x_i - mu_j)^T``.

    ``P`` has total mass one, so this is the mass-weighted scatter around
    the given means. Eigenvalues below ``covariance_floor`` are raised to
    it; with the default floor of zero a singular update raises instead.
    """
    X = np.asarray(data, dtype=float)
    S = _scatter(_plan(P), X, np.asarray(means, dtype=float))
    return _floor_eigenvalues(S, covariance_floor)[0]


def transport_loss(P, C, pi) -> float:
    """The loss being minimized: ``<C, P> + KL(P | (1_n/n) pi^T)``."""
    P = _plan(P)
    C = np.asarray(C, dtype=float)
    n = P.shape[0]
    ref = np.outer(np.full(n, 1.0 / n), np.asarray(pi, dtype=float))
    return float(np.sum(C * P)) + kl_matrix(P, ref)


@dataclass(frozen=True)
class SweepResult:
    params: GmmParams
    coupling: Coupling
    clamped: bool


def bcd_sweep(params: GmmParams, data: Dataset, covariance_floor: float = 0.0) -> SweepResult:
    """One block-coordinate sweep: plan, weights, means, covariance."""
    X = np.asarray(data, dtype=float)
    C = cost_matrix(params, data)
    P = update_plan(params, C)
    weights = update_weights(P)
    means = update_means(P, X)
    S, clamped = _floor_eigenvalues(_scatter(P.plan, X, means), covariance_floor)
    return SweepResult(GmmParams(means, S, weights), P, clamped)


def initial_params(data: Dataset, K: int, seed: int, covariance_floor: float = 0.0) -> GmmParams:
    """``K`` distinct data points as means, the global covariance, uniform weights."""
    X = np.asarray(data, dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.choice(X.shape[0], size=K, replace=False)
    centred = X - X.mean(axis=0)
    S = centred.T @ centred / X.shape[0]
    S, _ = _floor_eigenvalues(0.5 * (S + S.T), covariance_floor)
    return GmmParams(X[idx], S, ProbabilityVector.uniform(K))


def fit(
    data: Dataset,
    K: int,
    settings: FitSettings | None = None,
    init: GmmParams | None = None,
) -> FitReport:
    """Fit a ``K``-component shared-covariance GMM by block-coordinate descent.

    Stops when a sweep lowers the negative log-likelihood by less than
    ``settings.nll_tolerance`` (reason ``tolerance``), after
    ``settings.max_sweeps`` sweeps, or as soon as the covariance floor had
    to be applied (reason ``degenerate``; the sweep is no longer an exact
    block minimization past that point).

    Raises:
        EmptyComponent: with ``sweep`` set to the 1-based sweep index.
        NonPositiveDefiniteCovariance: if a covariance update is singular
            and no floor is configured.
    """
    settings = settings or FitSettings()
    if not isinstance(data, Dataset):
        data = Dataset(data)
    if K < 1 or K > data.n:
        raise ValueError(f"K must lie in [1, n={data.n}], got {K}")
    if init is None:
        if settings.init_strategy == "provided":
            raise ValueError("init_strategy 'provided' requires init parameters")
        params = initial_params(data, K, settings.seed, settings.covariance_floor)
    else:
        if init.n_components != K or init.dimension != data.dimension:
            raise ValueError("init parameters do not match K and the data dimension")
        params = init

    prev = initial = nll(params, data)
    nlls: list[float] = []
    losses: list[float] = []
    reason = Termination.MAX_SWEEPS
    for sweep in range(1, settings.max_sweeps + 1):
        try:
            step = bcd_sweep(params, data, settings.covariance_floor)
        except EmptyComponent as exc:
            raise EmptyComponent(exc.component, exc.mass, sweep=sweep) from exc
        params = step.params
        current = nll(params, data)
        nlls.append(current)
        losses.append(
            transport_loss(step.coupling, cost_matrix(params, data), params.weights.weights)
        )
        if step.clamped:
            reason = Termination.DEGENERATE
            break
        if prev - current < settings.nll_tolerance:
            reason = Termination.TOLERANCE
            break
        prev = current

    return FitReport(
        final_params=params,
        nll_trajectory=tuple(nlls),
        eot_value_trajectory=tuple(losses),
        sweeps_used=len(nlls),
        converged=reason is Termination.TOLERANCE,
        termination_reason=reason,
        initial_nll=initial,
    )


def reference_em_sweep(params: GmmParams, data: Dataset) -> GmmParams:
    """One textbook EM iteration for a tied-covariance GMM.

    E-step: posterior responsibilities ``gamma_ik``. M-step: ``N_k = sum_i
    gamma_ik``, ``pi_k = N_k / n``, ``mu_k = sum_i gamma_ik x_i / N_k`` and
    ``Sigma = (1/n) sum_k sum_i gamma_ik (x_i - mu_k)(x_i - mu_k)^T``.
    """
    X = np.asarray(data, dtype=float)
    n = X.shape[0]
    K = params.n_components
    log_dens = np.column_stack(
        [
            np.atleast_1d(multivariate_normal.logpdf(X, mean=params.means[k], cov=params.covariance))
            for k in range(K)
        ]
    )
    with np.errstate(divide="ignore"):
        log_joint = log_dens + np.log(params.weights.weights)
    gamma = np.exp(log_joint - logsumexp(log_joint, axis=1, keepdims=True))
    Nk = gamma.sum(axis=0)
    for k in range(K):
        if not Nk[k] / n > MASS_FLOOR:
            raise EmptyComponent(k + 1, float(Nk[k] / n))
    means = (gamma.T @ X) / Nk[:, None]
    d = X.shape[1]
    cov = np.zeros((d, d))
    for k in range(K):
        D = X - means[k]
        cov += (gamma[:, k][:, None] * D).T @ D
    cov = 0.5 * (cov + cov.T) / n
    return GmmParams(means, cov, ProbabilityVector(Nk / Nk.sum()))
