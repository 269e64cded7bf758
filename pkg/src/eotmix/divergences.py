"""KL divergences, weighted log-sum-exp and the Gibbs variational principle.

Conventions: ``0 log 0 = 0`` and ``KL(P|Q) = +inf`` as soon as some
``P_ij > 0`` meets ``Q_ij = 0``. Infinity is a return value, not an error.
"""

from __future__ import annotations

import numpy as np

from .core import ProbabilityVector
from .errors import EmptyInput, NonPositiveWeights, ShapeMismatch


def _xlogy_ratio(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Elementwise ``p log(p/q)`` with the support conventions above."""
    out = np.zeros(np.broadcast(p, q).shape)
    pos = p > 0
    bad = pos & (q <= 0)
    ok = pos & ~bad
    pb, qb = np.broadcast_to(p, out.shape), np.broadcast_to(q, out.shape)
    out[ok] = pb[ok] * (np.log(pb[ok]) - np.log(qb[ok]))
    out[bad] = np.inf
    return out


def _nonnegative(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError(f"{name} has negative entries")
    return x


def kl_matrix(P, Q) -> float:
    """``sum_ij P_ij log(P_ij / Q_ij)`` for nonnegative matrices of equal shape."""
    P = _nonnegative(P, "P")
    Q = _nonnegative(Q, "Q")
    if P.shape != Q.shape:
        raise ShapeMismatch(f"KL between shapes {P.shape} and {Q.shape}")
    # raveled C-order sum: fixed accumulation order, bit-reproducible
    return float(np.sum(np.ascontiguousarray(_xlogy_ratio(P, Q)).ravel()))


def kl_to_product(P, a, b) -> float:
    """``KL(P | a b^T)`` evaluated as ``P (log P - log a_i - log b_j)``.

    Same value as ``kl_matrix(P, np.outer(a, b))`` but never forms the outer
    product, which can underflow to zero for tiny but positive ``a_i b_j``.
    """
    P = _nonnegative(P, "P")
    a = _nonnegative(a, "a")
    b = _nonnegative(b, "b")
    if P.ndim != 2 or P.shape != (a.size, b.size):
        raise ShapeMismatch(f"P {P.shape} incompatible with a {a.shape}, b {b.shape}")
    with np.errstate(divide="ignore"):
        log_ref = np.log(a)[:, None] + np.log(b)[None, :]
    out = np.zeros(P.shape)
    pos = P > 0
    bad = pos & np.isneginf(log_ref)
    ok = pos & ~bad
    out[ok] = P[ok] * (np.log(P[ok]) - log_ref[ok])
    out[bad] = np.inf
    return float(np.sum(out.ravel()))


def kl_vector(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise ShapeMismatch(f"KL between shapes {a.shape} and {b.shape}")
    return kl_matrix(a[None, :], b[None, :])


def _positive_weights(pi) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 1:
        raise ShapeMismatch(f"weights must be a vector, got shape {pi.shape}")
    if pi.size == 0:
        raise EmptyInput("empty weight vector")
    if np.any(~(pi > 0)):
        raise NonPositiveWeights("weights must be strictly positive")
    return pi


def weighted_logsumexp(pi, h) -> float | np.ndarray:
    """``log sum_j pi_j exp(h_j)``, reduced over the last axis of ``h``.

    ``h`` may be a vector (returns a float) or a matrix whose rows are
    reduced independently (returns a vector). The maximum of
    ``h_j + log pi_j`` is subtracted before exponentiating.
    """
    pi = _positive_weights(pi)
    h = np.asarray(h, dtype=float)
    if h.shape[-1:] != pi.shape:
        raise ShapeMismatch(f"h has trailing dimension {h.shape[-1:]} but pi has {pi.shape}")
    s = h + np.log(pi)
    m = np.max(s, axis=-1, keepdims=True)
    out = m[..., 0] + np.log(np.sum(np.exp(s - m), axis=-1))
    return float(out) if out.ndim == 0 else out


def gibbs_log_rows(pi, H) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise Gibbs maximizers in log form.

    Returns ``(log_p, lse)`` where ``log_p[i] = log pi + H[i] - lse[i]`` and
    ``lse[i]`` is the weighted log-sum-exp of row ``i``.
    """
    pi = _positive_weights(pi)
    H = np.atleast_2d(np.asarray(H, dtype=float))
    lse = weighted_logsumexp(pi, H)
    log_p = H + np.log(pi) - lse[:, None]
    return log_p, lse


def gibbs_optimum(pi, h) -> ProbabilityVector:
    """Maximizer over the simplex of ``<h, p> - KL(p | pi)``.

    The maximizer is the tilted distribution ``p_k ∝ pi_k exp(h_k)``.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 1:
        raise ShapeMismatch(f"h must be a vector, got shape {h.shape}")
    log_p, _ = gibbs_log_rows(pi, h[None, :])
    p = np.exp(log_p[0])
    return ProbabilityVector(p / p.sum())


def gibbs_objective(pi, h, p) -> float:
    """Variational objective ``sum_j h_j p_j - sum_j p_j log(p_j / pi_j)``."""
    pi = _positive_weights(pi)
    h = np.asarray(h, dtype=float)
    p = np.asarray(p, dtype=float)
    if not (h.shape == p.shape == pi.shape):
        raise ShapeMismatch(f"shapes pi {pi.shape}, h {h.shape}, p {p.shape} differ")
    return float(np.dot(h, p)) - kl_vector(p, pi)


def kl_three_term_decomposition(P, a, b) -> tuple[float, float, float]:
    """Split ``KL(P | a b^T)`` along the marginals of ``P``.

    Returns ``(KL(P | r c^T), KL(r | a), KL(c | b))`` where ``r = P 1`` and
    ``c = P^T 1``; the three terms sum to ``KL(P | a b^T)``.
    """
    P = _nonnegative(P, "P")
    a = _nonnegative(a, "a")
    b = _nonnegative(b, "b")
    if P.ndim != 2 or a.shape != (P.shape[0],) or b.shape != (P.shape[1],):
        raise ShapeMismatch(f"P {P.shape} incompatible with a {a.shape}, b {b.shape}")
    r = P.sum(axis=1)
    c = P.sum(axis=0)
    return kl_matrix(P, np.outer(r, c)), kl_vector(r, a), kl_vector(c, b)
