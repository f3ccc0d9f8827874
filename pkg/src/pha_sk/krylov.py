"""Lanczos approximation of f(B) v for symmetric B given only matvecs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal


class KrylovBudgetError(RuntimeError):
    def __init__(self, msg, residual):
        super().__init__(msg)
        self.residual = residual


@dataclass
class KrylovInfo:
    iterations: int
    error_estimate: float
    ritz_min: float
    ritz_max: float


def lanczos_funm(matvec, v, f, tol: float = 1e-8, max_iter: int = 1000, check_every: int = 5):
    """Approximate f(B) v by Lanczos with full reorthogonalization.

    ``f`` acts elementwise on Ritz values. Convergence is declared when two
    consecutive checks (``check_every`` iterations apart) differ by at most
    ``tol`` relative to the current approximation; the difference is the
    error estimate reported. The returned info carries the extreme Ritz
    values, from which spectrum bounds (and condition numbers) follow.
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.size
    norm0 = float(np.linalg.norm(v))
    if norm0 == 0.0:
        return np.zeros(n), KrylovInfo(0, 0.0, np.nan, np.nan)
    kmax = min(max_iter, n)
    V = np.empty((kmax + 1, n))
    V[0] = v / norm0
    alpha = np.empty(kmax)
    beta = np.empty(kmax)
    prev = None
    err = np.inf

    def estimate(k):
        theta, S = eigh_tridiagonal(alpha[:k], beta[: k - 1])
        coef = S @ (f(theta) * S[0])
        return norm0 * (coef @ V[:k]), theta

    for k in range(kmax):
        w = matvec(V[k])
        alpha[k] = V[k] @ w
        # two passes of classical Gram-Schmidt against the whole basis
        for _ in range(2):
            w -= V[: k + 1].T @ (V[: k + 1] @ w)
        beta[k] = float(np.linalg.norm(w))
        last = k + 1 == kmax
        breakdown = beta[k] <= 1e-12 * max(1.0, abs(alpha[k]))
        if breakdown or last or (k + 1) % check_every == 0:
            y, theta = estimate(k + 1)
            if prev is not None:
                err = float(np.linalg.norm(y - prev) / max(np.linalg.norm(y), 1e-300))
            if breakdown:
                err = 0.0
            if err <= tol:
                return y, KrylovInfo(k + 1, err, float(theta[0]), float(theta[-1]))
            prev = y
        V[k + 1] = w / beta[k]
    raise KrylovBudgetError(f"Lanczos stopped after {kmax} iterations at relative change {err:.2e}", err)
