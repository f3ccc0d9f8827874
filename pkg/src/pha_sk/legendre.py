"""Legendre dual of the Parisi PDE solution and its gamma-regularization.

    Lambda_gamma(t, y) = sup_x  x y - Phi(t, x) - gamma x^2 / 2

The supremum is attained at the unique root of Phi_x(t, x) + gamma x = y, so
every evaluation is a root find followed by derivative lookups:

    d1 = x,  d2 = 1 / (Phi_xx + gamma),  d3 = -Phi_xxx / (Phi_xx + gamma)^3.

For gamma = 0 the dual is finite only on |y| < 1.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .parisi import ParisiSolution


class LambdaDomainError(ValueError):
    """y outside the effective domain of Lambda (gamma = 0 and |y| >= 1)."""


class RootFindingError(RuntimeError):
    pass


class LambdaValue(NamedTuple):
    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray


class InfConvolution(NamedTuple):
    value: float
    argmin: float


class DualEntropy:
    """Evaluator of Lambda_gamma(t, .) on top of a ParisiSolution.

    Root finds are warm started from the last query of the same length when
    the inputs moved little, which makes repeated bulk evaluation (one value
    per coordinate or per path) cheap.
    """

    def __init__(self, sol: ParisiSolution, gamma: float = 1e-3, tol: float = 1e-12, max_iter: int = 200):
        if gamma < 0:
            raise ValueError("gamma must be nonnegative")
        self.sol = sol
        self.gamma = float(gamma)
        self.tol = tol
        self.max_iter = max_iter
        self._warm: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def beta(self) -> float:
        return self.sol.beta

    def with_gamma(self, gamma: float) -> "DualEntropy":
        return DualEntropy(self.sol, gamma, self.tol, self.max_iter)

    def _bracket(self, t, y):
        ay = np.abs(y)
        with np.errstate(divide="ignore"):
            half = np.where(ay < 1, 0.5 * np.log(2.0 / np.maximum(1 - ay, 1e-300)), np.inf)
        half = half + 4 * self.beta**2 * (1 - t) + 1.0
        if self.gamma > 0:
            half = np.minimum(half, (ay + 1) / self.gamma + 1.0)
        return -half, half

    def solve_x(self, t: float, y, x0=None) -> np.ndarray:
        """Root of Phi_x(t, x) + gamma x = y, by safeguarded Newton."""
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        if self.gamma == 0 and np.any(np.abs(y) >= 1):
            bad = int(np.argmax(np.abs(y) >= 1))
            raise LambdaDomainError(f"|y| >= 1 at index {bad} (y = {y[bad]}) with gamma = 0")
        lo, hi = self._bracket(t, y)
        if x0 is None:
            warm = self._warm.get(y.size)
            if warm is not None and np.max(np.abs(warm[0] - y)) < 0.05:
                x0 = warm[1]
            else:
                x0 = np.arctanh(np.clip(y, -0.999, 0.999))
        x = np.clip(np.asarray(x0, dtype=np.float64), lo, hi)
        g = self.gamma
        done = np.zeros(y.shape, dtype=bool)
        idx = np.arange(y.size)
        for _ in range(self.max_iter):
            sub = idx[~done]
            if sub.size == 0:
                break
            xs = x[sub]
            d1, d2 = self.sol.derivs(t, xs, (1, 2))
            r = d1 + g * xs - y[sub]
            slope = d2 + g
            ok = np.abs(r) <= self.tol
            pos = r > 0
            hi[sub] = np.where(pos, xs, hi[sub])
            lo[sub] = np.where(pos, lo[sub], xs)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = xs - r / slope
            mid = 0.5 * (lo[sub] + hi[sub])
            bad = ~np.isfinite(step) | (step <= lo[sub]) | (step >= hi[sub]) | (slope <= 0)
            xn = np.where(bad, mid, step)
            tiny = (hi[sub] - lo[sub]) <= 1e-14 * np.maximum(1.0, np.abs(xs))
            x[sub] = np.where(ok, xs, xn)
            done[sub] = ok | tiny
        if not np.all(done):
            raise RootFindingError(f"root finding did not converge at t = {t}")
        if self.gamma == 0:
            # roots pinned at the bracket edge mean y is not in the range of Phi_x
            d1 = self.sol.derivs(t, x, (1,))[0]
            miss = np.abs(d1 - y) > max(1e-8, 1e3 * self.tol)
            if np.any(miss):
                bad = int(np.argmax(miss))
                raise RootFindingError(f"no root for y = {y[bad]} at t = {t}: bracket exhausted")
        self._warm[y.size] = (y.copy(), x.copy())
        return x

    def eval_lambda(self, t: float, y, x0=None) -> LambdaValue:
        """(Lambda_gamma, d1, d2, d3) at (t, y); arrays follow the shape of y."""
        y_in = np.asarray(y, dtype=np.float64)
        y = np.atleast_1d(y_in)
        x = self.solve_x(t, y, x0)
        phi, _, p2, p3 = self.sol.derivs(t, x, (0, 1, 2, 3))
        # exact Phi_xx lies in [0, 1] with equality at x = 0 for t >= q*; the
        # discrete value can cross either end by O(dx^2), so pin it back
        curv = np.clip(p2, 0.0, 1.0) + self.gamma
        value = x * y - phi - 0.5 * self.gamma * x * x
        out = LambdaValue(value, x, 1.0 / curv, -p3 / curv**3)
        if y_in.ndim == 0:
            return LambdaValue(*(float(a[0]) for a in out))
        return out

    def eval_v(self, t: float, y, x0=None):
        """v = 1 / Lambda_gamma'' = Phi_xx(t, x(y)) + gamma."""
        y_in = np.asarray(y, dtype=np.float64)
        x = self.solve_x(t, np.atleast_1d(y_in), x0)
        v = np.clip(self.sol.derivs(t, x, (2,))[0], 0.0, 1.0) + self.gamma
        return float(v[0]) if y_in.ndim == 0 else v


def terminal_entropy(y):
    """Lambda(1, y) = ((1 - y) log(1 - y) + (1 + y) log(1 + y)) / 2 - log 2."""
    y = np.asarray(y, dtype=np.float64)
    return 0.5 * ((1 - y) * np.log1p(-y) + (1 + y) * np.log1p(y)) - math.log(2.0)


def inf_convolution_check(de: DualEntropy, t: float, y: float, points: int = 4001) -> InfConvolution:
    """min_{|y'| < 1} Lambda(t, y') + (y' - y)^2 / (2 gamma), by grid search then refinement.

    Evaluates the unregularized dual, so it is independent of de's own root
    finds at gamma; only used as a test oracle.
    """
    if de.gamma <= 0:
        raise ValueError("inf-convolution needs gamma > 0")
    base = de.with_gamma(0.0)
    grid = np.linspace(-0.999, 0.999, points)
    vals = base.eval_lambda(t, grid).value + (grid - y) ** 2 / (2 * de.gamma)
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, points - 1)]

    def f(z):
        return float(base.eval_lambda(t, np.array([z])).value[0]) + (z - y) ** 2 / (2 * de.gamma)

    res = minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
    if res.fun < vals[k]:
        return InfConvolution(float(res.fun), float(res.x))
    return InfConvolution(float(vals[k]), float(grid[k]))
