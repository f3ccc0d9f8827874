"""Time-dependent objective of the ascent.

    obj(t, sigma) = beta <sigma, A sigma> - sum_i Lambda_gamma(t, sigma_i)
                    - beta^2 n int_t^1 F(s) s ds
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import SkInstance
from .legendre import DualEntropy
from .parisi import ParisiMeasure


@dataclass
class Objective:
    inst: SkInstance
    de: DualEntropy
    mu: ParisiMeasure
    beta: float

    def __post_init__(self):
        if abs(self.de.beta - self.beta) > 1e-15:
            raise ValueError(f"dual entropy built at beta = {self.de.beta}, objective uses {self.beta}")
        if not self.de.sol.measure.same_as(self.mu):
            raise ValueError("dual entropy was built for a different measure")
        self._radial: dict[float, float] = {}

    @property
    def n(self) -> int:
        return self.inst.n

    def radial(self, t: float) -> float:
        """beta^2 n int_t^1 s F(s) ds (sigma-independent, cached per t)."""
        r = self._radial.get(t)
        if r is None:
            r = self.beta**2 * self.n * self.mu.integral_tF(t, 1.0)
            self._radial[t] = r
        return r

    def _check(self, sigma):
        sigma = np.asarray(sigma, dtype=np.float64)
        if sigma.shape != (self.n,):
            raise ValueError(f"sigma has shape {sigma.shape}, expected ({self.n},)")
        return sigma


def eval_obj(o: Objective, t: float, sigma) -> float:
    sigma = o._check(sigma)
    lam = o.de.eval_lambda(t, sigma).value
    return float(o.beta * (sigma @ (o.inst.A @ sigma)) - lam.sum() - o.radial(t))


def grad_obj(o: Objective, t: float, sigma) -> np.ndarray:
    """2 beta A_sym sigma - (d_y Lambda_gamma(t, sigma_i))_i."""
    sigma = o._check(sigma)
    return 2 * o.beta * (o.inst.A_sym @ sigma) - o.de.eval_lambda(t, sigma).d1


def hess_diag(o: Objective, t: float, sigma):
    """Hessian as (A_sym, diag): the full Hessian is 2 beta A_sym - diag(diag)."""
    sigma = o._check(sigma)
    return o.inst.A_sym, o.de.eval_lambda(t, sigma).d2


def hess_matvec(o: Objective, t: float, sigma, u) -> np.ndarray:
    A_sym, d = hess_diag(o, t, sigma)
    return 2 * o.beta * (A_sym @ u) - d * u
