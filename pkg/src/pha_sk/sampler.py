"""Gaussian ascent steps u ~ N(0, Q^2).

Both samplers apply the same square-root factor ``sqrt(2 beta n^delta) Pi P``
to a standard normal vector, so for a shared ``g`` they return the same
vector up to the Krylov tolerance. The exact sampler uses the dense
eigendecomposition; the iterative one uses Lanczos for

    (b~^2 + (a~ - H)^2)^{-1/2} g = f(a~ - H) g,   f(x) = (b~^2 + x^2)^{-1/2}.
"""

from __future__ import annotations

import numpy as np

from .spectral import CovarianceOperator


def sample_exact(cov: CovarianceOperator, gen: np.random.Generator, g=None) -> np.ndarray:
    if cov.backend != "dense" or cov.evecs is None:
        raise RuntimeError("exact sampling needs the dense backend")
    if g is None:
        g = gen.standard_normal(cov.n)
    return cov.factor_apply(g)


def sample_iterative(cov: CovarianceOperator, gen: np.random.Generator, tol: float = 1e-8,
                     g=None, max_iter: int = 2000) -> np.ndarray:
    """Lanczos sampler; the Krylov info of the call is left in ``cov.last_info``."""
    if g is None:
        g = gen.standard_normal(cov.n)
    work = CovarianceOperator(cov.a_tilde, cov.b_tilde, cov.D, cov.norm_factor, cov.sigma,
                              cov.delta, cov.beta, cov.A_sym, backend="iterative",
                              krylov_tol=tol, krylov_max_iter=max_iter)
    u = work.factor_apply(g)
    cov.last_info = work.last_info
    return u


def sample(cov: CovarianceOperator, gen: np.random.Generator, tol: float = 1e-8) -> np.ndarray:
    """Dispatch on the operator's backend."""
    if cov.backend == "dense":
        return sample_exact(cov, gen)
    return sample_iterative(cov, gen, tol=tol)


def condition_estimate(cov: CovarianceOperator) -> float:
    """kappa(b~^2 + (a~ - H)^2) from the extreme Ritz values of the last Lanczos run."""
    info = cov.last_info
    if info is None:
        raise RuntimeError("no Lanczos run recorded")
    b2 = cov.b_tilde**2
    lo = 0.0 if info.ritz_min <= 0 <= info.ritz_max else min(info.ritz_min**2, info.ritz_max**2)
    hi = max(info.ritz_min**2, info.ritz_max**2)
    return (b2 + hi) / (b2 + lo)
