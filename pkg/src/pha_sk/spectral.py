"""Diagonal-plus-GOE spectral quantities and the step covariance Q^2.

Notation: ``tr_n`` is the normalized trace (1/n) tr, ``g_{-D}(z) = tr_n (z + D)^{-1}``.
For a positive diagonal D normalized so that 2 beta^2 tr_n D^{-2} = 1, the
step covariance at (t, sigma) is

    Q^2 = 2 beta n^delta Pi P^2 Pi,   P^2 = b~ (b~^2 + (a~ - H)^2)^{-1},

with ``H = 2 beta A_sym - D``, ``Pi`` the projector onto sigma's orthogonal
complement and ``a~ + i b~ = i b + 2 beta^2 g_{-D}(i b)``, ``b = beta n^-delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .instance import SkInstance
from .krylov import KrylovInfo, lanczos_funm
from .legendre import DualEntropy

DENSE_CUTOFF = 4096


def cauchy_transform(D, z: complex) -> complex:
    """g_{-D}(z) = (1/n) sum_i 1 / (z + D_i)."""
    D = np.asarray(D, dtype=np.float64)
    w = z + D
    if np.any(w == 0):
        raise ZeroDivisionError(f"z = {z} hits a pole of g_-D")
    return complex(np.mean(1.0 / w))


def solve_shift_a(D, beta: float) -> float:
    """Unique a > -min(D) with 2 beta^2 tr_n (a + D)^{-2} = 1, by bisection."""
    D = np.asarray(D, dtype=np.float64)
    if beta <= 0:
        raise ValueError("beta must be positive")
    dmin = float(D.min())
    s = math.sqrt(2.0) * beta

    def resid(a):
        return 2 * beta**2 * np.mean((a + D) ** -2.0) - 1.0

    # at lo the smallest D_i alone contributes 4 to 2 beta^2 tr_n, so resid > 0;
    # at hi every (a + D_i)^{-2} is at most 1 / (2 beta^2), so resid <= 0
    lo = -dmin + 0.5 * s / math.sqrt(D.size)
    hi = -dmin + s
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if resid(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def free_edge(D, beta: float) -> float:
    """Right edge of the limiting spectrum of sqrt(2) beta S - D: a + 2 beta^2 tr_n (a + D)^{-1}."""
    D = np.asarray(D, dtype=np.float64)
    a = solve_shift_a(D, beta)
    return float(a + 2 * beta**2 * np.mean(1.0 / (a + D)))


def compute_tilde_z(D, beta: float, delta: float, n: int | None = None):
    """(a~, b~) with a~ + i b~ = i b + 2 beta^2 g_{-D}(i b), b = beta n^-delta."""
    D = np.asarray(D, dtype=np.float64)
    n = D.size if n is None else n
    b = beta * n ** (-delta)
    g = cauchy_transform(D, 1j * b)
    a_t = 2 * beta**2 * g.real
    b_t = b + 2 * beta**2 * g.imag
    if not b_t > 0:
        raise ArithmeticError(f"b~ = {b_t} is not positive; is D normalized?")
    return a_t, b_t


def build_normalized_D(de: DualEntropy, t: float, sigma) -> tuple[np.ndarray, float]:
    """D = c diag(Lambda_gamma''(t, sigma_j)), c = (2 beta^2 tr_n Lambda''^{-2})^{1/2}."""
    d2 = np.atleast_1d(de.eval_lambda(t, np.asarray(sigma, dtype=np.float64)).d2)
    return _normalize(d2, de.beta)


def _normalize(d2, beta):
    c = math.sqrt(2 * beta**2 * np.mean(d2**-2.0))
    return c * d2, c


@dataclass(eq=False)
class CovarianceOperator:
    """Q^2 for one ascent step.

    ``prefactor`` is 2 beta n^delta. The dense backend stores the
    eigendecomposition of H; the matrix-free backend keeps A_sym and applies
    (b~^2 + (a~ - H)^2)^{-1/2} by Lanczos on a~ - H.
    """

    a_tilde: float
    b_tilde: float
    D: np.ndarray
    norm_factor: float
    sigma: np.ndarray
    delta: float
    beta: float
    A_sym: np.ndarray = field(repr=False)
    backend: str = "dense"
    evals: np.ndarray | None = field(default=None, repr=False)
    evecs: np.ndarray | None = field(default=None, repr=False)
    krylov_tol: float = 1e-8
    krylov_max_iter: int = 2000
    last_info: KrylovInfo | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.D.size

    @property
    def prefactor(self) -> float:
        return 2 * self.beta * self.n**self.delta

    @property
    def unit_sigma(self):
        s = float(np.linalg.norm(self.sigma))
        return None if s == 0 else self.sigma / s

    def project(self, v):
        s = self.unit_sigma
        if s is None:
            return v
        if v.ndim == 1:
            return v - s * (s @ v)
        return v - np.outer(s, s @ v)

    def h_matvec(self, v):
        return 2 * self.beta * (self.A_sym @ v) - self.D * v

    def b_matvec(self, v):
        """(a~ - H) v."""
        return self.a_tilde * v - self.h_matvec(v)

    # dense pieces ---------------------------------------------------------
    def p2_eigs(self):
        """Eigenvalues of P^2 in H's eigenbasis."""
        return self.b_tilde / (self.b_tilde**2 + (self.a_tilde - self.evals) ** 2)

    def _need_dense(self):
        if self.evecs is None:
            raise RuntimeError("operation needs the dense backend")

    def factor_apply(self, g):
        """sqrt(2 beta n^delta) Pi P g: a square-root factor F of Q^2 (F F^T = Q^2)."""
        if self.backend == "dense":
            U = self.evecs
            u = U @ (np.sqrt(self.p2_eigs()) * (U.T @ g))
        else:
            u, self.last_info = lanczos_funm(
                self.b_matvec, g, lambda th: (self.b_tilde**2 + th**2) ** -0.5,
                tol=self.krylov_tol, max_iter=self.krylov_max_iter)
            u = math.sqrt(self.b_tilde) * u
        return math.sqrt(self.prefactor) * self.project(u)

    def matrix(self) -> np.ndarray:
        """Materialized Q^2 (dense backend)."""
        self._need_dense()
        U = self.evecs
        M = (U * self.p2_eigs()) @ U.T
        M = self.project(self.project(M).T)
        return self.prefactor * 0.5 * (M + M.T)

    def matvec(self, v):
        """Q^2 v."""
        if self.backend == "dense":
            U = self.evecs
            return self.prefactor * self.project(U @ (self.p2_eigs() * (U.T @ self.project(v))))
        # b~ (b~^2 + B^2)^{-1} = P^2 applied by Lanczos with f(x) = b~ / (b~^2 + x^2)
        u, self.last_info = lanczos_funm(
            self.b_matvec, self.project(v), lambda th: self.b_tilde / (self.b_tilde**2 + th**2),
            tol=self.krylov_tol, max_iter=self.krylov_max_iter)
        return self.prefactor * self.project(u)

    def trace_n(self, probes: int = 0, seed: int = 0) -> float:
        """tr_n Q^2; dense closed form, or Hutchinson with ``probes`` Rademacher vectors."""
        if self.backend == "dense" and probes == 0:
            p2 = self.p2_eigs()
            s = self.unit_sigma
            w2 = 0.0 if s is None else (self.evecs.T @ s) ** 2
            return float(self.prefactor * np.sum(p2 * (1 - w2)) / self.n)
        Z = _probes(self.n, probes, seed)
        return _trace([z @ self.matvec(z) for z in Z], probes) / self.n

    def diag(self) -> np.ndarray:
        """diag(Q^2) (dense backend)."""
        self._need_dense()
        U = self.evecs
        s = self.unit_sigma
        PU = U if s is None else U - np.outer(s, s @ U)
        return self.prefactor * ((PU * PU) @ self.p2_eigs())

    def resolvent_diag(self) -> np.ndarray:
        """diag(P^2), no projector and no prefactor (dense backend)."""
        self._need_dense()
        U = self.evecs
        return (U * U) @ self.p2_eigs()

    def op_norm_bound(self) -> float:
        """Upper bound 2 beta n^delta max eig(P^2) >= ||Q^2||_op."""
        if self.backend == "dense":
            return float(self.prefactor * self.p2_eigs().max())
        return float(self.prefactor / self.b_tilde)


def _probes(n, probes, seed):
    if probes <= 0:
        return np.eye(n)
    g = rng.stream(seed, rng.PROBES)
    return g.choice([-1.0, 1.0], size=(probes, n))


def _trace(quads, probes) -> float:
    """tr M from the values z^T M z: summed over the basis, averaged over Rademacher probes."""
    return float(np.sum(quads) if probes <= 0 else np.mean(quads))


def build_covariance(inst: SkInstance, de: DualEntropy, t: float, sigma, beta: float, delta: float,
                     backend: str = "dense", dense_cutoff: int = DENSE_CUTOFF,
                     krylov_tol: float = 1e-8) -> CovarianceOperator:
    if backend not in ("dense", "iterative"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "dense" and inst.n > dense_cutoff:
        raise ValueError(f"dense backend refused for n = {inst.n} > {dense_cutoff}; use backend='iterative'")
    if abs(de.beta - beta) > 1e-15:
        raise ValueError("dual entropy and covariance disagree on beta")
    sigma = np.asarray(sigma, dtype=np.float64)
    D, c = build_normalized_D(de, t, sigma)
    a_t, b_t = compute_tilde_z(D, beta, delta, inst.n)
    cov = CovarianceOperator(a_t, b_t, D, c, sigma.copy(), delta, beta, inst.A_sym,
                             backend=backend, krylov_tol=krylov_tol)
    if backend == "dense":
        H = 2 * beta * inst.A_sym - np.diag(D)
        cov.evals, cov.evecs = np.linalg.eigh(H)
    return cov


def approx_eigvec_residual(cov: CovarianceOperator, inst: SkInstance | None = None,
                           probes: int | None = None, seed: int = 0) -> float:
    """||(H - 2 beta^2 tr_n D^{-1}) Q||_2 in normalized Hilbert-Schmidt norm.

    Dense: closed form in H's eigenbasis. Otherwise (or with ``probes`` set)
    trace estimation: ||B F||_F^2 = E ||B F z||^2 over probe vectors z, where
    F is the square-root factor used by the sampler; ``probes=0`` uses the
    standard basis and is exact up to the Krylov tolerance.
    """
    lam_star = 2 * cov.beta**2 * np.mean(1.0 / cov.D)
    if cov.backend == "dense" and probes is None:
        mu2 = (cov.evals - lam_star) ** 2
        p2 = cov.p2_eigs()
        s = cov.unit_sigma
        if s is None:
            total = np.sum(mu2 * p2)
        else:
            w2 = (cov.evecs.T @ s) ** 2
            total = np.sum(mu2 * p2 * (1 - 2 * w2)) + np.sum(mu2 * w2) * np.sum(w2 * p2)
        return math.sqrt(cov.prefactor * total / cov.n)
    probes = probes or 0
    quads = []
    for z in _probes(cov.n, probes, seed):
        u = cov.factor_apply(z)
        r = cov.h_matvec(u) - lam_star * u
        quads.append(r @ r)
    return math.sqrt(_trace(quads, probes) / cov.n)


def diag_error(cov: CovarianceOperator) -> float:
    """Normalized l2 distance between diag(Q^2) and 2 beta^2 D^{-2}."""
    return float(np.sqrt(np.mean((cov.diag() - 2 * cov.beta**2 / cov.D**2) ** 2)))


def resolvent_diag_error(cov: CovarianceOperator) -> float:
    """Normalized l2 distance between diag(P^2) and b (b^2 + D^2)^{-1}."""
    b = cov.beta * cov.n ** (-cov.delta)
    return float(np.sqrt(np.mean((cov.resolvent_diag() - b / (b * b + cov.D**2)) ** 2)))
