"""The ascent loop (PHA), with truncation and Bernoulli rounding.

Starting from sigma_0 = 0 the iterate takes K = ceil(q*/eta) Gaussian steps

    sigma_{k+1} = sigma_k + sqrt(eta) u_k,   u_k ~ N(0, Q^2(t_k, sigma_k)),  t_k = k eta,

is clamped to the cube and rounded coordinatewise with P(+1) = (1 + sigma)/2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .instance import SkInstance, hamiltonian
from .potential import Objective, eval_obj
from .sampler import sample
from .spectral import approx_eigvec_residual, build_covariance

RECORD_FIELDS = (
    "k", "t", "obj", "trace_q2", "eigvec_residual", "quad_step", "cube_step",
    "second_moment", "escaped", "a_tilde", "b_tilde",
)


@dataclass
class PhaParams:
    beta: float
    eta: float = 0.01
    delta: float = 1.0 / 22.0
    gamma: float = 1e-3
    K: int | None = None
    seed: int = 0
    backend: str = "dense"
    alpha: float = 0.25
    diagnostics: bool = True
    krylov_tol: float = 1e-8

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if not 0 <= self.delta <= 1 / 22 + 1e-15:
            raise ValueError("delta must lie in [0, 1/22]")
        if self.gamma < 0 or self.beta <= 0:
            raise ValueError("need beta > 0 and gamma >= 0")
        if self.K is not None and (self.K < 0 or self.K * self.eta > 1 + 1e-12):
            raise ValueError("K must satisfy 0 <= K eta <= 1")

    @classmethod
    def gamma_preset(cls, beta: float, eta: float, **kw) -> "PhaParams":
        """gamma = eta^{1/8}."""
        return cls(beta=beta, eta=eta, gamma=eta**0.125, **kw)


def default_steps(q_star: float, eta: float) -> int:
    """ceil(q*/eta), with q* replaced by 1 - eta when the measure only saturates at 1."""
    q = 1.0 - eta if q_star >= 1.0 else q_star
    return int(math.ceil(q / eta - 1e-9))


@dataclass
class PhaTrajectory:
    iterates: list
    records: list
    sigma_final: np.ndarray
    energy: float
    energy_truncated: float
    params: PhaParams
    extras: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return len(self.iterates) - 1

    def times(self) -> np.ndarray:
        return np.array([r["t"] for r in self.records])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=RECORD_FIELDS)
            w.writeheader()
            for r in self.records:
                w.writerow({k: r.get(k, "") for k in RECORD_FIELDS})

    def summary(self) -> dict:
        return {
            "K": self.K,
            "energy": self.energy,
            "energy_truncated": self.energy_truncated,
            "final_second_moment": self.records[-1]["second_moment"],
            "escaped_fraction": self.records[-1]["escaped"],
        }


def truncate(sigma) -> np.ndarray:
    """Clamp every coordinate to [-1, 1]."""
    return np.clip(np.asarray(sigma, dtype=np.float64), -1.0, 1.0)


def round_bernoulli(sigma, gen: np.random.Generator) -> np.ndarray:
    """Independent signs with P(sigma*_j = 1) = (1 + sigma_j)/2."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(np.abs(sigma) > 1.0):
        raise ValueError("sigma must lie in [-1, 1]^n; truncate first")
    return np.where(gen.random(sigma.shape) < 0.5 * (1.0 + sigma), 1.0, -1.0)


def rounding_threshold(inst: SkInstance, alpha: float) -> float:
    """4 ||A||_op n^{1 - alpha}: the allowed energy loss of one rounding."""
    return 4.0 * inst.op_norm() * inst.n ** (1.0 - alpha)


def run_pha(inst: SkInstance, o: Objective, p: PhaParams, progress=None) -> PhaTrajectory:
    if abs(o.beta - p.beta) > 1e-15 or abs(o.de.gamma - p.gamma) > 1e-15:
        raise ValueError("objective and parameters disagree on beta or gamma")
    n, eta = inst.n, p.eta
    K = default_steps(o.mu.q_star, eta) if p.K is None else p.K
    sigma = np.zeros(n)
    iterates = [sigma.copy()]
    records = []
    for k in range(K + 1):
        t = k * eta
        rec = {"k": k, "t": t, "obj": eval_obj(o, t, sigma),
               "second_moment": float(sigma @ sigma) / n,
               "escaped": float(np.mean(np.abs(sigma) > 1.0))}
        if k < K:
            cov = build_covariance(inst, o.de, t, sigma, p.beta, p.delta, backend=p.backend,
                                   krylov_tol=p.krylov_tol)
            u = sample(cov, rng.stream(p.seed, rng.PHA_STEP, k), tol=p.krylov_tol)
            step = math.sqrt(eta) * u
            rec.update(a_tilde=cov.a_tilde, b_tilde=cov.b_tilde,
                       quad_step=float(step @ (inst.A_sym @ step)),
                       cube_step=float(np.sum(np.abs(step) ** 3)))
            if p.diagnostics and p.backend == "dense":
                rec.update(trace_q2=cov.trace_n(), eigvec_residual=approx_eigvec_residual(cov))
            sigma = sigma + step
            iterates.append(sigma.copy())
        records.append(rec)
        if progress is not None:
            progress(rec)
    trunc = truncate(sigma)
    final = round_bernoulli(trunc, rng.stream(p.seed, rng.ROUNDING))
    return PhaTrajectory(
        iterates=iterates,
        records=records,
        sigma_final=final,
        energy=hamiltonian(inst, final) / n,
        energy_truncated=hamiltonian(inst, trunc) / n,
        params=p,
    )


def taylor_diagnostics(traj: PhaTrajectory, o: Objective) -> list[dict]:
    """Per-step decomposition of obj(t_{k+1}, sigma_{k+1}) - obj(t_k, sigma_k).

    Keys: ``gradient`` <grad obj, d>, ``hessian`` (1/2) <d, Hess d> - beta^2 eta
    sum v, ``remainder_bound`` (2/gamma^2) sum |d_i|^3 / 6, ``remainder`` the
    actual third-order part of the Lambda sum, ``time`` the change of obj in t
    at sigma_{k+1}, ``gamma_term`` n beta^2 gamma eta, and ``total``.
    """
    beta, de, inst = o.beta, o.de, o.inst
    eta = traj.params.eta
    out = []
    for k in range(traj.K):
        t, t1 = traj.records[k]["t"], traj.records[k + 1]["t"]
        s0, s1 = traj.iterates[k], traj.iterates[k + 1]
        d = s1 - s0
        lam0 = de.eval_lambda(t, s0)
        lam1 = de.eval_lambda(t, s1)
        grad = 2 * beta * (inst.A_sym @ s0) - lam0.d1
        hq = 2 * beta * (d @ (inst.A_sym @ d)) - float(np.sum(lam0.d2 * d * d))
        v = 1.0 / lam0.d2
        remainder = float(np.sum(lam1.value - lam0.value - lam0.d1 * d - 0.5 * lam0.d2 * d * d))
        obj0 = eval_obj(o, t, s0)
        obj_mid = eval_obj(o, t, s1)
        obj1 = eval_obj(o, t1, s1)
        out.append({
            "k": k,
            "gradient": float(grad @ d),
            "hessian": 0.5 * hq - beta**2 * eta * float(v.sum()),
            "remainder_bound": 2.0 / de.gamma**2 * float(np.sum(np.abs(d) ** 3)) / 6.0
            if de.gamma > 0 else math.inf,
            "remainder": remainder,
            "time": obj1 - obj_mid,
            "gamma_term": inst.n * beta**2 * de.gamma * eta,
            "total": obj1 - obj0,
        })
    return out
