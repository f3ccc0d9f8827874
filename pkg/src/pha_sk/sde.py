"""Auffinger-Chen SDE ensembles, 1-D Wasserstein distances and identity checks.

Primal:  dY = sqrt(2) beta v(t, Y) dW,   v = 1 / Lambda_gamma''(t, .) = Phi_xx(t, x(Y)) + gamma
Dual:    dX = sqrt(2) beta dW + 2 beta^2 F(t) Phi_x(t, X) dt

Both start at 0 and are integrated by Euler-Maruyama on a fixed step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .legendre import DualEntropy
from .parisi import ParisiMeasure, ParisiSolution, simulate_dual_paths


@dataclass
class SdeEnsemble:
    """Paths recorded at ``t_grid``; ``values[r]`` holds all P paths at ``t_grid[r]``."""

    values: np.ndarray = field(repr=False)
    t_grid: np.ndarray
    beta: float
    gamma: float
    seed: int
    kind: str = "primal"
    clamped: int = 0

    @property
    def paths(self) -> np.ndarray:
        """P x (records) view."""
        return self.values.T

    def index(self, t: float, atol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.t_grid - t)))
        if abs(self.t_grid[i] - t) > atol:
            raise ValueError(f"t = {t} is not a recorded time")
        return i

    def at(self, t: float) -> np.ndarray:
        return self.values[self.index(t)]


def _steps(T, dt):
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9:
        raise ValueError("T must be a positive multiple of dt")
    return n


def _record_steps(n_steps, dt, record_every, record_times):
    keep = set(range(0, n_steps + 1, record_every))
    keep.add(n_steps)
    for t in record_times or ():
        keep.add(int(round(t / dt)))
    return sorted(k for k in keep if k <= n_steps)


def _v(de: DualEntropy, t, Y):
    if de.gamma > 0:
        return de.eval_v(t, Y)
    # gamma = 0: the diffusion coefficient is extended by 0 outside (-1, 1)
    v = np.zeros_like(Y)
    inside = np.abs(Y) < 1.0 - 1e-12
    if np.any(inside):
        v[inside] = de.eval_v(t, Y[inside])
    return v


def simulate_primal(de: DualEntropy, beta: float, dt: float, T: float, P: int, seed: int,
                    record_every: int = 1, record_times=None, noise=None) -> SdeEnsemble:
    """Euler-Maruyama for the primal SDE; with gamma = 0 paths are clamped to [-1, 1].

    ``noise`` may supply a generator to share Brownian increments between runs.
    """
    if abs(de.beta - beta) > 1e-15:
        raise ValueError("dual entropy built at a different beta")
    n_steps = _steps(T, dt)
    keep = _record_steps(n_steps, dt, record_every, record_times)
    gen = noise if noise is not None else rng.stream(seed, rng.SDE_PATHS)
    Y = np.zeros(P)
    rec = [Y.copy()] if keep[0] == 0 else []
    clamped = 0
    scale = math.sqrt(2.0) * beta * math.sqrt(dt)
    for k in range(n_steps):
        Y = Y + scale * _v(de, k * dt, Y) * gen.standard_normal(P)
        if de.gamma == 0:
            out = np.abs(Y) > 1.0
            clamped += int(out.sum())
            Y = np.clip(Y, -1.0, 1.0)
        if k + 1 in keep:
            rec.append(Y.copy())
    return SdeEnsemble(np.stack(rec), dt * np.array(keep, dtype=float), beta, de.gamma, seed,
                       kind="primal", clamped=clamped)


def simulate_dual(sol: ParisiSolution, mu: ParisiMeasure, beta: float, dt: float, T: float, P: int,
                  seed: int, record_every: int = 1, record_times=None) -> SdeEnsemble:
    if not sol.measure.same_as(mu) or abs(sol.beta - beta) > 1e-15:
        raise ValueError("solution does not match (mu, beta)")
    n_steps = _steps(T, dt)
    keep = _record_steps(n_steps, dt, record_every, record_times)
    # simulate_dual_paths runs to t = 1 on the same step grid; stop early via a truncated copy
    gen = rng.stream(seed, rng.SDE_PATHS, 1)
    X = np.zeros(P)
    rec = [X.copy()] if keep[0] == 0 else []
    scale = math.sqrt(2.0) * beta * math.sqrt(dt)
    for k in range(n_steps):
        t = k * dt
        f = float(mu.F(t))
        drift = 2 * beta**2 * f * sol.dx_phi(t, X) * dt if f > 0 else 0.0
        X = X + drift + scale * gen.standard_normal(P)
        if k + 1 in keep:
            rec.append(X.copy())
    return SdeEnsemble(np.stack(rec), dt * np.array(keep, dtype=float), beta, 0.0, seed, kind="dual")


def dual_to_primal(sol: ParisiSolution, ens: SdeEnsemble) -> SdeEnsemble:
    """Map dual paths through Y = Phi_x(t, X)."""
    vals = np.stack([sol.dx_phi(t, x) for t, x in zip(ens.t_grid, ens.values)])
    return SdeEnsemble(vals, ens.t_grid, ens.beta, 0.0, ens.seed, kind="primal-from-dual")


def wasserstein2_1d(a, b) -> float:
    """Exact W2 between two empirical measures on the line (quantile coupling)."""
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    if a.size == b.size:
        return float(np.sqrt(np.mean((a - b) ** 2)))
    # quantile functions are step functions with jumps at i/n and j/m
    u = np.union1d(np.arange(a.size + 1) / a.size, np.arange(b.size + 1) / b.size)
    mid = 0.5 * (u[1:] + u[:-1])
    qa = a[np.minimum((mid * a.size).astype(np.int64), a.size - 1)]
    qb = b[np.minimum((mid * b.size).astype(np.int64), b.size - 1)]
    return float(np.sqrt(np.sum(np.diff(u) * (qa - qb) ** 2)))


@dataclass
class ClosenessReport:
    t: np.ndarray
    distance: np.ndarray
    se: np.ndarray
    bound: np.ndarray


def gamma_closeness_check(de: DualEntropy, beta: float, gamma: float, dt: float, P: int,
                          T: float = 0.5, seed: int = 0, record_every: int | None = None) -> ClosenessReport:
    """Co-simulate Y (gamma = 0) and Y^gamma on shared noise; L2 distance vs the bound."""
    record_every = record_every or max(1, int(round(0.05 / dt)))
    base = de.with_gamma(0.0)
    reg = de.with_gamma(gamma)
    y0 = simulate_primal(base, beta, dt, T, P, seed, record_every, noise=rng.stream(seed, rng.SDE_PATHS, 2))
    y1 = simulate_primal(reg, beta, dt, T, P, seed, record_every, noise=rng.stream(seed, rng.SDE_PATHS, 2))
    sq = (y1.values - y0.values) ** 2
    msq = sq.mean(axis=1)
    dist = np.sqrt(msq)
    se_msq = sq.std(axis=1, ddof=1) / math.sqrt(P)
    with np.errstate(divide="ignore", invalid="ignore"):
        se = np.where(dist > 0, se_msq / (2 * dist), np.sqrt(se_msq))
    bound = math.sqrt(2.0) * gamma * np.sqrt(np.expm1(10 * beta**2 * y0.t_grid))
    return ClosenessReport(y0.t_grid, dist, se, bound)


def convergence_report(traj, ens: SdeEnsemble) -> list[tuple[int, float, float]]:
    """(k, t_k, W2(emp(sigma_k), law Y_{t_k})) for every recorded ascent step."""
    if abs(traj.params.beta - ens.beta) > 1e-15 or abs(traj.params.gamma - ens.gamma) > 1e-15:
        raise ValueError("trajectory and ensemble disagree on beta or gamma")
    rows = []
    for rec, sigma in zip(traj.records, traj.iterates):
        rows.append((rec["k"], rec["t"], wasserstein2_1d(sigma, ens.at(rec["t"]))))
    return rows


@dataclass
class EntropyReport:
    estimate: float
    se: float
    target: float


def entropy_along_process(de: DualEntropy, ens: SdeEnsemble, mu: ParisiMeasure) -> EntropyReport:
    """E Lambda(q*, Y_q*) - Lambda(0, 0) - beta^2 int_0^q* s F  vs  2 beta^2 int_0^q* int_s^1 F."""
    q = mu.q_star
    lam = de.eval_lambda(q, ens.at(q)).value
    lam0 = float(de.eval_lambda(0.0, np.zeros(1)).value[0])
    b2 = de.beta**2
    est = float(lam.mean()) - lam0 - b2 * mu.integral_tF(0.0, q)
    se = float(lam.std(ddof=1) / math.sqrt(lam.size))
    return EntropyReport(est, se, 2 * b2 * mu.double_integral())


@dataclass
class IdentityRow:
    t: float
    name: str
    estimate: float
    se: float
    target: float

    def within(self, dt: float) -> bool:
        return abs(self.estimate - self.target) <= 3 * self.se + 2 * dt


def frsb_identities(de: DualEntropy, ens: SdeEnsemble, mu: ParisiMeasure, times) -> list[IdentityRow]:
    """E Y_t^2 = t, E 2 beta^2 v^2 = 1, E v = int_t^1 F at each time in ``times``."""
    rows = []
    P = ens.values.shape[1]
    b2 = de.beta**2
    for t in times:
        Y = ens.at(t)
        v = _v(de, t, Y)
        for name, sample, target in (
            ("E[Y^2]", Y * Y, t),
            ("E[2 beta^2 v^2]", 2 * b2 * v * v, 1.0),
            ("E[v]", v, mu.integral_F(t, 1.0)),
        ):
            rows.append(IdentityRow(t, name, float(sample.mean()), float(sample.std(ddof=1) / math.sqrt(P)), target))
    return rows


def ensemble_summary(de: DualEntropy, ens: SdeEnsemble, quantiles=(0.05, 0.25, 0.5, 0.75, 0.95)) -> list[dict]:
    rows = []
    for t, Y in zip(ens.t_grid, ens.values):
        v = _v(de, t, Y)
        row = {"t": float(t), "E_Y2": float(np.mean(Y * Y)), "E_v": float(v.mean()), "E_v2": float(np.mean(v * v))}
        for q, val in zip(quantiles, np.quantile(Y, quantiles)):
            row[f"q{q:g}"] = float(val)
        rows.append(row)
    return rows
