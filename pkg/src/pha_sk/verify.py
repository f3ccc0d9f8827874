"""Invariant and oracle checks shared by ``pha-sk verify`` and the acceptance tests.

Every check returns a :class:`Check`. ``passed`` is None for purely
informational rows. Expensive intermediates (PDE solutions, PHA runs, SDE
ensembles) are memoized on a :class:`Context` so several checks can share
them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .baselines import brute_force_max, naive_max, random_signs_scale
from .instance import hamiltonian, sample_instance
from .legendre import DualEntropy, terminal_entropy
from .parisi import (
    ParisiMeasure,
    bundled_measure,
    gaussian_expectation,
    hopf_cole_atomic,
    log2cosh,
    minimize_measure,
    sde_derivative_oracle,
    solve_pde,
)
from .pha import PhaParams, default_steps, round_bernoulli, rounding_threshold, run_pha, truncate
from .potential import Objective
from .sde import frsb_identities, gamma_closeness_check, simulate_primal, wasserstein2_1d
from .spectral import approx_eigvec_residual, build_covariance, diag_error, free_edge


@dataclass
class Check:
    name: str
    passed: bool | None
    value: float
    threshold: float
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "INFO" if self.passed is None else ("PASS" if self.passed else "FAIL")
        return f"{tag} {self.name}: value={self.value:.6g} threshold={self.threshold:.6g}"

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "threshold": self.threshold, "seconds": round(self.seconds, 3), "detail": self.detail}


def _timed(fn):
    def wrapper(*args, **kw):
        t0 = time.perf_counter()
        c = fn(*args, **kw)
        c.seconds = time.perf_counter() - t0
        return c
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


class Context:
    """Memo of measures, PDE solutions, dual entropies and PHA runs."""

    def __init__(self, eta: float = 0.01, delta: float = 1.0 / 22.0):
        self.eta = eta
        self.delta = delta
        self._mu: dict = {}
        self._sol: dict = {}
        self._runs: dict = {}
        self._ens: dict = {}

    def measure(self, beta: float) -> ParisiMeasure:
        if beta not in self._mu:
            self._mu[beta] = bundled_measure(beta) or minimize_measure(beta)
        return self._mu[beta]

    def solution(self, beta: float):
        if beta not in self._sol:
            self._sol[beta] = solve_pde(self.measure(beta), beta)
        return self._sol[beta]

    def dual(self, beta: float, gamma: float) -> DualEntropy:
        return DualEntropy(self.solution(beta), gamma)

    def run(self, n: int, seed: int, beta: float = 2.0, gamma: float = 1e-3):
        key = (n, seed, beta, gamma)
        if key not in self._runs:
            inst = sample_instance(n, seed)
            o = Objective(inst, self.dual(beta, gamma), self.measure(beta), beta)
            p = PhaParams(beta=beta, eta=self.eta, delta=self.delta, gamma=gamma, seed=seed)
            self._runs[key] = (inst, o, run_pha(inst, o, p))
        return self._runs[key]

    def primal_ensemble(self, beta: float, gamma: float, paths: int, dt: float = 5e-4, seed: int = 0):
        """Primal paths recorded at every ascent time t_k = k eta up to K eta."""
        key = (beta, gamma, paths, dt, seed)
        if key not in self._ens:
            K = default_steps(self.measure(beta).q_star, self.eta)
            every = int(round(self.eta / dt))
            self._ens[key] = simulate_primal(self.dual(beta, gamma), beta, dt, K * self.eta, paths, seed,
                                             record_every=every)
        return self._ens[key]


# ---------------------------------------------------------------------------
# PDE and dual entropy


@_timed
def check_terminal_entropy(ctx: Context, tol: float = 1e-8, tol_edge: float = 1e-6) -> Check:
    """Lambda(1, 0) = -log 2 and Lambda(1, +-0.999) against the closed form."""
    de = DualEntropy(solve_pde(ParisiMeasure.delta0(), 1.0), 0.0)
    v0 = float(de.eval_lambda(1.0, np.zeros(1)).value[0])
    e0 = abs(v0 + math.log(2.0))
    y = np.array([-0.999, 0.999])
    e1 = float(np.max(np.abs(de.eval_lambda(1.0, y).value - terminal_entropy(y))))
    return Check("terminal entropy", e0 <= tol and e1 <= tol_edge, max(e0, e1), tol,
                 {"err_origin": e0, "err_edge": e1, "tol_edge": tol_edge})


@_timed
def check_pde_closed_forms(ctx: Context, beta: float = 1.0, tol: float = 1e-3, xmax: float = 6.0) -> Check:
    errs = {}
    sol = solve_pde(ParisiMeasure.delta0(), beta)
    m = np.abs(sol.x_grid) <= xmax
    x = sol.x_grid[m]
    exact = log2cosh(x)[None, :] + beta**2 * (1.0 - sol.t_grid)[:, None]
    errs["delta0"] = float(np.max(np.abs(sol.phi[:, m] - exact)))
    sol = solve_pde(ParisiMeasure.delta1(), beta)
    rows = np.linspace(0, sol.t_grid.size - 1, 41).astype(int)
    err = 0.0
    for i in rows:
        sd = math.sqrt(2 * beta**2 * (1.0 - sol.t_grid[i]))
        ref = gaussian_expectation(log2cosh, x, sd, order=80)
        err = max(err, float(np.max(np.abs(sol.phi[i, m] - ref))))
    errs["delta1"] = err
    worst = max(errs.values())
    return Check("PDE vs closed forms", worst <= tol, worst, tol, errs)


@_timed
def check_hopf_cole(ctx: Context, beta: float = 1.0, tol: float = 2e-3,
                    atoms=((0.5, 0.3), (1.0, 1.0))) -> Check:
    mu = ParisiMeasure.from_atoms(atoms)
    sol = solve_pde(mu, beta)
    rows = []
    for t0 in (0.0, 0.5):
        for x in (0.0, 1.0, 3.0):
            hc = float(hopf_cole_atomic(atoms, beta, t0, np.array([x]))[0])
            pde = float(sol(t0, np.array([x]))[0])
            rows.append((t0, x, pde, hc))
    worst = max(abs(p - h) for *_, p, h in rows)
    return Check("PDE vs Hopf-Cole", worst <= tol, worst, tol, {"rows": rows})


@_timed
def check_sde_derivative(ctx: Context, paths: int = 100_000, dt: float = 5e-4, seed: int = 0) -> Check:
    beta, mu = 1.0, ParisiMeasure.delta1()
    sol = solve_pde(mu, beta)
    est, se = sde_derivative_oracle(sol, mu, 0.5, 1.0, paths, seed, dt)
    ref = float(sol.dx_phi(0.5, np.array([1.0]))[0])
    return Check("SDE derivative oracle", abs(est - ref) <= 3 * se, abs(est - ref), 3 * se,
                 {"estimate": est, "se": se, "pde": ref, "paths": paths})


@_timed
def check_lambda_bounds(ctx: Context, betas=(1.0, 2.0), gammas=(1e-2, 1e-3), points: int = 50,
                        slack: float = 1e-9, lip_slack: float = 0.10) -> Check:
    """Second/third derivative bounds and finite-difference Lipschitz checks for v."""
    ts = np.linspace(0.0, 0.98, points)
    ys = np.linspace(-1.2, 1.2, points)
    worst = {"d2": 0.0, "d3": 0.0, "dv_dy": 0.0, "dv_dt": 0.0}
    viol = {k: 0 for k in worst}
    hy, ht = 1e-4, 1e-3
    for beta in betas:
        for gamma in gammas:
            de = ctx.dual(beta, gamma)
            for t in ts:
                lv = de.eval_lambda(t, ys)
                lo, hi = 1.0 / (1.0 + gamma), 1.0 / gamma
                ex2 = np.maximum(lo - lv.d2, lv.d2 - hi)
                ex3 = np.abs(lv.d3) - 2.0 / gamma**2
                dvy = np.abs(de.eval_v(t, ys + hy) - de.eval_v(t, ys - hy)) / (2 * hy)
                dvt = np.abs(de.eval_v(t + ht, ys) - de.eval_v(max(t - ht, 0.0), ys)) / (t + ht - max(t - ht, 0.0))
                for k, arr, cap in (("d2", ex2, slack), ("d3", ex3, slack),
                                    ("dv_dy", dvy - 2.0 * (1 + lip_slack), 0.0),
                                    ("dv_dt", dvt - 14 * beta**2 * (1 + lip_slack), 0.0)):
                    viol[k] += int(np.sum(arr > cap))
                worst["d2"] = max(worst["d2"], float(ex2.max()))
                worst["d3"] = max(worst["d3"], float(ex3.max()))
                worst["dv_dy"] = max(worst["dv_dy"], float(dvy.max()) / 2.0)
                worst["dv_dt"] = max(worst["dv_dt"], float(dvt.max()) / (14 * beta**2))
    total = sum(viol.values())
    return Check("Lambda_gamma derivative bounds", total == 0, float(total), 0.0,
                 {"violations": viol, "worst": worst})


# ---------------------------------------------------------------------------
# spectral


@_timed
def check_free_edge(ctx: Context, n: int = 2000, seeds=range(10), beta: float = 1.0, tol: float = 0.15,
                    rate: float = 0.9) -> Check:
    gaps = []
    for s in seeds:
        inst = sample_instance(n, s)
        D = rng.stream(s, rng.BENCH, 1).uniform(0.5, 2.0, n)
        lam = float(np.linalg.eigvalsh(2 * beta * inst.A_sym - np.diag(D))[-1])
        gaps.append(lam - free_edge(D, beta))
    ok = float(np.mean(np.abs(gaps) <= tol))
    return Check("free-convolution edge", ok >= rate, ok, rate, {"gaps": gaps, "n": n, "tol": tol})


def covariance_at_mid_run(ctx: Context, n: int, seed: int = 0, beta: float = 2.0, gamma: float = 1e-3):
    inst, o, traj = ctx.run(n, seed, beta, gamma)
    k = traj.K // 2
    t = traj.records[k]["t"]
    cov = build_covariance(inst, o.de, t, traj.iterates[k], beta, ctx.delta)
    return cov, k, t


@_timed
def check_covariance_diagnostics(ctx: Context, ns=(500, 1000, 2000), seed: int = 0, beta: float = 2.0,
                                 trace_tol: float = 0.1) -> Check:
    tr, de, res = [], [], []
    for n in ns:
        cov, k, t = covariance_at_mid_run(ctx, n, seed, beta)
        tr.append(cov.trace_n())
        de.append(diag_error(cov))
        res.append(approx_eigvec_residual(cov))
    dec = lambda v: all(b < a for a, b in zip(v, v[1:]))  # noqa: E731
    flags = {"trace": abs(tr[-1] - 1.0) <= trace_tol, "diag_decreasing": dec(de), "residual_decreasing": dec(res)}
    return Check("covariance diagnostics", all(flags.values()), abs(tr[-1] - 1.0), trace_tol,
                 {"n": list(ns), "trace": tr, "diag_error": de, "eigvec_residual": res, "flags": flags,
                  "t": t, "k": k})


# ---------------------------------------------------------------------------
# SDE


@_timed
def check_frsb_identities(ctx: Context, beta: float = 2.0, gamma: float = 1e-3, paths: int = 100_000,
                          dt: float = 5e-4, fractions=(0.1, 0.5, 0.9), seed: int = 0) -> Check:
    """Simulate Y^gamma; the identities are evaluated with the unregularized v = 1 / Lambda''."""
    mu = ctx.measure(beta)
    times = [round(f * mu.q_star / dt) * dt for f in fractions]
    de = ctx.dual(beta, gamma)
    ens = simulate_primal(de, beta, dt, times[-1], paths, seed, record_every=10**9, record_times=times)
    rows = frsb_identities(de.with_gamma(0.0), ens, mu, times)
    ok = [r.within(dt) for r in rows]
    worst = max(abs(r.estimate - r.target) / (3 * r.se + 2 * dt) for r in rows)
    return Check(f"fRSB identities (gamma={gamma:g})", all(ok), worst, 1.0,
                 {"rows": [(r.t, r.name, r.estimate, r.se, r.target, w) for r, w in zip(rows, ok)]})


@_timed
def check_gamma_closeness(ctx: Context, beta: float = 1.0, gamma: float = 1e-3, t: float = 0.5,
                          paths: int = 100_000, dt: float = 5e-4, seed: int = 0) -> Check:
    rep = gamma_closeness_check(ctx.dual(beta, gamma), beta, gamma, dt, paths, T=t, seed=seed)
    i = int(np.argmin(np.abs(rep.t - t)))
    d, se, b = float(rep.distance[i]), float(rep.se[i]), float(rep.bound[i])
    return Check("gamma closeness", d <= b + 3 * se, d, b + 3 * se, {"distance": d, "se": se, "bound": b})


@_timed
def check_convergence_trend(ctx: Context, ns=(500, 1000, 2000), seeds=(0, 1, 2), beta: float = 2.0,
                            gamma: float = 1e-3, paths: int = 100_000) -> Check:
    ens = ctx.primal_ensemble(beta, gamma, paths)
    means = []
    per = {}
    for n in ns:
        vals = []
        for s in seeds:
            _, _, traj = ctx.run(n, s, beta, gamma)
            vals.append(max(wasserstein2_1d(sig, ens.at(r["t"])) for sig, r in zip(traj.iterates, traj.records)))
        per[n] = vals
        means.append(float(np.mean(vals)))
    ok = all(b < a for a, b in zip(means, means[1:]))
    return Check("W2 convergence trend", ok, means[-1], means[0], {"n": list(ns), "mean_max_w2": means, "runs": per})


# ---------------------------------------------------------------------------
# rounding and end-to-end


@_timed
def check_rounding(ctx: Context, n: int = 500, roundings: int = 200, alpha: float = 0.25, seed: int = 0,
                   max_rate: float = 0.05) -> Check:
    inst, _, traj = ctx.run(n, seed)
    sigma = truncate(traj.iterates[-1])
    h = hamiltonian(inst, sigma)
    thr = rounding_threshold(inst, alpha)
    losses = np.array([h - hamiltonian(inst, round_bernoulli(sigma, rng.stream(seed, rng.ROUNDING, 1, r)))
                       for r in range(roundings)])
    rate = float(np.mean(losses > thr))
    return Check("rounding bound", rate <= max_rate, rate, max_rate,
                 {"threshold": thr, "mean_loss": float(losses.mean()), "max_loss": float(losses.max())})


@_timed
def check_end_to_end(ctx: Context, n: int = 2000, seeds=range(5), beta: float = 2.0, gamma: float = 1e-3,
                     factor: float = 5.0, rel: float = 0.25) -> Check:
    energies, base = [], []
    for s in seeds:
        inst, _, traj = ctx.run(n, s, beta, gamma)
        energies.append(traj.energy)
        base.append(random_signs_scale(inst, s))
    e, b = float(np.mean(energies)), float(np.mean(base))
    target = ctx.measure(beta).energy(beta)
    gap = abs(e - target) / target
    flags = {"beats_random": e >= factor * b, "near_target": gap <= rel}
    return Check("end-to-end energy", all(flags.values()), gap, rel,
                 {"energy": e, "energies": energies, "random_rms": b, "target": target, "flags": flags})


@_timed
def check_exhaustive(ctx: Context, n: int = 18, seeds=range(5), beta: float = 2.0) -> Check:
    agree, ratios = True, []
    for s in seeds:
        inst = sample_instance(n, s)
        _, best = brute_force_max(inst)
        _, naive = naive_max(inst)
        agree &= abs(best - naive) <= 1e-10 * max(1.0, abs(naive))
        _, _, traj = ctx.run(n, s, beta)
        ratios.append(traj.energy / best)
    ok = agree and min(ratios) > 0
    return Check("exhaustive oracle", ok, min(ratios), 0.0, {"agree": agree, "ratios": ratios})


# ---------------------------------------------------------------------------
# suites


def fast_suite(ctx: Context) -> list:
    """Scaled-down checks; a few minutes on one core."""
    return [
        lambda: check_terminal_entropy(ctx),
        lambda: check_pde_closed_forms(ctx),
        lambda: check_hopf_cole(ctx),
        lambda: check_sde_derivative(ctx, paths=20_000),
        lambda: check_lambda_bounds(ctx, betas=(1.0,), points=20),
        lambda: check_free_edge(ctx, n=1000, seeds=range(5)),
        lambda: check_frsb_identities(ctx, beta=1.0, paths=20_000),
        lambda: check_gamma_closeness(ctx, paths=20_000),
        lambda: check_rounding(ctx, n=300),
        lambda: check_exhaustive(ctx),
    ]


def full_suite(ctx: Context) -> list:
    return [
        lambda: check_terminal_entropy(ctx),
        lambda: check_pde_closed_forms(ctx),
        lambda: check_hopf_cole(ctx),
        lambda: check_sde_derivative(ctx),
        lambda: check_free_edge(ctx),
        lambda: check_covariance_diagnostics(ctx),
        lambda: check_lambda_bounds(ctx),
        lambda: check_frsb_identities(ctx),
        lambda: check_gamma_closeness(ctx),
        lambda: check_convergence_trend(ctx),
        lambda: check_rounding(ctx),
        lambda: check_end_to_end(ctx),
        lambda: check_exhaustive(ctx),
    ]


def run_suite(name: str, ctx: Context | None = None, report=None) -> list:
    ctx = ctx or Context()
    suite = {"fast": fast_suite, "full": full_suite}[name](ctx)
    out = []
    for job in suite:
        c = job()
        out.append(c)
        if report is not None:
            report(c)
    return out
