"""Parisi measures, the backward Parisi PDE, and its oracles.

The PDE is

    d/dt Phi = -beta^2 (Phi_xx + F(t) Phi_x^2),    Phi(1, x) = log(2 cosh x),

with ``F`` the right-continuous CDF of a probability measure on [0, 1]. It
is integrated backward from t = 1 by Strang splitting: half a step of the
Hamilton-Jacobi term ``F Phi_x^2`` (explicit SSP-RK3, centered differences),
a Crank-Nicolson diffusion step, and another half step. The spatial domain is
[-L, L] with Neumann data Phi_x = -1, +1 at the two ends; beyond the grid Phi
is continued linearly with slope +-1.

Two independent oracles live here as well: the Hopf-Cole recursion for
atomic measures and an Euler-Maruyama estimate of Phi_x through the dual SDE.
"""

from __future__ import annotations

import json
import math
from importlib import resources
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.optimize import isotonic_regression
from scipy.special import logsumexp

from . import rng

LOG2 = math.log(2.0)


class PDEStabilityError(RuntimeError):
    """The explicit nonlinear sub-step violates its CFL bound."""


class QuadratureError(RuntimeError):
    """Gauss-Hermite order too low for the requested tolerance."""


class MeasureConvergenceWarning(RuntimeWarning):
    pass


def log2cosh(x):
    """log(2 cosh x), overflow-free."""
    return np.logaddexp(x, -x)


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True, eq=False)
class ParisiMeasure:
    """Step CDF: ``F(s) = cdf[i]`` for ``s`` in ``[grid[i], grid[i+1])``, ``F(1) = 1``."""

    grid: np.ndarray
    cdf: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64).copy()
        cdf = np.asarray(self.cdf, dtype=np.float64).copy()
        if grid.ndim != 1 or grid.shape != cdf.shape or grid.size < 2:
            raise ValueError("grid and cdf must be 1-D arrays of equal length >= 2")
        if grid[0] != 0.0 or grid[-1] != 1.0 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must increase strictly from 0 to 1")
        if np.any(np.diff(cdf) < 0):
            raise ValueError("cdf must be nondecreasing")
        if cdf[0] < 0 or cdf[-1] != 1.0:
            raise ValueError("cdf must lie in [0, 1] and end at 1")
        grid.setflags(write=False)
        cdf.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "cdf", cdf)

    @classmethod
    def delta0(cls) -> "ParisiMeasure":
        """Replica-symmetric point mass at 0 (F = 1)."""
        return cls([0.0, 1.0], [1.0, 1.0])

    @classmethod
    def delta1(cls) -> "ParisiMeasure":
        """Point mass at 1 (F = 0 on [0, 1))."""
        return cls([0.0, 1.0], [0.0, 1.0])

    @classmethod
    def from_atoms(cls, atoms) -> "ParisiMeasure":
        """Atomic measure from ``[(t_j, zeta_j)]`` with ``zeta_j = mu([0, t_j])``.

        A final atom at t = 1 with zeta = 1 is implied if absent.
        """
        ts, zs = _check_atoms(atoms)
        grid = np.unique(np.concatenate([[0.0, 1.0], ts]))
        idx = np.searchsorted(ts, grid, side="right") - 1
        cdf = np.where(idx >= 0, zs[np.maximum(idx, 0)], 0.0)
        cdf[-1] = 1.0
        return cls(grid, cdf)

    @classmethod
    def parse(cls, text: str) -> "ParisiMeasure":
        """``"atoms:t1:z1,t2:z2,..."`` or a path to a two-column CSV (t, F)."""
        if text.startswith("atoms:"):
            atoms = []
            for item in text[len("atoms:") :].split(","):
                t, z = item.split(":")
                atoms.append((float(t), float(z)))
            return cls.from_atoms(atoms)
        data = np.loadtxt(text, delimiter=",", ndmin=2)
        return cls(data[:, 0], data[:, 1])

    def F(self, t):
        """Right-continuous CDF value(s)."""
        idx = np.searchsorted(self.grid, t, side="right") - 1
        return self.cdf[np.clip(idx, 0, self.grid.size - 1)]

    @property
    def q_star(self) -> float:
        return float(self.grid[np.argmax(self.cdf >= 1.0)])

    def _cells(self, a: float, b: float):
        lo = np.clip(self.grid[:-1], a, b)
        hi = np.clip(self.grid[1:], a, b)
        return lo, hi, self.cdf[:-1]

    def integral_F(self, a: float = 0.0, b: float = 1.0) -> float:
        lo, hi, c = self._cells(a, b)
        return float(np.sum(c * (hi - lo)))

    def integral_tF(self, a: float = 0.0, b: float = 1.0) -> float:
        """Exact integral of s F(s) over [a, b] for the step function."""
        lo, hi, c = self._cells(a, b)
        return float(np.sum(c * (hi**2 - lo**2)) / 2)

    def double_integral(self) -> float:
        """int_0^{q*} int_t^1 F(s) ds dt = int_0^1 F(s) min(s, q*) ds."""
        q = self.q_star
        return self.integral_tF(0.0, q) + q * self.integral_F(q, 1.0)

    def energy(self, beta: float) -> float:
        """Energy target 2 beta int_0^{q*} int_t^1 F."""
        return 2.0 * beta * self.double_integral()

    def same_as(self, other: "ParisiMeasure") -> bool:
        return np.array_equal(self.grid, other.grid) and np.array_equal(self.cdf, other.cdf)


BUNDLED_BETAS = (1.0, 2.0)


def bundled_measure(beta: float) -> ParisiMeasure | None:
    """Precomputed minimizer (m = 100, gtol = 1e-4) shipped with the package, if any."""
    for b in BUNDLED_BETAS:
        if abs(beta - b) < 1e-12:
            ref = resources.files("pha_sk") / "data" / f"parisi_beta{int(b)}.csv"
            with resources.as_file(ref) as path:
                mu = ParisiMeasure.parse(str(path))
            mu.meta.update(beta=b, bundled=True)
            return mu
    return None


def _check_atoms(atoms):
    arr = np.asarray(atoms, dtype=np.float64).reshape(-1, 2)
    ts, zs = arr[:, 0], arr[:, 1]
    if np.any(np.diff(ts) <= 0):
        raise ValueError("atom times must be strictly increasing")
    if np.any(np.diff(zs) < 0) or np.any(zs < 0) or np.any(zs > 1):
        raise ValueError("atom cdf values must be nondecreasing in [0, 1]")
    if ts.size and (ts[0] < 0 or ts[-1] > 1):
        raise ValueError("atom times must lie in [0, 1]")
    if ts.size == 0 or ts[-1] < 1.0:
        ts = np.append(ts, 1.0)
        zs = np.append(zs, 1.0)
    elif zs[-1] != 1.0:
        raise ValueError("cdf at t = 1 must be 1")
    return ts, zs


# ---------------------------------------------------------------------------
# PDE solution


def default_half_width(beta: float, tol_tail: float = 1e-10) -> float:
    """Half-width L where the tail bound 2 e^{8 beta^2} e^{-2L} drops below tol."""
    return 4.0 * beta**2 + 0.5 * math.log(2.0 / tol_tail) + 2.0


class _Row:
    """Cubic splines of one time row: Phi from phi, Phi' from phi_x."""

    __slots__ = ("x0", "dx", "nseg", "L", "cp", "cd", "end_lo", "end_hi")

    def __init__(self, x, phi, phi_x, phi_xx):
        self.x0, self.dx, self.nseg, self.L = x[0], x[1] - x[0], x.size - 1, x[-1]
        self.cp = CubicSpline(x, phi, bc_type=((1, -1.0), (1, 1.0))).c
        self.cd = CubicSpline(x, phi_x, bc_type=((1, phi_xx[0]), (1, phi_xx[-1]))).c
        self.end_lo, self.end_hi = phi[0], phi[-1]

    def __call__(self, x, orders=(0, 1, 2, 3)):
        """Derivatives of the requested orders (0 = Phi itself) at x."""
        x = np.asarray(x, dtype=np.float64)
        i = np.clip(((x - self.x0) / self.dx).astype(np.int64), 0, self.nseg - 1)
        h = x - (self.x0 + i * self.dx)
        inside = np.abs(x) <= self.L
        out = []
        c = self.cd[:, i] if max(orders) > 0 else None
        for k in orders:
            if k == 0:
                cp = self.cp[:, i]
                v = ((cp[0] * h + cp[1]) * h + cp[2]) * h + cp[3]
                tail = np.where(x > 0, self.end_hi + x - self.L, self.end_lo - x - self.L)
                out.append(np.where(inside, v, tail))
            elif k == 1:
                v = ((c[0] * h + c[1]) * h + c[2]) * h + c[3]
                out.append(np.where(inside, v, np.sign(x)))
            elif k == 2:
                out.append(np.where(inside, (3 * c[0] * h + 2 * c[1]) * h + c[2], 0.0))
            elif k == 3:
                out.append(np.where(inside, 6 * c[0] * h + 2 * c[1], 0.0))
            else:
                raise ValueError(f"derivative order {k} not available")
        return out


class ParisiSolution:
    """Gridded Phi(t, x) with derivative arrays and off-grid evaluation."""

    def __init__(self, beta, measure, t_grid, x_grid, phi, cache_rows: int = 256):
        self.beta = float(beta)
        self.measure = measure
        self.t_grid = t_grid
        self.x_grid = x_grid
        self.dx = x_grid[1] - x_grid[0]
        self.L = x_grid[-1]
        self.phi = phi
        self.phi_x = _d1(phi, self.dx)
        self.phi_xx = _d2(phi, self.dx)
        self.phi_xxx = np.gradient(self.phi_xx, self.dx, axis=1)
        for a in (self.t_grid, self.x_grid, self.phi, self.phi_x, self.phi_xx, self.phi_xxx):
            a.setflags(write=False)
        self._rows: OrderedDict[int, _Row] = OrderedDict()
        self._cache_rows = cache_rows

    def _row(self, i: int) -> _Row:
        row = self._rows.get(i)
        if row is None:
            row = _Row(self.x_grid, self.phi[i], self.phi_x[i], self.phi_xx[i])
            self._rows[i] = row
            if len(self._rows) > self._cache_rows:
                self._rows.popitem(last=False)
        else:
            self._rows.move_to_end(i)
        return row

    def _locate(self, t: float):
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"t = {t} outside [0, 1]")
        i = int(np.searchsorted(self.t_grid, t))
        if i < self.t_grid.size and abs(self.t_grid[i] - t) <= 1e-12:
            return i, None, 0.0
        if i > 0 and abs(self.t_grid[i - 1] - t) <= 1e-12:
            return i - 1, None, 0.0
        lo, hi = self.t_grid[i - 1], self.t_grid[i]
        return i - 1, i, (t - lo) / (hi - lo)

    def derivs(self, t: float, x, orders=(0, 1, 2, 3)):
        """List of d^k Phi(t, x) for k in ``orders``; linear in t between rows."""
        i, j, w = self._locate(t)
        out = self._row(i)(x, orders)
        if j is not None:
            other = self._row(j)(x, orders)
            out = [(1 - w) * a + w * b for a, b in zip(out, other)]
        return out

    def __call__(self, t: float, x):
        return self.derivs(t, x, (0,))[0]

    def dx_phi(self, t: float, x):
        return self.derivs(t, x, (1,))[0]

    def value_at_origin(self) -> float:
        return float(self(0.0, np.array([0.0]))[0])


SOLUTION_MAGIC = b"PPS"
SOLUTION_VERSION = 1


def save_solution(sol: ParisiSolution, path) -> None:
    """64-byte JSON header, then t_grid, x_grid, measure grid, measure cdf and phi as <f8.

    Derivative arrays are recomputed on load.
    """
    mu = sol.measure
    meta = {"v": SOLUTION_VERSION, "beta": sol.beta, "nt": sol.t_grid.size, "nx": sol.x_grid.size,
            "m": mu.grid.size}
    text = json.dumps(meta, separators=(",", ":")).encode()
    if len(SOLUTION_MAGIC) + len(text) > 64:
        raise ValueError("header does not fit in 64 bytes")
    with open(path, "wb") as fh:
        fh.write(SOLUTION_MAGIC + text.ljust(64 - len(SOLUTION_MAGIC), b" "))
        for a in (sol.t_grid, sol.x_grid, mu.grid, mu.cdf, sol.phi):
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_solution(path) -> ParisiSolution:
    raw = Path(path).read_bytes()
    if len(raw) < 64 or raw[:3] != SOLUTION_MAGIC:
        raise ValueError(f"{path}: not a Parisi solution file")
    meta = json.loads(raw[3:64].decode())
    if meta.get("v") != SOLUTION_VERSION:
        raise ValueError(f"{path}: unsupported version {meta.get('v')}")
    nt, nx, m = meta["nt"], meta["nx"], meta["m"]
    data = np.frombuffer(raw[64:], dtype="<f8")
    if data.size != nt + nx + 2 * m + nt * nx:
        raise ValueError(f"{path}: payload size mismatch")
    parts = np.split(data, np.cumsum([nt, nx, m, m]))
    mu = ParisiMeasure(parts[2], parts[3])
    return ParisiSolution(meta["beta"], mu, parts[0].copy(), parts[1].copy(), parts[4].reshape(nt, nx).copy())


def _d1(phi, dx):
    out = np.empty_like(phi)
    out[:, 1:-1] = (phi[:, 2:] - phi[:, :-2]) / (2 * dx)
    # fourth order away from the edges, so Phi' matches the spline of Phi to O(dx^4)
    out[:, 2:-2] = (8 * (phi[:, 3:-1] - phi[:, 1:-3]) - (phi[:, 4:] - phi[:, :-4])) / (12 * dx)
    out[:, 0], out[:, -1] = -1.0, 1.0
    return out


def _d2(phi, dx):
    out = np.empty_like(phi)
    out[:, 1:-1] = (phi[:, 2:] - 2 * phi[:, 1:-1] + phi[:, :-2]) / dx**2
    out[:, 2:-2] = (16 * (phi[:, 3:-1] + phi[:, 1:-3]) - 30 * phi[:, 2:-2] - (phi[:, 4:] + phi[:, :-4])) / (12 * dx**2)
    # ghost nodes carry the Neumann data Phi_x = -1 (left), +1 (right)
    out[:, 0] = 2 * (phi[:, 1] - phi[:, 0] + dx) / dx**2
    out[:, -1] = 2 * (phi[:, -2] - phi[:, -1] + dx) / dx**2
    return out


def _time_grid(mu: ParisiMeasure, n_t: int) -> np.ndarray:
    t = np.union1d(np.linspace(0.0, 1.0, n_t + 1), mu.grid)
    # merge points closer than round-off so no step is degenerate
    keep = np.concatenate([[True], np.diff(t) > 1e-12])
    t = t[keep]
    t[-1] = 1.0
    return t


def _hj_rate(u, dx):
    ux = np.empty_like(u)
    ux[1:-1] = (u[2:] - u[:-2]) / (2 * dx)
    ux[0], ux[-1] = -1.0, 1.0
    return ux * ux


def _hj_step(u, c, h, dx):
    """SSP-RK3 for d_tau u = c u_x^2 over a step h."""
    u1 = u + h * c * _hj_rate(u, dx)
    u2 = 0.75 * u + 0.25 * (u1 + h * c * _hj_rate(u1, dx))
    return u / 3 + 2.0 / 3.0 * (u2 + h * c * _hj_rate(u2, dx))


def _cn_matrix(n, r):
    ab = np.empty((3, n))
    ab[0, :] = -r
    ab[1, :] = 1 + 2 * r
    ab[2, :] = -r
    ab[0, 1] = -2 * r
    ab[2, -2] = -2 * r
    return ab


def _cn_step(u, ab, r, dx):
    rhs = (1 - 2 * r) * u
    rhs[1:-1] += r * (u[2:] + u[:-2])
    rhs[0] += 2 * r * u[1] + 4 * r * dx
    rhs[-1] += 2 * r * u[-2] + 4 * r * dx
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def solve_pde(
    mu: ParisiMeasure,
    beta: float,
    n_t: int = 2000,
    n_x: int = 2001,
    L: float | None = None,
    tol_tail: float = 1e-10,
    max_cfl: float = 1.5,
) -> ParisiSolution:
    """Integrate the Parisi PDE backward from t = 1 to t = 0."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if n_x < 5 or n_t < 1:
        raise ValueError("grid too small")
    if L is None:
        L = default_half_width(beta, tol_tail)
    x = np.linspace(-L, L, n_x)
    dx = x[1] - x[0]
    t = _time_grid(mu, n_t)
    phi = np.empty((t.size, n_x))
    phi[-1] = log2cosh(x)
    b2 = beta * beta
    mats = {}
    for i in range(t.size - 2, -1, -1):
        h = t[i + 1] - t[i]
        f = float(mu.F(t[i]))
        c = b2 * f
        if c > 0 and 2 * c * (h / 2) / dx > max_cfl:
            raise PDEStabilityError(f"CFL violated at dt = {h:.3g}: 2 beta^2 F dt/(2 dx) > {max_cfl}")
        r = b2 * h / (2 * dx * dx)
        key = round(h, 15)
        if key not in mats:
            mats[key] = _cn_matrix(n_x, r)
        u = phi[i + 1]
        if c > 0:
            u = _hj_step(u, c, h / 2, dx)
        u = _cn_step(u, mats[key], r, dx)
        if c > 0:
            u = _hj_step(u, c, h / 2, dx)
        phi[i] = u
    return ParisiSolution(beta, mu, t, x, phi)


def parisi_functional(sol: ParisiSolution, mu: ParisiMeasure) -> float:
    """P(mu) = Phi(0, 0) - beta^2 int_0^1 t F(t) dt."""
    if not sol.measure.same_as(mu):
        raise ValueError("solution was computed for a different measure")
    return sol.value_at_origin() - sol.beta**2 * mu.integral_tF()


# ---------------------------------------------------------------------------
# oracles


def gaussian_expectation(f, mean, sd, order: int = 64):
    """E f(mean + sd Z) by Gauss-Hermite quadrature (broadcast over mean)."""
    z, w = hermegauss(order)
    w = w / math.sqrt(2 * math.pi)
    pts = np.asarray(mean, dtype=np.float64)[..., None] + sd * z
    return f(pts) @ w


def _hopf_cole(taus, zetas, beta, x, order):
    z, w = hermegauss(order)
    logw = np.log(w / math.sqrt(2 * math.pi))

    def level(j, xs):
        if j == len(zetas):
            return log2cosh(xs)
        s = math.sqrt(2 * beta**2 * (taus[j + 1] - taus[j]))
        vals = level(j + 1, xs[..., None] + s * z)
        zeta = zetas[j]
        if zeta < 1e-12:
            return vals @ np.exp(logw)
        return logsumexp(zeta * vals + logw, axis=-1) / zeta

    return level(0, np.asarray(x, dtype=np.float64))


def hopf_cole_atomic(atoms, beta: float, t0: float, x, order: int = 64, tol: float | None = None):
    """Phi(t0, x) for an atomic measure by the Hopf-Cole recursion.

    ``atoms`` lists ``(t_j, zeta_j)`` with ``zeta_j = mu([0, t_j])``; a final
    atom at t = 1 is implied. Over each interval ``[tau_j, tau_{j+1})`` between
    consecutive atom times after ``t0`` the recursion is

        Phi(tau_j, x) = log E exp(zeta Phi(tau_{j+1}, x + Z)) / zeta,
        Var Z = 2 beta^2 (tau_{j+1} - tau_j),

    with the plain expectation when zeta = 0. If ``tol`` is given the result
    is compared against half the quadrature order and QuadratureError is
    raised when they differ by more than ``tol``.
    """
    if not 0.0 <= t0 < 1.0:
        raise ValueError("t0 must lie in [0, 1)")
    ts, zs = _check_atoms(atoms)
    after = ts > t0
    taus = np.concatenate([[t0], ts[after]])
    idx = np.searchsorted(ts, taus[:-1], side="right") - 1
    zetas = np.where(idx >= 0, zs[np.maximum(idx, 0)], 0.0)
    if order ** len(zetas) * np.size(x) > 5e7:
        raise ValueError("too many quadrature points; lower the order or the atom count")
    val = _hopf_cole(taus, zetas, beta, x, order)
    if tol is not None:
        coarse = _hopf_cole(taus, zetas, beta, x, max(order // 2, 2))
        err = float(np.max(np.abs(val - coarse)))
        if err > tol:
            raise QuadratureError(f"order {order} misses tolerance {tol:g} (estimate {err:.2e})")
    return val


def simulate_dual_paths(sol: ParisiSolution, t0, x0, dt, paths, gen, record=None):
    """Euler-Maruyama for dX = sqrt(2) beta dW + 2 beta^2 F(t) Phi_x(t, X) dt.

    Returns ``(times, X_final, recorded)`` where ``recorded`` stacks X at the
    step indices listed in ``record`` (each an index into ``times``).
    """
    n_steps = int(round((1.0 - t0) / dt))
    if n_steps < 1:
        raise ValueError("dt too large for the remaining horizon")
    times = t0 + dt * np.arange(n_steps + 1)
    times[-1] = 1.0
    beta, mu = sol.beta, sol.measure
    X = np.full(paths, float(x0))
    keep = set(record or [])
    rec = {0: X.copy()} if 0 in keep else {}
    scale = math.sqrt(2.0) * beta
    for k in range(n_steps):
        t, h = times[k], times[k + 1] - times[k]
        f = float(mu.F(t))
        dW = gen.standard_normal(paths) * math.sqrt(h)
        if f > 0:
            X = X + 2 * beta**2 * f * sol.dx_phi(t, X) * h + scale * dW
        else:
            X = X + scale * dW
        if k + 1 in keep:
            rec[k + 1] = X.copy()
    recorded = np.stack([rec[k] for k in sorted(rec)]) if rec else None
    return times, X, recorded


def sde_derivative_oracle(sol: ParisiSolution, mu: ParisiMeasure, t0: float, x0: float,
                          paths: int, seed: int, dt: float = 5e-4):
    """Monte Carlo (estimate, standard error) of E tanh(X_1) started at X_{t0} = x0."""
    if paths < 1000:
        raise ValueError("at least 1000 paths are required")
    if not sol.measure.same_as(mu):
        raise ValueError("solution was computed for a different measure")
    gen = rng.stream(seed, rng.ORACLE_PATHS)
    _, X, _ = simulate_dual_paths(sol, t0, x0, dt, paths, gen)
    th = np.tanh(X)
    return float(th.mean()), float(th.std(ddof=1) / math.sqrt(paths))


def dual_mgf_check(sol: ParisiSolution, t0: float, x0: float, t: float, lambdas,
                   paths: int, seed: int, dt: float = 5e-4):
    """Rows (lambda, MC estimate of E exp(lambda X_t), SE, bound)."""
    gen = rng.stream(seed, rng.ORACLE_PATHS, 1)
    n_steps = int(round((t - t0) / dt))
    # run the full horizon but record at the step reaching t
    times, _, rec = simulate_dual_paths(sol, t0, x0, dt, paths, gen, record=[n_steps])
    X = rec[0]
    b2 = sol.beta**2
    rows = []
    for lam in lambdas:
        e = np.exp(lam * X)
        bound = math.exp(b2 * (2 * abs(lam) + lam * lam) * (t - t0) + lam * x0)
        rows.append((lam, float(e.mean()), float(e.std(ddof=1) / math.sqrt(paths)), bound))
    return rows


# ---------------------------------------------------------------------------
# measure minimization


def second_moment_curve(sol: ParisiSolution) -> np.ndarray:
    """E[Phi_x(t, X_t)^2] on sol.t_grid for the dual process started at X_0 = 0.

    The law of X is propagated by Crank-Nicolson on the Fokker-Planck equation
    d_t p = beta^2 p'' - (b p)',  b = 2 beta^2 F Phi_x,
    with two backward-Euler half steps at the start to damp the initial delta.
    """
    x, dx, t = sol.x_grid, sol.dx, sol.t_grid
    n = x.size
    b2 = sol.beta**2
    p = np.zeros(n)
    p[np.argmin(np.abs(x))] = 1.0 / dx
    m = np.empty(t.size)
    m[0] = np.sum(p * sol.phi_x[0] ** 2) * dx
    diff = b2 / dx**2
    for i in range(t.size - 1):
        h = t[i + 1] - t[i]
        f = float(sol.measure.F(t[i]))
        b = b2 * f * (sol.phi_x[i] + sol.phi_x[i + 1])  # 2 beta^2 F times the midpoint average
        # L p_j = diff (p_{j+1} - 2p_j + p_{j-1}) - (b_{j+1}p_{j+1} - b_{j-1}p_{j-1})/(2dx)
        sup = diff - b[1:] / (2 * dx)   # row j, column j+1
        sub = diff + b[:-1] / (2 * dx)  # row j+1, column j
        if i == 0:
            for _ in range(2):
                p = _implicit(p, sup, sub, diff, h / 2)
        else:
            rhs = (1 - h * diff) * p
            rhs[:-1] += 0.5 * h * sup * p[1:]
            rhs[1:] += 0.5 * h * sub * p[:-1]
            p = _implicit(rhs, sup, sub, diff, h / 2)
        m[i + 1] = np.sum(p * sol.phi_x[i + 1] ** 2) * dx / (np.sum(p) * dx)
    return m


def _implicit(rhs, sup, sub, diff, theta):
    n = rhs.size
    ab = np.empty((3, n))
    ab[0, 1:] = -theta * sup
    ab[1, :] = 1 + 2 * theta * diff
    ab[2, :-1] = -theta * sub
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def functional_and_gradient(mu: ParisiMeasure, beta: float, **pde_kw):
    """P(mu) and dP/dc_k for the free cell values c_k = cdf[k], k < m.

    dP/dc_k = beta^2 int_{cell k} (E[Phi_x(s, X_s)^2] - s) ds.
    """
    sol = solve_pde(mu, beta, **pde_kw)
    P = parisi_functional(sol, mu)
    m = second_moment_curve(sol)
    t = sol.t_grid
    integrand = m - t
    seg = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t)
    cell = np.searchsorted(mu.grid, t[:-1], side="right") - 1
    grad = beta**2 * np.bincount(cell, weights=seg, minlength=mu.grid.size - 1)
    return P, grad, sol


def _project(c, w):
    c = isotonic_regression(c, weights=w, increasing=True).x
    return np.clip(c, 0.0, 1.0)


def minimize_measure(
    beta: float,
    m: int = 100,
    n_t: int | None = None,
    n_x: int = 2001,
    max_iter: int = 300,
    gtol: float = 1e-4,
    init=None,
    L: float | None = None,
    verbose: bool = False,
) -> ParisiMeasure:
    """Minimize the Parisi functional over step CDFs on a uniform m-cell grid.

    Projected gradient descent on the cell values: Barzilai-Borwein trial
    steps, projection by pool-adjacent-violators onto nondecreasing vectors
    clipped to [0, 1], and Armijo backtracking so the functional decreases
    at every accepted iterate. Stops when the projected gradient map
    ``c - proj(c - G)`` (G the gradient density dP/dF) is below ``gtol`` in
    sup norm, i.e. when E[Phi_x(t, X_t)^2] - t is of order gtol / beta^2 on
    the support.
    """
    if beta <= 0 or m < 2:
        raise ValueError("need beta > 0 and m >= 2")
    if n_t is None:
        n_t = m * max(1, math.ceil(2000 / m))
    grid = np.linspace(0.0, 1.0, m + 1)
    w = np.diff(grid)
    kw = dict(n_t=n_t, n_x=n_x, L=L)

    def measure(c):
        return ParisiMeasure(grid, np.append(c, 1.0))

    c = _project(np.minimum(grid[:-1], 1.0) if init is None else np.asarray(init, float), w)
    P, g, _ = functional_and_gradient(measure(c), beta, **kw)
    alpha = 1.0
    converged = False
    history = [P]
    it = 0
    for it in range(1, max_iter + 1):
        G = g / w
        pg = float(np.max(np.abs(c - _project(c - G, w))))
        if pg <= gtol:
            converged = True
            break
        accepted = False
        for _ in range(40):
            c_new = _project(c - alpha * G, w)
            d = c_new - c
            P_new, g_new, _ = functional_and_gradient(measure(c_new), beta, **kw)
            if P_new <= P + 1e-4 * float(g @ d):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        s, y = d, g_new / w - G
        sy = float(np.sum(w * s * y))
        alpha = float(np.sum(w * s * s)) / sy if sy > 0 else 2 * alpha
        alpha = min(max(alpha, 1e-4), 1e4)
        c, P, g = c_new, P_new, g_new
        history.append(P)
        if verbose:
            print(f"iter {it}: P = {P:.12f}, step {np.max(np.abs(d)):.2e}, pg {pg:.2e}")
    if not converged:
        warnings.warn(f"measure minimization stopped after {max_iter} iterations",
                      MeasureConvergenceWarning, stacklevel=2)
    out = measure(c)
    out.meta.update(functional=P, converged=converged, iterations=it, beta=beta, gtol=gtol,
                    n_t=n_t, n_x=n_x, history=history)
    return out
