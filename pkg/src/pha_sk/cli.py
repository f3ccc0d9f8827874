"""Command-line front end: ``pha-sk {gen,parisi,optimize,verify,sde,bench}``.

Every run writes ``manifest.json`` into ``--out`` with the resolved
parameters, the argv that produced it, library versions and the results,
so ``pha-sk <argv from manifest>`` replays it.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .baselines import baseline_top_eigvec, random_signs_scale
from .config import ConfigError, RunConfig, resolve
from .instance import SkiError, load_instance, sample_instance, save_instance
from .legendre import DualEntropy
from .parisi import ParisiMeasure, bundled_measure, minimize_measure, parisi_functional, solve_pde
from .pha import PhaParams, default_steps, run_pha
from .potential import Objective
from .sde import ensemble_summary, frsb_identities, simulate_primal, wasserstein2_1d
from .verify import Context, run_suite


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser, *names):
    options = {
        "n": dict(type=int, help="system size"),
        "beta": dict(type=float, help="inverse temperature"),
        "eta": dict(type=float, help="ascent step size"),
        "gamma": dict(type=float, help="Legendre regularization"),
        "delta": dict(type=float, help="resolvent exponent, b = beta n^-delta"),
        "seed": dict(type=int, help="RNG seed"),
        "measure": dict(help="'atoms:t:z,...' or CSV (t, F); default: bundled or minimized"),
        "backend": dict(choices=["dense", "iterative"]),
        "m": dict(type=int, help="measure grid cells for minimization"),
        "paths": dict(type=int, help="SDE sample paths"),
        "dt": dict(type=float, help="SDE time step"),
        "seeds": dict(type=int, help="number of seeds (bench)"),
        "diag": dict(choices=["iid", "goe"], help="diagonal variance convention"),
    }
    for name in names:
        p.add_argument("--" + name.replace("_", "-"), dest=name, default=None, **options[name])
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--config", default=None, help="flat key = value config file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pha-sk", description="maximize SK energies by potential-guided Gaussian steps")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample and save an instance")
    _common(p, "n", "seed", "diag")

    p = sub.add_parser("parisi", help="minimize the Parisi functional; report P and E(beta)")
    _common(p, "beta", "m", "measure")

    p = sub.add_parser("optimize", help="run PHA end to end")
    _common(p, "n", "beta", "eta", "gamma", "delta", "seed", "measure", "backend")
    p.add_argument("--instance", default=None, help="load a .ski file instead of sampling")

    p = sub.add_parser("verify", help="run the invariant suite")
    _common(p)
    p.add_argument("--suite", choices=["fast", "full"], default=None)

    p = sub.add_parser("sde", help="primal SDE ensemble, fRSB identities and W2 to a PHA run")
    _common(p, "n", "beta", "eta", "gamma", "delta", "seed", "measure", "paths", "dt")

    p = sub.add_parser("bench", help="PHA against baselines over seeds")
    _common(p, "n", "beta", "eta", "gamma", "delta", "seed", "measure", "backend", "seeds")
    return ap


# ---------------------------------------------------------------------------


def _measure(cfg: RunConfig) -> ParisiMeasure:
    if cfg.measure:
        try:
            return ParisiMeasure.parse(cfg.measure)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read measure {cfg.measure!r}: {exc}") from exc
    mu = bundled_measure(cfg.beta)
    if mu is None:
        print(f"minimizing the Parisi functional at beta = {cfg.beta} (m = {cfg.m})", file=sys.stderr)
        mu = minimize_measure(cfg.beta, m=cfg.m)
    return mu


def _check(cfg: RunConfig):
    if cfg.n < 1:
        raise UsageError("--n must be positive")
    if cfg.beta <= 0:
        raise UsageError("--beta must be positive")
    if cfg.backend == "dense" and cfg.n > 4096:
        raise UsageError("--backend dense is limited to n <= 4096; use --backend iterative")


def _pha(cfg: RunConfig, mu, inst=None, seed=None):
    seed = cfg.seed if seed is None else seed
    inst = inst or sample_instance(cfg.n, seed, cfg.diag)
    de = DualEntropy(solve_pde(mu, cfg.beta), cfg.gamma)
    o = Objective(inst, de, mu, cfg.beta)
    p = PhaParams(beta=cfg.beta, eta=cfg.eta, delta=cfg.delta, gamma=cfg.gamma, seed=seed,
                  backend=cfg.backend, diagnostics=cfg.backend == "dense")
    return inst, o, run_pha(inst, o, p)


def cmd_gen(cfg, out, args):
    inst = sample_instance(cfg.n, cfg.seed, cfg.diag)
    path = out / "instance.ski"
    save_instance(inst, path)
    return {"instance": str(path), "op_norm": inst.op_norm()}


def cmd_parisi(cfg, out, args):
    mu = _measure(cfg)
    sol = solve_pde(mu, cfg.beta)
    P = parisi_functional(sol, mu)
    np.savetxt(out / "measure.csv", np.column_stack([mu.grid, mu.cdf]), delimiter=",", fmt="%.17g",
               header="t,F")
    return {"functional": P, "energy_target": mu.energy(cfg.beta), "q_star": mu.q_star,
            "converged": mu.meta.get("converged"), "measure_csv": str(out / "measure.csv")}


def cmd_optimize(cfg, out, args):
    mu = _measure(cfg)
    inst = None
    if args.instance:
        try:
            inst = load_instance(args.instance)
        except (OSError, SkiError) as exc:
            raise UsageError(f"cannot load instance: {exc}") from exc
        cfg.n = inst.n
        _check(cfg)
    _, _, traj = _pha(cfg, mu, inst)
    traj.to_csv(out / "trajectory.csv")
    np.save(out / "sigma.npy", traj.sigma_final)
    return {**traj.summary(), "energy_target": mu.energy(cfg.beta), "trajectory": str(out / "trajectory.csv")}


def cmd_verify(cfg, out, args):
    checks = run_suite(cfg.suite, Context(eta=cfg.eta, delta=cfg.delta), report=lambda c: print(c.line()))
    report = [c.to_dict() for c in checks]
    (out / "verify_report.json").write_text(json.dumps(report, indent=2, default=_jsonable))
    failed = [c.name for c in checks if c.passed is False]
    return {"suite": cfg.suite, "failed": failed, "checks": len(checks)}


def cmd_sde(cfg, out, args):
    mu = _measure(cfg)
    de = DualEntropy(solve_pde(mu, cfg.beta), cfg.gamma)
    K = default_steps(mu.q_star, cfg.eta)
    every = int(round(cfg.eta / cfg.dt))
    if abs(every * cfg.dt - cfg.eta) > 1e-12:
        raise UsageError("--eta must be a multiple of --dt")
    ens = simulate_primal(de, cfg.beta, cfg.dt, K * cfg.eta, cfg.paths, cfg.seed, record_every=every)
    rows = ensemble_summary(de, ens)
    _write_csv(out / "ensemble.csv", rows)
    times = [ens.t_grid[i] for i in np.linspace(1, ens.t_grid.size - 1, 3).astype(int)]
    ident = frsb_identities(de.with_gamma(0.0), ens, mu, times)
    _, _, traj = _pha(cfg, mu)
    w2 = [{"k": r["k"], "t": r["t"], "w2": wasserstein2_1d(s, ens.at(r["t"]))}
          for s, r in zip(traj.iterates, traj.records)]
    _write_csv(out / "convergence.csv", w2)
    return {"identities": [vars(r) | {"within": r.within(cfg.dt)} for r in ident],
            "max_w2": max(r["w2"] for r in w2), "pha_energy": traj.energy}


def cmd_bench(cfg, out, args):
    mu = _measure(cfg)
    rows = []
    for s in range(cfg.seed, cfg.seed + cfg.seeds):
        inst, _, traj = _pha(cfg, mu, seed=s)
        _, eig = baseline_top_eigvec(inst)
        rows.append({"seed": s, "pha": traj.energy, "pha_truncated": traj.energy_truncated,
                     "top_eigvec": eig, "random_rms": random_signs_scale(inst, s)})
        print(f"seed {s}: pha {traj.energy:.4f} eig {eig:.4f}", file=sys.stderr)
    _write_csv(out / "bench.csv", rows)
    mean = {k: float(np.mean([r[k] for r in rows])) for k in ("pha", "pha_truncated", "top_eigvec", "random_rms")}
    return {"mean": mean, "energy_target": mu.energy(cfg.beta), "rows": rows}


COMMANDS = {"gen": cmd_gen, "parisi": cmd_parisi, "optimize": cmd_optimize, "verify": cmd_verify,
            "sde": cmd_sde, "bench": cmd_bench}


def _write_csv(path, rows):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    return str(o)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(vars(args), args.config)
        if args.command in ("optimize", "bench", "sde", "gen"):
            _check(cfg)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.time()
        result = COMMANDS[args.command](cfg, out, args)
    except (UsageError, ConfigError) as exc:
        print(f"pha-sk: error: {exc}", file=sys.stderr)
        return 2
    manifest = {
        "command": args.command,
        "argv": argv,
        "config": cfg.to_dict(),
        "versions": {"pha_sk": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "seconds": round(time.time() - t0, 3),
        "result": result,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_jsonable))
    print(json.dumps({"command": args.command, **{k: v for k, v in result.items() if k != "rows"}},
                     default=_jsonable))
    if args.command == "verify" and result["failed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
