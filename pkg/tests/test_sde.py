import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pha_sk.instance import sample_instance
from pha_sk.legendre import DualEntropy
from pha_sk.parisi import ParisiMeasure, minimize_measure, solve_pde
from pha_sk.pha import PhaParams, run_pha
from pha_sk.potential import Objective
from pha_sk.sde import (
    convergence_report,
    dual_to_primal,
    ensemble_summary,
    entropy_along_process,
    frsb_identities,
    gamma_closeness_check,
    simulate_dual,
    simulate_primal,
    wasserstein2_1d,
)

DT = 5e-4


def _w2_brute(a, b):
    return min(math.sqrt(np.mean((np.asarray(a) - np.asarray(p)) ** 2)) for p in itertools.permutations(b))


def test_w2_examples():
    x = np.array([0.3, -1.0, 2.0])
    assert wasserstein2_1d(x, x[::-1]) == 0.0
    assert wasserstein2_1d([1.5], [-0.5]) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        wasserstein2_1d([], [1.0])


@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4), st.lists(st.floats(-10, 10), min_size=4, max_size=4))
def test_w2_matches_all_pairings(a, b):
    assert wasserstein2_1d(a, b) == pytest.approx(_w2_brute(a, b), abs=1e-9)


def test_w2_unequal_sizes():
    # {0, 1} vs {0, 0.5, 1}: quantile pieces of width 1/3, 1/6, 1/6, 1/3
    assert wasserstein2_1d([0.0, 1.0], [0.0, 0.5, 1.0]) == pytest.approx(math.sqrt(0.5**2 / 6 + 0.5**2 / 6))
    a = np.array([0.1, 0.7, -0.4])
    assert wasserstein2_1d(a, np.repeat(a, 3)) == pytest.approx(0.0, abs=1e-15)


@pytest.fixture(scope="module")
def primal1(de1, mu1):
    """beta = 1, gamma = 0 ensemble to q*, recorded every step."""
    de = de1.with_gamma(0.0)
    T = round(mu1.q_star / DT) * DT
    return de, simulate_primal(de, 1.0, DT, T, 20_000, 0)


def test_primal_start_and_symmetry(primal1):
    _, ens = primal1
    assert not ens.values[0].any()
    for Y in ens.values[[100, 400, -1]]:
        assert abs(Y.mean()) <= 3 * Y.std(ddof=1) / math.sqrt(Y.size)


def test_gamma_zero_stays_in_cube(primal1):
    _, ens = primal1
    assert ens.clamped == 0
    assert np.max(np.abs(ens.values)) <= 1.0


def test_ito_isometry(primal1):
    de, ens = primal1
    Y = ens.values[-1]
    ev2 = [np.mean(de.eval_v(t, y) ** 2) for t, y in zip(ens.t_grid[:-1], ens.values[:-1])]
    predicted = 2.0 * DT * float(np.sum(ev2))
    se = (Y * Y).std(ddof=1) / math.sqrt(Y.size)
    assert abs(np.mean(Y * Y) - predicted) <= 3 * se + 2 * DT


def test_identities_beta1(primal1, mu1):
    de, ens = primal1
    q = mu1.q_star
    times = [round(f * q / DT) * DT for f in (0.1, 0.5, 0.9)]
    rows = frsb_identities(de, ens, mu1, times)
    assert len(rows) == 9
    assert all(r.within(DT) for r in rows)


def test_entropy_identity(de2, mu2):
    de = de2.with_gamma(0.0)
    T = round(mu2.q_star / DT) * DT
    ens = simulate_primal(de, 2.0, DT, T, 20_000, 0, record_every=10**9)
    rep = entropy_along_process(de, ens, mu2)
    assert rep.target == pytest.approx(2.0 * mu2.energy(2.0))
    assert abs(rep.estimate - rep.target) <= 3 * rep.se + 2 * DT


def test_entropy_degenerate():
    mu = ParisiMeasure.delta1()
    de = DualEntropy(solve_pde(mu, 0.0), 0.0)
    ens = simulate_primal(de, 0.0, 0.01, 1.0, 50, 0, record_every=100)
    rep = entropy_along_process(de, ens, mu)
    assert rep.target == 0.0 and rep.estimate == pytest.approx(0.0, abs=1e-12)


def test_dual_without_drift_is_brownian():
    beta, T = 1.3, 0.6
    mu = ParisiMeasure.delta1()
    ens = simulate_dual(solve_pde(mu, beta), mu, beta, 0.01, T, 40_000, 0, record_every=10)
    X = ens.at(T)
    var, target = X.var(ddof=1), 2 * beta**2 * T
    assert abs(var - target) <= 3 * target * math.sqrt(2 / (X.size - 1))


def test_dual_maps_to_primal(sol1, mu1, de1, primal1):
    t = round(mu1.q_star / 2 / DT) * DT
    dual = simulate_dual(sol1, mu1, 1.0, DT, t, 20_000, 0, record_every=10**9)
    mapped = dual_to_primal(sol1, dual)
    _, ref = primal1
    other = simulate_primal(de1.with_gamma(0.0), 1.0, DT, t, 20_000, 1, record_every=10**9)
    noise = wasserstein2_1d(other.at(t), ref.at(t))
    assert wasserstein2_1d(mapped.at(t), ref.at(t)) <= 3 * (noise + DT)


def test_simulators_validate(de2, sol1, mu2):
    with pytest.raises(ValueError):
        simulate_primal(de2, 1.0, DT, 0.1, 10, 0)
    with pytest.raises(ValueError):
        simulate_primal(de2, 2.0, 0.003, 0.01, 10, 0)
    with pytest.raises(ValueError):
        simulate_dual(sol1, mu2, 1.0, DT, 0.1, 10, 0)


def test_record_times_and_lookup(de2):
    ens = simulate_primal(de2, 2.0, 0.01, 0.5, 100, 3, record_every=10, record_times=[0.37])
    assert np.allclose(ens.t_grid, [0.0, 0.1, 0.2, 0.3, 0.37, 0.4, 0.5])
    assert ens.paths.shape == (100, 7)
    with pytest.raises(ValueError):
        ens.at(0.33)


def test_gamma_closeness(de1):
    zero = gamma_closeness_check(de1, 1.0, 0.0, DT, 2000, T=0.2)
    assert np.all(zero.distance == 0)
    rep = gamma_closeness_check(de1, 1.0, 1e-3, DT, 10_000, T=0.5)
    i = int(np.argmin(np.abs(rep.t - 0.5)))
    assert rep.distance[i] <= rep.bound[i] + 3 * rep.se[i]
    assert rep.bound[i] == pytest.approx(math.sqrt(2) * 1e-3 * math.sqrt(math.expm1(5.0)))
    assert rep.distance[i] >= rep.distance[1] - 3 * rep.se[i]


def test_convergence_report(sol2, mu2, de2):
    inst = sample_instance(100, 0)
    o = Objective(inst, de2, mu2, 2.0)
    traj = run_pha(inst, o, PhaParams(beta=2.0, K=10, diagnostics=False))
    ens = simulate_primal(de2, 2.0, DT, 0.1, 2000, 0, record_every=20)
    rows = convergence_report(traj, ens)
    assert len(rows) == 11 and rows[0] == (0, 0.0, 0.0)
    assert all(w > 0 for _, _, w in rows[1:])
    with pytest.raises(ValueError):
        convergence_report(traj, simulate_primal(de2.with_gamma(1e-2), 2.0, DT, 0.1, 10, 0, record_every=20))


def test_ensemble_summary(de2):
    ens = simulate_primal(de2, 2.0, 0.01, 0.2, 500, 0, record_every=10)
    rows = ensemble_summary(de2, ens)
    assert [r["t"] for r in rows] == pytest.approx([0.0, 0.1, 0.2])
    assert rows[0]["E_Y2"] == 0.0 and rows[0]["q0.5"] == 0.0
    assert all(r["q0.05"] <= r["q0.5"] <= r["q0.95"] for r in rows)


@pytest.mark.slow
@pytest.mark.filterwarnings("ignore::pha_sk.parisi.MeasureConvergenceWarning")
def test_energy_increases_with_beta():
    # one coarse grid for all three, so the comparison is like for like
    e = [minimize_measure(b, m=40, n_t=500, n_x=801, gtol=1e-3).energy(b) for b in (1.0, 1.5, 2.0)]
    assert e[0] < e[1] < e[2]
