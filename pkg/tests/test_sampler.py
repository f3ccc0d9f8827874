import numpy as np
import pytest
from scipy.spatial.distance import cdist

from pha_sk import rng as rngmod
from pha_sk.instance import sample_instance
from pha_sk.krylov import KrylovBudgetError, lanczos_funm
from pha_sk.sampler import condition_estimate, sample, sample_exact, sample_iterative
from pha_sk.spectral import build_covariance


def _cov(de, n, seed, t=0.4, backend="dense"):
    inst = sample_instance(n, seed)
    s = rngmod.stream(seed, rngmod.BENCH, 3).uniform(-0.7, 0.7, n)
    return build_covariance(inst, de, t, s, 2.0, 1 / 22, backend=backend)


@pytest.fixture(scope="module")
def cov32(de2):
    return _cov(de2, 32, 1)


@pytest.fixture(scope="module")
def cov64(de2):
    return _cov(de2, 64, 2)


def test_samples_orthogonal_to_sigma(cov32):
    s = cov32.sigma
    for k in range(20):
        u = sample_exact(cov32, rngmod.stream(0, rngmod.PHA_STEP, k))
        assert abs(u @ s) <= 1e-10 * np.linalg.norm(u) * np.linalg.norm(s)
        w = sample_iterative(cov32, rngmod.stream(0, rngmod.PHA_STEP, k), tol=1e-8)
        assert abs(w @ s) <= 1e-8 * np.linalg.norm(w) * np.linalg.norm(s)


def test_empirical_variance(cov32):
    gen = rngmod.stream(3, rngmod.PHA_STEP)
    G = gen.standard_normal((10_000, 32))
    U = np.array([sample_exact(cov32, gen, g) for g in G])
    var = U.var(axis=0)
    target = cov32.diag()
    # var of a sample variance of a Gaussian: 2 sigma^4 / (N - 1)
    se = target * np.sqrt(2.0 / (U.shape[0] - 1))
    assert np.all(np.abs(var - target) <= 5 * se)
    C = np.cov(U.T)
    M = cov32.matrix()
    se_c = np.sqrt((M**2 + np.outer(np.diag(M), np.diag(M))) / U.shape[0])
    assert np.mean(np.abs(C - M) <= 4 * se_c) > 0.99


def test_seed_determinism(cov32):
    a = sample(cov32, rngmod.stream(9, rngmod.PHA_STEP, 4))
    b = sample(cov32, rngmod.stream(9, rngmod.PHA_STEP, 4))
    c = sample(cov32, rngmod.stream(9, rngmod.PHA_STEP, 5))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


@pytest.mark.parametrize("tol", [1e-4, 1e-8])
def test_iterative_matches_dense(cov64, tol):
    for k in range(5):
        g = rngmod.stream(k, rngmod.PHA_STEP).standard_normal(64)
        ref = sample_exact(cov64, None, g)
        got = sample_iterative(cov64, None, tol=tol, g=g)
        assert np.linalg.norm(got - ref) <= tol * np.linalg.norm(ref)


def test_tolerance_controls_iterations(de2):
    cov = _cov(de2, 200, 5)
    g = rngmod.stream(5, rngmod.PHA_STEP).standard_normal(200)
    ref = sample_exact(cov, None, g)
    its = {}
    for tol in (1e-2, 1e-4):
        u = sample_iterative(cov, None, tol=tol, g=g)
        its[tol] = cov.last_info.iterations
        assert np.linalg.norm(u - ref) <= tol * np.linalg.norm(ref)
    assert its[1e-4] > its[1e-2]


def test_condition_estimate_within_spectrum_bounds(cov64):
    g = rngmod.stream(1, rngmod.PHA_STEP).standard_normal(64)
    sample_iterative(cov64, None, tol=1e-10, g=g)
    kappa = condition_estimate(cov64)
    b2 = cov64.b_tilde**2
    mu = b2 + (cov64.a_tilde - cov64.evals) ** 2
    assert mu.min() >= b2 * (1 - 1e-12)
    # Ritz values sit inside the spectrum, so the estimate is capped by the bound b~^2 <= mu <= max mu
    assert mu.max() / mu.min() * (1 - 1e-8) <= kappa <= mu.max() / b2 * (1 + 1e-8)


def test_condition_estimate_needs_run(de2):
    cov = _cov(de2, 8, 0)
    with pytest.raises(RuntimeError):
        condition_estimate(cov)


def test_krylov_budget_error(cov64):
    g = rngmod.stream(2, rngmod.PHA_STEP).standard_normal(64)
    with pytest.raises(KrylovBudgetError) as exc:
        sample_iterative(cov64, None, tol=1e-14, g=g, max_iter=6)
    assert exc.value.residual > 1e-14


def test_lanczos_against_eigh():
    gen = rngmod.stream(0, rngmod.BENCH, 9)
    X = gen.standard_normal((40, 40))
    B = (X + X.T) / 2
    v = gen.standard_normal(40)
    w, U = np.linalg.eigh(B)
    f = lambda x: 1.0 / np.sqrt(1.0 + x * x)  # noqa: E731
    ref = U @ (f(w) * (U.T @ v))
    got, info = lanczos_funm(lambda x: B @ x, v, f, tol=1e-12)
    assert np.linalg.norm(got - ref) <= 1e-10 * np.linalg.norm(ref)
    assert w[0] - 1e-8 <= info.ritz_min and info.ritz_max <= w[-1] + 1e-8
    zero, info0 = lanczos_funm(lambda x: B @ x, np.zeros(40), f)
    assert not zero.any() and info0.iterations == 0


def _energy_stat(X, Y):
    return 2 * cdist(X, Y).mean() - cdist(X, X).mean() - cdist(Y, Y).mean()


def test_energy_distance_exact_vs_iterative(cov32):
    N = 300
    X = np.array([sample_exact(cov32, rngmod.stream(1, rngmod.PHA_STEP, k)) for k in range(N)])
    Y = np.array([sample_iterative(cov32, rngmod.stream(2, rngmod.PHA_STEP, k), tol=1e-6) for k in range(N)])
    stat = _energy_stat(X, Y)
    Z = np.vstack([X, Y])
    gen = rngmod.stream(0, rngmod.BENCH, 10)
    perms = 199
    null = []
    for _ in range(perms):
        idx = gen.permutation(2 * N)
        null.append(_energy_stat(Z[idx[:N]], Z[idx[N:]]))
    p = (1 + np.sum(np.array(null) >= stat)) / (perms + 1)
    assert p > 0.01


def test_exact_sampler_refuses_matrix_free(de2):
    cov = _cov(de2, 16, 0, backend="iterative")
    with pytest.raises(RuntimeError):
        sample_exact(cov, rngmod.stream(0, rngmod.PHA_STEP))
