"""Comparison baselines: random signs, top eigenvector rounding, exhaustive search."""

from __future__ import annotations

import math

import numpy as np

from . import rng
from .instance import SkInstance, hamiltonian

BRUTE_FORCE_MAX_N = 22


def random_signs(inst: SkInstance, seed: int, draws: int = 1) -> np.ndarray:
    """H(sigma)/n for ``draws`` uniform sign vectors."""
    gen = rng.stream(seed, rng.BENCH, 0)
    S = gen.choice([-1.0, 1.0], size=(draws, inst.n))
    return np.einsum("ij,ij->i", S @ inst.A, S) / inst.n


def random_signs_scale(inst: SkInstance, seed: int, draws: int = 200) -> float:
    """Root-mean-square of H(sigma)/n over random signs (the mean itself is tr(A)/n ~ 0)."""
    e = random_signs(inst, seed, draws)
    return float(np.sqrt(np.mean(e * e)))


def baseline_top_eigvec(inst: SkInstance) -> tuple[np.ndarray, float]:
    """Signs of the leading eigenvector of A_sym; zero coordinates go to +1."""
    _, vecs = np.linalg.eigh(inst.A_sym)
    v = vecs[:, -1]
    sigma = np.where(v >= 0, 1.0, -1.0)
    return sigma, hamiltonian(inst, sigma) / inst.n


def brute_force_max(inst: SkInstance) -> tuple[np.ndarray, float]:
    """Exhaustive maximum of H(sigma)/n over the cube.

    Walks the Gray code with sigma_0 pinned to +1 (H is even), updating
    the local fields A_sym sigma in O(n) per flip.
    """
    n = inst.n
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force refused for n = {n} > {BRUTE_FORCE_MAX_N}")
    S = np.array(inst.A_sym)
    sigma = np.ones(n)
    field = S @ sigma
    h = float(sigma @ field)
    best, best_sigma = h, sigma.copy()
    for k in range(1, 2 ** (n - 1)):
        j = (k & -k).bit_length()  # flip coordinate j (1..n-1) of the Gray code
        s = sigma[j]
        # H(sigma') - H(sigma) = -4 s (field_j - S_jj s)
        h -= 4.0 * s * (field[j] - S[j, j] * s)
        field -= 2.0 * s * S[:, j]
        sigma[j] = -s
        if h > best:
            best, best_sigma = h, sigma.copy()
    # re-evaluate to shed the round-off accumulated by the incremental updates
    return best_sigma, hamiltonian(inst, best_sigma) / n


def naive_max(inst: SkInstance, chunk: int = 4096) -> tuple[np.ndarray, float]:
    """Direct evaluation of sigma^T A sigma for all 2^n sign vectors, in chunks."""
    n = inst.n
    if n > 20:
        raise ValueError("naive enumeration is limited to n <= 20")
    bits = np.arange(n)
    best, arg = -math.inf, None
    for start in range(0, 2**n, chunk):
        idx = np.arange(start, min(start + chunk, 2**n))
        S = 1.0 - 2.0 * ((idx[:, None] >> bits) & 1)
        h = np.einsum("ij,ij->i", S @ inst.A, S)
        i = int(np.argmax(h))
        if h[i] > best:
            best, arg = float(h[i]), S[i].copy()
    return arg, best / n
