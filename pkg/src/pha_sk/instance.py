"""Sherrington-Kirkpatrick instances: sampling, the Hamiltonian, persistence.

An instance is an n x n matrix ``A`` with i.i.d. N(0, 1/n) entries. The
Hamiltonian is ``H(sigma) = <sigma, A sigma>``, which only sees the symmetric
part ``A_sym = (A + A^T)/2``.

File format (``.ski``)::

    bytes 0..2    magic b"SKI"
    bytes 3..63   JSON header {"n", "seed", "version"[, "diag"]}, space padded
    bytes 64..    n*n little-endian float64, row-major
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng

MAGIC = b"SKI"
HEADER_SIZE = 64
FORMAT_VERSION = 1
DIAG_CONVENTIONS = ("iid", "goe")


class SkiError(ValueError):
    """Base class for instance file errors."""


class SkiFormatError(SkiError):
    """Bad magic bytes or unreadable header."""


class SkiTruncatedError(SkiError):
    """Payload shorter than the header promises."""


class SkiVersionError(SkiError):
    """File written by an unsupported format version."""


@dataclass(frozen=True)
class SkInstance:
    """Immutable coupling matrix plus the metadata that regenerates it."""

    n: int
    A: np.ndarray = field(repr=False)
    seed: int
    diag: str = "iid"

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        if A.shape != (self.n, self.n):
            raise ValueError(f"A has shape {A.shape}, expected ({self.n}, {self.n})")
        if not np.all(np.isfinite(A)):
            raise ValueError("A has non-finite entries")
        A = A.copy()
        A.setflags(write=False)
        sym = 0.5 * (A + A.T)
        sym.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "_sym", sym)

    @property
    def A_sym(self) -> np.ndarray:
        return self._sym

    def op_norm(self) -> float:
        """Spectral norm of ``A`` (largest singular value)."""
        return float(np.linalg.norm(self.A, 2))


def sample_instance(n: int, seed: int, diag: str = "iid") -> SkInstance:
    """Draw an instance from the ``INSTANCE`` stream of ``seed``.

    ``diag="goe"`` doubles the variance of the diagonal entries (GOE-style
    normalization of ``A_sym``); the default keeps every entry at 1/n.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if diag not in DIAG_CONVENTIONS:
        raise ValueError(f"diag must be one of {DIAG_CONVENTIONS}, got {diag!r}")
    g = rng.stream(seed, rng.INSTANCE)
    A = g.standard_normal((n, n)) / np.sqrt(n)
    if diag == "goe":
        A[np.diag_indices(n)] *= np.sqrt(2.0)
    return SkInstance(n=n, A=A, seed=int(seed), diag=diag)


def hamiltonian(inst: SkInstance, sigma) -> float:
    """H(sigma) = <sigma, A sigma>."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != (inst.n,):
        raise ValueError(f"sigma has shape {sigma.shape}, expected ({inst.n},)")
    return float(sigma @ (inst.A @ sigma))


def save_instance(inst: SkInstance, path) -> None:
    meta = {"n": inst.n, "seed": inst.seed, "version": FORMAT_VERSION}
    if inst.diag != "iid":
        meta["diag"] = inst.diag
    text = json.dumps(meta, separators=(",", ":")).encode()
    if len(MAGIC) + len(text) > HEADER_SIZE:
        raise ValueError("header does not fit in 64 bytes")
    header = MAGIC + text.ljust(HEADER_SIZE - len(MAGIC), b" ")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(inst.A, dtype="<f8").tobytes())


def load_instance(path) -> SkInstance:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE or raw[: len(MAGIC)] != MAGIC:
        raise SkiFormatError(f"{path}: not an .ski file")
    try:
        meta = json.loads(raw[len(MAGIC) : HEADER_SIZE].decode())
        n, seed, version = int(meta["n"]), int(meta["seed"]), int(meta["version"])
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise SkiFormatError(f"{path}: unreadable header") from exc
    if version != FORMAT_VERSION:
        raise SkiVersionError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    need = 8 * n * n
    payload = raw[HEADER_SIZE:]
    if len(payload) < need:
        raise SkiTruncatedError(f"{path}: payload has {len(payload)} bytes, expected {need}")
    A = np.frombuffer(payload[:need], dtype="<f8").reshape(n, n)
    return SkInstance(n=n, A=A, seed=seed, diag=meta.get("diag", "iid"))


def export_csv(inst: SkInstance, path) -> None:
    np.savetxt(path, inst.A, delimiter=",", fmt="%.17g")
