"""Hopping matrices, Gaussian disorder and Hamiltonian assembly.

Disorder is reproducible realization by realization: realization ``k`` of a
run with master seed ``s`` draws from a Philox stream keyed by
``substream_seed(s, k)``, so any subset of realizations can be generated in
any order (or in parallel) with identical results.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import InvalidDimensionError, InvalidInputError

__all__ = [
    "ModelParams",
    "HoppingMatrix",
    "DisorderRealization",
    "Hamiltonian",
    "build_simplex_hopping",
    "build_hopping",
    "build_uniform_hopping",
    "splitmix64",
    "substream_seed",
    "sample_disorder",
    "assemble_hamiltonian",
]

MASK64 = (1 << 64) - 1
MAX_N = 4096


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ModelParams:
    n: int
    w: float
    energy: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidDimensionError(f"lattice size must be an integer >= 2, got {self.n}")
        if self.n > MAX_N:
            raise InvalidDimensionError(f"lattice size above {MAX_N} is not supported")
        if not np.isfinite(self.w) or self.w <= 0:
            raise InvalidInputError(f"disorder strength must be positive, got {self.w}")
        if not 0 <= int(self.seed) <= MASK64:
            raise InvalidInputError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True, eq=False)
class HoppingMatrix:
    n: int
    entries: np.ndarray
    zero_diagonal: bool


@dataclass(frozen=True, eq=False)
class DisorderRealization:
    values: np.ndarray
    realization_index: int
    substream_seed: int


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    n: int
    entries: np.ndarray


def build_simplex_hopping(n: int) -> HoppingMatrix:
    """All-to-all hopping 1/n, diagonal included."""
    if int(n) != n or n < 2:
        raise InvalidDimensionError(f"simplex needs n >= 2, got {n}")
    if n > MAX_N:
        raise InvalidDimensionError(f"lattice size above {MAX_N} is not supported")
    return HoppingMatrix(int(n), _frozen(np.full((n, n), 1.0 / n)), False)


def build_hopping(entries) -> HoppingMatrix:
    """Wrap an arbitrary real symmetric matrix."""
    a = np.asarray(entries, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
        raise InvalidDimensionError(f"hopping matrix must be square with n >= 2, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("hopping matrix has non-finite entries")
    if not np.array_equal(a, a.T):
        raise InvalidInputError("hopping matrix must be exactly symmetric")
    return HoppingMatrix(a.shape[0], _frozen(a), bool(np.all(np.diag(a) == 0.0)))


def build_uniform_hopping(n: int, tau: float) -> HoppingMatrix:
    """Zero-diagonal hopping with every off-diagonal entry equal to ``tau``."""
    if int(n) != n or n < 2:
        raise InvalidDimensionError(f"need n >= 2, got {n}")
    a = np.full((n, n), float(tau))
    np.fill_diagonal(a, 0.0)
    return HoppingMatrix(int(n), _frozen(a), True)


def splitmix64(x: int) -> int:
    """One step of the SplitMix64 output function."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def substream_seed(seed: int, realization_index: int) -> int:
    """Key for realization ``realization_index``: splitmix64(seed ^ splitmix64(index))."""
    if realization_index < 0:
        raise InvalidInputError("realization index must be non-negative")
    return splitmix64((int(seed) & MASK64) ^ splitmix64(int(realization_index)))


def standard_normals(key: int, size: int) -> np.ndarray:
    """``size`` N(0, 1) draws by inversion of 53-bit uniforms from Philox(key)."""
    gen = np.random.Generator(np.random.Philox(key=key))
    k = gen.integers(0, 1 << 53, size=size, dtype=np.uint64)
    u = (k.astype(float) + 0.5) * 2.0**-53
    return ndtri(u)


def sample_disorder(params: ModelParams, realization_index: int) -> DisorderRealization:
    key = substream_seed(params.seed, realization_index)
    values = params.w * standard_normals(key, params.n)
    return DisorderRealization(_frozen(values), int(realization_index), key)


def assemble_hamiltonian(t: HoppingMatrix, v: DisorderRealization) -> Hamiltonian:
    """H = T + diag(v)."""
    if v.values.shape != (t.n,):
        raise InvalidDimensionError(
            f"disorder vector of length {v.values.shape[0]} does not match hopping size {t.n}"
        )
    h = np.array(t.entries, dtype=float, copy=True)
    h[np.diag_indices(t.n)] += v.values
    return Hamiltonian(t.n, _frozen(h))
