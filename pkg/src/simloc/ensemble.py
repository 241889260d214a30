"""Disorder-ensemble estimates of eigenstate moments and the density of states.

Each realization is diagonalized independently; per-realization results are
reduced in realization-index order, so the output does not depend on how
many worker threads were used.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .eigensolve import EigenDecomposition, eigh_symmetric
from .errors import EmptyWindowError, InvalidInputError
from .model import (
    HoppingMatrix,
    ModelParams,
    assemble_hamiltonian,
    build_simplex_hopping,
    sample_disorder,
)

__all__ = [
    "DEFAULT_WINDOW_FACTOR",
    "EnergyWindow",
    "MomentEstimate",
    "DosHistogram",
    "EnsembleResult",
    "ipr",
    "select_states",
    "run_ensemble",
    "estimate_dos0",
]

DEFAULT_WINDOW_FACTOR = 0.05
NORM_TOL = 1e-10
MAX_BINS_PER_SIDE = 5000


@dataclass(frozen=True)
class EnergyWindow:
    center: float = 0.0
    half_width: float = 1.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise InvalidInputError(f"window half-width must be positive, got {self.half_width}")

    @classmethod
    def for_disorder(cls, w: float, window_factor: float = DEFAULT_WINDOW_FACTOR,
                     center: float = 0.0) -> "EnergyWindow":
        """Default policy: half-width ``window_factor * w``."""
        if not 0 < window_factor <= 0.5:
            raise InvalidInputError(f"window_factor must lie in (0, 0.5], got {window_factor}")
        return cls(center, window_factor * w)

    def contains(self, energies: np.ndarray) -> np.ndarray:
        return np.abs(np.asarray(energies) - self.center) <= self.half_width


@dataclass(frozen=True)
class MomentEstimate:
    q: float
    w: float
    n: int
    estimate: float
    std_error: float
    states_used: int
    realizations: int
    window: EnergyWindow
    # ratio-estimator error with realizations as clusters; states of one
    # realization are correlated, so this exceeds std_error
    cluster_std_error: float = math.nan


@dataclass(frozen=True, eq=False)
class DosHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    total_levels: int

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def density(self) -> np.ndarray:
        return self.counts / (self.total_levels * np.diff(self.bin_edges))

    @property
    def std_error(self) -> np.ndarray:
        return np.sqrt(self.counts) / (self.total_levels * np.diff(self.bin_edges))


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Moments (one per q), the DOS histogram and the raw per-state moments."""

    moments: list[MomentEstimate]
    dos: DosHistogram
    state_iprs: np.ndarray = field(repr=False)

    def __iter__(self):
        # allows ``moments, dos = run_ensemble(...)``
        yield self.moments
        yield self.dos


def _validate_q(q: float) -> float:
    q = float(q)
    if not q >= 1 or not math.isfinite(q):
        raise InvalidInputError(f"moment order must satisfy q >= 1, got {q}")
    return q


def ipr(state, q: float) -> float:
    """Generalized inverse participation ratio sum_n |f(n)|**(2q) of a unit vector.

    Computed as ``sum p**q / (sum p)**q`` with ``p = |f|**2``; for a unit
    vector this is the plain moment, and ``q = 1`` gives exactly 1.
    """
    q = _validate_q(q)
    f = np.asarray(state, dtype=float)
    p = f * f
    norm = p.sum()
    if abs(math.sqrt(norm) - 1.0) > NORM_TOL:
        raise InvalidInputError(f"state is not normalized (norm {math.sqrt(norm)!r})")
    return float(np.sum(p**q) / norm**q)


def _iprs(vectors: np.ndarray, q_values: np.ndarray) -> np.ndarray:
    """Per-state moments, shape (n_states, n_q), columns of ``vectors`` are states."""
    p = vectors * vectors
    norm = p.sum(axis=0)
    out = np.empty((vectors.shape[1], q_values.size))
    for j, q in enumerate(q_values):
        out[:, j] = np.sum(p**q, axis=0) / norm**q
    return out


def select_states(decomp: EigenDecomposition, window: EnergyWindow) -> list[tuple[float, np.ndarray]]:
    """Eigenpairs with ``|lambda - center| <= half_width``, ascending in lambda."""
    idx = np.flatnonzero(window.contains(decomp.eigenvalues))
    return [(float(decomp.eigenvalues[k]), decomp.eigenvectors[:, k]) for k in idx]


def dos_bin_edges(window: EnergyWindow, w: float, hopping_scale: float = 1.0) -> np.ndarray:
    """Bins of width 2*half_width with the central bin equal to the window."""
    eta = window.half_width
    reach = 6.0 * w + 1.5 * max(hopping_scale, 1.0)
    k = min(int(math.ceil(reach / (2 * eta))), MAX_BINS_PER_SIDE)
    j = np.arange(-k - 1, k + 1)
    return window.center + eta * (2 * j + 1)


def _realization(params: ModelParams, hopping: HoppingMatrix, index: int,
                 q_values: np.ndarray, window: EnergyWindow, edges: np.ndarray):
    v = sample_disorder(params, index)
    decomp = eigh_symmetric(assemble_hamiltonian(hopping, v))
    sel = window.contains(decomp.eigenvalues)
    iprs = _iprs(decomp.eigenvectors[:, sel], q_values)
    counts, _ = np.histogram(decomp.eigenvalues, bins=edges)
    return iprs, counts


def default_threads() -> int:
    env = os.environ.get("SIMLOC_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_ensemble(
    params: ModelParams,
    realizations: int,
    q_values,
    window_factor: float = DEFAULT_WINDOW_FACTOR,
    *,
    hopping: HoppingMatrix | None = None,
    window: EnergyWindow | None = None,
    threads: int | None = None,
    first_realization: int = 0,
) -> EnsembleResult:
    """Monte Carlo moments at ``params.energy`` and the density of states.

    The moment for each ``q`` is the mean per-state IPR over every
    eigenstate inside the window across all realizations; the standard error
    treats those states as independent.  ``hopping`` defaults to the simplex;
    ``window`` overrides the ``window_factor * w`` policy.
    """
    if realizations < 1:
        raise InvalidInputError("need at least one realization")
    q_arr = np.array([_validate_q(q) for q in q_values], dtype=float)
    if q_arr.size == 0:
        raise InvalidInputError("q_values must not be empty")
    if hopping is None:
        hopping = build_simplex_hopping(params.n)
    elif hopping.n != params.n:
        raise InvalidInputError(f"hopping size {hopping.n} does not match n={params.n}")
    if window is None:
        window = EnergyWindow.for_disorder(params.w, window_factor, params.energy)
    edges = dos_bin_edges(window, params.w, float(np.max(np.abs(hopping.entries)) * hopping.n))
    threads = threads or default_threads()
    indices = range(first_realization, first_realization + realizations)

    def work(k):
        return _realization(params, hopping, k, q_arr, window, edges)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, indices))
    else:
        results = [work(k) for k in indices]

    per_state = np.concatenate([r[0] for r in results], axis=0)
    counts = np.zeros(edges.size - 1, dtype=np.int64)
    for r in results:
        counts += r[1]
    hist = DosHistogram(edges, counts, params.n * realizations)
    m = per_state.shape[0]
    if m == 0:
        raise EmptyWindowError(
            f"no eigenstates within {window.half_width:g} of E={window.center:g} in "
            f"{realizations} realizations; increase window_factor or the number of realizations"
        )
    sizes = np.array([r[0].shape[0] for r in results], dtype=float)
    sums = np.array([r[0].sum(axis=0) if r[0].size else np.zeros(q_arr.size) for r in results])
    moments = []
    for j, q in enumerate(q_arr):
        col = per_state[:, j]
        mean = float(np.sum(col) / m)
        if m > 1:
            se = float(np.std(col, ddof=1) / math.sqrt(m))
        else:
            # one state carries no spread information unless the moment is trivial
            se = 0.0 if q == 1.0 else math.inf
        if realizations > 1:
            resid = sums[:, j] - mean * sizes
            cse = math.sqrt(realizations / (realizations - 1) * float(np.sum(resid**2))) / m
        else:
            cse = 0.0 if q == 1.0 else math.inf
        moments.append(MomentEstimate(float(q), params.w, params.n, mean, se, m, realizations,
                                      window, cse))
    return EnsembleResult(moments, hist, per_state)


def estimate_dos0(hist: DosHistogram, window: EnergyWindow) -> tuple[float, float]:
    """Level density inside ``window`` with its Poisson standard error.

    Counts the bins lying inside the window; with bins built by
    :func:`dos_bin_edges` for the same window this is exactly the window.
    """
    edges = hist.bin_edges
    lo, hi = window.center - window.half_width, window.center + window.half_width
    slack = 1e-9 * window.half_width
    inside = (edges[:-1] >= lo - slack) & (edges[1:] <= hi + slack)
    if not inside.any():
        raise EmptyWindowError("no histogram bin lies inside the window")
    count = int(hist.counts[inside].sum())
    if count == 0:
        raise EmptyWindowError("no levels inside the window")
    width = float(np.sum(np.diff(edges)[inside]))
    norm = hist.total_levels * width
    return count / norm, math.sqrt(count) / norm
