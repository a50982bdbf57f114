"""Reproducible sampling of square matrices with i.i.d. subgaussian entries.

Every matrix is a pure function of ``(dist, n, master_seed, trial_index)``:
the per-trial stream is a PCG64 generator seeded from a ``SeedSequence``
built on the pair ``(master_seed, trial_index)``, so trials can be produced
in any order, on any number of workers, with identical results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DimensionError, ParameterError

KINDS = ("gaussian", "rademacher", "uniform")

_SQRT3 = math.sqrt(3.0)
_SEED_MASK = (1 << 64) - 1


@lru_cache(maxsize=None)
def _uniform_bound():
    # P{|xi| >= t} = 1 - t/sqrt3 on [0, sqrt3]; with u = t/sqrt3 the definition
    # needs K^2 >= 3u^2 / (2 (1 - log(1 - u))) for all u in [0, 1).
    res = minimize_scalar(
        lambda u: -3.0 * u * u / (2.0 * (1.0 - math.log1p(-u))),
        bounds=(0.0, 1.0 - 1e-15),
        method="bounded",
        options={"xatol": 1e-14},
    )
    return math.sqrt(-res.fun)


_BOUNDS = {
    "gaussian": lambda: 1.0,
    "rademacher": lambda: 1.0 / math.sqrt(2.0),
    "uniform": _uniform_bound,
}


def subgaussian_bound(dist):
    """Smallest K with ``P{|xi| >= t} <= exp(1 - t^2 / (2 K^2))`` for all t >= 0.

    Accepts an :class:`EntryDistribution` or a law name.
    """
    kind = dist.kind if isinstance(dist, EntryDistribution) else str(dist)
    try:
        return _BOUNDS[kind]()
    except KeyError:
        raise ParameterError(f"unknown entry law {kind!r}; expected one of {KINDS}") from None


def tail_probability(kind, t):
    """Exact ``P{|xi| >= t}`` for a catalog law (used to check K)."""
    t = float(t)
    if t <= 0:
        return 1.0
    if kind == "gaussian":
        return math.erfc(t / math.sqrt(2.0))
    if kind == "rademacher":
        return 1.0 if t <= 1.0 else 0.0
    if kind == "uniform":
        return max(0.0, 1.0 - t / _SQRT3)
    raise ParameterError(f"unknown entry law {kind!r}")


@dataclass(frozen=True)
class EntryDistribution:
    """A centred, unit-variance subgaussian entry law."""

    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown entry law {self.kind!r}; expected one of {KINDS}")

    @property
    def K(self):
        return subgaussian_bound(self)

    def draw(self, rng, size):
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "rademacher":
            return rng.integers(0, 2, size=size).astype(np.float64) * 2.0 - 1.0
        return rng.uniform(-_SQRT3, _SQRT3, size=size)


def as_distribution(dist):
    return dist if isinstance(dist, EntryDistribution) else EntryDistribution(str(dist))


@dataclass(frozen=True, eq=False)
class MatrixSample:
    n: int
    entries: np.ndarray = field(repr=False)
    seed_trace: tuple

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def trial_rng(master_seed, trial_index):
    """Independent generator for one trial; the splitting rule is fixed."""
    if trial_index < 0:
        raise ParameterError("trial_index must be nonnegative")
    ss = np.random.SeedSequence([int(master_seed) & _SEED_MASK, int(trial_index)])
    return np.random.Generator(np.random.PCG64(ss))


def sample_matrix(dist, n, master_seed, trial_index=0):
    if n < 1:
        raise ParameterError("n must be >= 1")
    dist = as_distribution(dist)
    rng = trial_rng(master_seed, trial_index)
    entries = dist.draw(rng, (n, n))
    return MatrixSample(n=n, entries=entries, seed_trace=(int(master_seed), int(trial_index)))


def sample_vectors(dist, n, count, master_seed, trial_index):
    """``count`` i.i.d. vectors in R^n as the columns of an n x count array."""
    return as_distribution(dist).draw(trial_rng(master_seed, trial_index), (n, count))


# -- matrix text format: "n" then n lines of n comma-separated values ---------

def format_matrix(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    lines = [str(a.shape[0])]
    # repr of a Python float is the shortest string that round-trips exactly
    lines += [",".join(repr(float(x)) for x in row) for row in a]
    return "\n".join(lines) + "\n"


def parse_matrix(text):
    rows = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not rows:
        raise DimensionError("empty matrix text")
    try:
        n = int(rows[0])
    except ValueError:
        raise DimensionError(f"first line must be the dimension, got {rows[0]!r}") from None
    if len(rows) - 1 != n:
        raise DimensionError(f"expected {n} rows, found {len(rows) - 1}")
    cells = [r.split(",") for r in rows[1:]]
    if any(len(c) != n for c in cells):
        raise DimensionError(f"every row must hold {n} comma-separated values")
    return np.array([[float(x) for x in c] for c in cells])


def read_matrix(path):
    return parse_matrix(Path(path).read_text())


def write_matrix(path, a):
    Path(path).write_text(format_matrix(a))
