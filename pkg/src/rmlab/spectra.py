"""Exact spectral quantities of a single square matrix."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, PreconditionError

RANK_TOL = 1e-12


def as_square(m):
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    singular_values: np.ndarray
    s_min: float
    s_max: float
    kappa: float
    hs_inv_sq: float

    @property
    def n(self):
        return len(self.singular_values)

    @property
    def singular(self):
        return math.isinf(self.kappa)

    def s(self, i):
        """1-based singular value ``s_i`` in non-increasing order."""
        return float(self.singular_values[i - 1])

    def csv_line(self):
        return f"{self.n},{self.s_min!r},{self.s_max!r},{_fmt(self.kappa)},{_fmt(self.hs_inv_sq)}"


def _fmt(x):
    return "inf" if math.isinf(x) else repr(float(x))


def summary_from_singular_values(s, rank_tol=RANK_TOL):
    s = np.asarray(s, dtype=np.float64)
    s_max, s_min = float(s[0]), float(s[-1])
    if s_max == 0.0 or s_min <= rank_tol * s_max:
        kappa = hs = math.inf
    else:
        kappa = s_max / s_min
        hs = float(np.sum(s ** -2.0))
    return SpectralSummary(s, s_min, s_max, kappa, hs)


def spectral_summary(m, rank_tol=RANK_TOL):
    """Singular spectrum of a square matrix plus s_min, s_max, kappa and ||A^-1||_HS^2.

    kappa and hs_inv_sq are ``inf`` when ``s_min <= rank_tol * s_max``; the
    inverse norm is summed from the singular values, never from an explicit
    inverse.
    """
    a = as_square(m)
    return summary_from_singular_values(np.linalg.svd(a, compute_uv=False), rank_tol)


def orthonormal_basis(vectors, n=None, rank_tol=RANK_TOL):
    """Orthonormal basis (n x r) for the span of the columns of ``vectors``.

    Rank is decided by a column-pivoted QR; diagonal entries of R below
    ``rank_tol`` times the largest one are treated as dependent directions.
    """
    b = np.asarray(vectors, dtype=np.float64)
    if b.size == 0:
        if n is None:
            raise DimensionError("cannot infer dimension of an empty basis")
        return np.zeros((n, 0))
    if b.ndim == 1:
        b = b[:, None]
    q, r, _ = scipy.linalg.qr(b, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    if d.size == 0 or d[0] == 0.0:
        return np.zeros((b.shape[0], 0))
    rank = int(np.sum(d > rank_tol * d[0]))
    return q[:, :rank]


def project_out(x, q):
    """Component of x orthogonal to the orthonormal columns of q, projected twice."""
    r = x - q @ (q.T @ x)
    return r - q @ (q.T @ r)


def distance_to_span(x, basis):
    """Euclidean distance from ``x`` to the linear span of ``basis``.

    ``basis`` is a sequence of vectors (or an n x m array whose columns are
    the vectors). An empty basis spans {0}, so the distance is ``||x||``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("x must be a vector")
    n = x.shape[0]
    if isinstance(basis, np.ndarray) and basis.ndim == 2:
        b = basis
    else:
        vecs = [np.asarray(v, dtype=np.float64) for v in basis]
        if any(v.shape != (n,) for v in vecs):
            raise DimensionError("all basis vectors must match the dimension of x")
        b = np.column_stack(vecs) if vecs else np.zeros((n, 0))
    if b.shape[0] != n:
        raise DimensionError(f"basis vectors have dimension {b.shape[0]}, x has {n}")
    q = orthonormal_basis(b, n=n)
    return float(np.linalg.norm(project_out(x, q)))


def leave_one_out_distances(m):
    """Distance from each column to the span of all the other columns."""
    a = as_square(m)
    n = a.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = distance_to_span(a[:, i], np.delete(a, i, axis=1))
    return out


def negative_second_moment_residual(m):
    """Relative gap between ``sum_i d_i^-2`` and ``sum_i s_i(A^-1)^2``.

    The two sides agree exactly in exact arithmetic; d_i are the
    leave-one-out column distances.
    """
    a = as_square(m)
    summary = spectral_summary(a)
    if summary.singular:
        raise PreconditionError(
            f"negative second moment identity needs a nonsingular matrix: kappa is infinite "
            f"(s_min={summary.s_min:.3e}, s_max={summary.s_max:.3e})"
        )
    d = leave_one_out_distances(a)
    lhs = float(np.sum(d ** -2.0))
    return abs(lhs - summary.hs_inv_sq) / summary.hs_inv_sq


def frobenius_residual(m, summary=None):
    """Relative gap between ``sum s_i^2`` and the sum of squared entries."""
    a = as_square(m)
    summary = summary or spectral_summary(a)
    fro2 = float(np.sum(a * a))
    if fro2 == 0.0:
        return 0.0 if summary.s_max == 0.0 else math.inf
    return abs(float(np.sum(summary.singular_values ** 2)) - fro2) / fro2
