"""The bottom singular frame Z(A, k) and the linear-algebra chain built on it.

Given A and k, Z is the k x n matrix whose i-th row is the right singular
vector for s_{n-i+1}(A). :func:`trace_chain` restricts Z to a well-invertible
column subset J (via :mod:`rmlab.rii`), forms ``B = A Z^T``, a right inverse M
of ``Z_J^T``, the projector P onto the orthogonal complement of the span of
the columns outside J, and records four inequalities:

(i)   ``||B||_HS <= c0 k^{3/2} / sqrt(n)``                  (needs the event)
(ii)  ``||M|| <= sqrt(n/k) / (1 - gamma)``
(iii) ``||P B M||_HS^2 >= sum_{i in J} dist(col_i(A), F)^2``
(iv)  at least ell/2 indices in J have
      ``dist(col_i(A), F) <= 2 c0 sqrt(ell) / ((1 - gamma) gamma^2)`` (needs the event)

The event is ``s_{n-k+1}(A) <= c0 k / sqrt(n)``. Verdicts (i) and (iv) are
implications from the event, so they are vacuously true when it fails;
the raw inequality outcomes are kept in ``ProofTrace.raw``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rii
from .errors import DegenerateTraceError, GuardError, ParameterError
from .spectra import as_square, orthonormal_basis

TIE_TOL = 1e-10
SLACK = 1e-9
COUNT_MAX_N = 30
COUNT_MAX_ELL = 4

TRACE_HEADER = "seed,trial,n,k,ell,triggered,BHS,Mnorm,sellZJ,PBMHS,num_small_dist,v1,v2,v3,v4"


@dataclass(frozen=True, eq=False)
class BottomFrame:
    k: int
    Z: np.ndarray
    source_spectrum: np.ndarray

    @property
    def rows(self):
        return list(self.Z)


def _fix_sign(v):
    j = int(np.argmax(np.abs(v)))
    return v if v[j] >= 0 else -v


def _canonical_basis(q):
    """Basis-independent orthonormal basis of span(q): pivot on the coordinate
    axis with the largest remaining projection, then order vectors by the index
    of their largest-magnitude coordinate."""
    m = q.shape[1]
    proj = q @ q.T
    vecs = []
    for _ in range(m):
        norms = np.sqrt(np.maximum(np.diag(proj), 0.0))
        j = int(np.argmax(norms > norms.max() * (1.0 - TIE_TOL)))
        v = proj[:, j] / norms[j]
        vecs.append(_fix_sign(v))
        proj = proj - np.outer(v, v)
    vecs.sort(key=lambda v: int(np.argmax(np.abs(v))))
    return np.column_stack(vecs)


def right_singular_basis(a):
    """Singular values and right singular vectors (as columns, non-increasing
    order) with tied clusters replaced by their canonical basis."""
    _, s, vt = np.linalg.svd(a)
    v = vt.T.copy()
    n = len(s)
    scale = max(float(s[0]), 1.0) if n else 1.0
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and s[stop - 1] - s[stop] <= TIE_TOL * scale:
            stop += 1
        if stop - start > 1:
            v[:, start:stop] = _canonical_basis(v[:, start:stop])
        else:
            v[:, start] = _fix_sign(v[:, start])
        start = stop
    return s, v


def bottom_frame(A, k):
    a = as_square(A)
    n = a.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must satisfy 1 <= k <= n={n}, got {k}")
    s, v = right_singular_basis(a)
    z = v[:, ::-1][:, :k].T.copy()
    return BottomFrame(k=k, Z=z, source_spectrum=s)


@dataclass(frozen=True, eq=False)
class ProofTrace:
    n: int
    k: int
    ell: int
    J: tuple
    gamma: float
    c0: float
    triggered: bool
    B_hs: float
    M_norm: float
    s_ell_ZJ: float
    PBM_hs: float
    distances: np.ndarray
    num_small_dist: int
    verdicts: tuple
    raw: dict = field(default_factory=dict)
    ell_over_n: float = 0.0
    seed_trace: tuple = (None, None)

    @property
    def sound(self):
        """Chain soundness: unconditional steps hold, and all steps hold on the event."""
        return self.verdicts[1] and self.verdicts[2] and (not self.triggered or all(self.verdicts))

    def csv_row(self):
        seed, trial = self.seed_trace
        cells = [
            "" if seed is None else seed,
            "" if trial is None else trial,
            self.n, self.k, self.ell, int(self.triggered),
            repr(self.B_hs), repr(self.M_norm), repr(self.s_ell_ZJ), repr(self.PBM_hs),
            self.num_small_dist, *(int(v) for v in self.verdicts),
        ]
        return ",".join(str(c) for c in cells)


def trace_chain(A, k, gamma=0.5, c0=0.1, seed_trace=(None, None)):
    a = as_square(A)
    n = a.shape[0]
    if not 0.0 < gamma < 1.0:
        raise ParameterError(f"gamma must lie in (0, 1), got {gamma}")
    if c0 <= 0:
        raise ParameterError(f"c0 must be positive, got {c0}")
    frame = bottom_frame(a, k)
    ell = int(math.floor(gamma * gamma * k * (1.0 + 1e-12)))
    if ell == 0:
        raise DegenerateTraceError(f"ell = floor(gamma^2 k) = 0 for k={k}, gamma={gamma}")
    z = frame.Z
    s = frame.source_spectrum
    triggered = bool(s[n - k] <= c0 * k / math.sqrt(n))

    parts = chain_matrices(a, k, gamma, frame=frame)
    b, m, q, J = parts["B"], parts["M"], parts["Q"], parts["J"]
    ell = len(J)
    p = parts["P"]
    zj = z[:, J]
    s_ell = float(np.linalg.svd(zj, compute_uv=False)[-1])
    m_norm = float(np.linalg.norm(m, 2))
    pbm = p @ b @ m
    resid = a[:, J] - q @ (q.T @ a[:, J])
    resid -= q @ (q.T @ resid)
    dist = np.linalg.norm(resid, axis=0)

    b_hs = float(np.linalg.norm(b))
    pbm_hs = float(np.linalg.norm(pbm))
    small = 2.0 * c0 * math.sqrt(ell) / ((1.0 - gamma) * gamma ** 2)
    num_small = int(np.sum(dist <= small * (1.0 + SLACK)))

    raw = {
        "i": b_hs <= c0 * k ** 1.5 / math.sqrt(n) * (1.0 + SLACK),
        "ii": m_norm <= math.sqrt(n / k) / (1.0 - gamma) * (1.0 + SLACK),
        "iii": pbm_hs ** 2 >= float(np.sum(dist ** 2)) * (1.0 - SLACK) - 1e-12 * max(b_hs, 1.0) ** 2,
        "iv": num_small >= ell / 2.0,
    }
    verdicts = (
        (not triggered) or raw["i"],
        raw["ii"],
        raw["iii"],
        (not triggered) or raw["iv"],
    )
    return ProofTrace(
        n=n, k=k, ell=ell, J=tuple(J), gamma=gamma, c0=c0, triggered=triggered,
        B_hs=b_hs, M_norm=m_norm, s_ell_ZJ=s_ell, PBM_hs=pbm_hs, distances=dist,
        num_small_dist=num_small, verdicts=verdicts, raw=raw, ell_over_n=ell / n,
        seed_trace=seed_trace,
    )


def chain_matrices(A, k, gamma=0.5, frame=None):
    """Z, B = A Z^T, J (from rii on Z padded with zero rows), M, and the
    projector P onto the orthogonal complement of the columns outside J
    (Q is an orthonormal basis of that span)."""
    a = as_square(A)
    n = a.shape[0]
    z = (frame or bottom_frame(a, k)).Z
    padded = np.zeros((n, n))
    padded[:k] = z
    J = list(rii.select_invertible_subset(padded, gamma).J)
    rest = [j for j in range(n) if j not in J]
    q = orthonormal_basis(a[:, rest], n=n)
    # minimum-norm right inverse of Z_J^T: Z_J^T M = I and ||M|| = 1/s_ell(Z_J)
    m = np.linalg.pinv(z[:, J].T)
    return {"Z": z, "B": a @ z.T, "J": J, "M": m, "Q": q, "P": np.eye(n) - q @ q.T}


def count_good_subsets(A, k, c1):
    """Number of ``J`` with ``|J| = floor(k/2)`` and ``s_{|J|}(Z_J) >= c1 sqrt(k/n)``."""
    a = as_square(A)
    n = a.shape[0]
    ell = k // 2
    if n > COUNT_MAX_N or ell > COUNT_MAX_ELL:
        raise GuardError(
            f"count_good_subsets limited to n <= {COUNT_MAX_N} and floor(k/2) <= {COUNT_MAX_ELL}"
        )
    if ell < 1:
        raise ParameterError(f"need k >= 2 so that floor(k/2) >= 1, got k={k}")
    z = bottom_frame(a, k).Z
    values = rii.subset_singular_values(z, rii.iter_subsets(n, ell))
    return int(np.sum(values >= c1 * math.sqrt(k / n)))


def frame_errors(A, frame):
    """Worst deviations of a frame from its defining properties.

    ``orthonormality``: max |Z Z^T - I|; ``prop1``: max relative gap between
    ``||A z_i||`` and ``s_{n-i+1}``; ``norms``: max of ``| ||Z|| - 1 |`` and
    ``| ||Z||_HS - sqrt(k) |``.
    """
    a = as_square(A)
    z, k, s = frame.Z, frame.k, frame.source_spectrum
    orth = float(np.max(np.abs(z @ z.T - np.eye(k))))
    az = np.linalg.norm(a @ z.T, axis=0)
    target = s[::-1][:k]
    # near-zero singular values are compared on the scale of s_max
    scale = np.maximum(target, 1e-6 * max(float(s[0]), 1e-300))
    prop1 = float(np.max(np.abs(az - target) / scale))
    norms = max(
        abs(float(np.linalg.norm(z, 2)) - 1.0),
        abs(float(np.linalg.norm(z)) - math.sqrt(k)),
    )
    return {"orthonormality": orth, "prop1": prop1, "norms": norms}


def frame_ok(errors):
    return errors["orthonormality"] <= 1e-10 and errors["prop1"] <= 1e-8 and errors["norms"] <= 1e-10
