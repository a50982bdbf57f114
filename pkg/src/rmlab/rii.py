"""Restricted invertibility: column subsets on which a matrix is well invertible.

For a nonzero n x n matrix T and eps in (0, 1) there is a column subset J
of size ``floor(eps^2 ||T||_HS^2 / ||T||^2)`` with
``s_|J|(T_J) >= (1 - eps) ||T||_HS / sqrt(n)``.

:func:`select_invertible_subset` finds one with a deterministic lower-barrier
greedy: columns are added one at a time while a barrier ``b`` starts at
``(1 - eps) ||T||_HS^2 / n`` and drops by ``(1 - eps) ||T||^2 / (eps n)`` per
step, so after ``ell`` steps it sits exactly at the squared target bound.
A column is admissible when adding it pushes a new eigenvalue of
``sum_{j in J} t_j t_j^T`` above the lowered barrier; among admissible columns
the one that keeps the barrier potential ``tr (A - bI)^-1`` smallest wins.
Every result is re-certified from scratch by an SVD of ``T_J``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import GuardError, NoCertificateError, ParameterError, UndefinedRatioError
from .spectra import as_square

SLACK = 1e-9
EXHAUSTIVE_MAX_N = 12
ORACLE_MAX_N = 20
_CHUNK = 4096


@dataclass(frozen=True)
class SubsetCertificate:
    J: tuple
    ell: int
    eps: float
    required_size: int
    required_bound: float
    achieved: float
    method: str = "barrier"

    @property
    def degenerate(self):
        return self.ell == 0

    def csv_line(self):
        j = ";".join(str(i) for i in self.J)
        return (
            f"{self.eps!r},{self.ell},{self.required_size},"
            f"{self.required_bound!r},{self.achieved!r},{j}"
        )


def _norms(t):
    fro2 = float(np.sum(t * t))
    if fro2 == 0.0:
        raise UndefinedRatioError("undefined ratio ||T||_HS^2/||T||^2: T is the zero matrix")
    op = float(np.linalg.norm(t, 2))
    return fro2, op


def required_size(fro2, op, eps):
    # the ratio is exactly integral for frames such as Z(A, k); absorb rounding
    return int(math.floor(eps * eps * fro2 / (op * op) * (1.0 + 1e-12)))


def required_bound(fro2, n, eps):
    return (1.0 - eps) * math.sqrt(fro2) / math.sqrt(n)


def smallest_singular_value(cols):
    """s_ell of an n x ell matrix (its ell-th and last singular value)."""
    if cols.shape[1] == 0:
        return math.inf
    return float(np.linalg.svd(cols, compute_uv=False)[-1])


def _barrier_select(t, eps, ell, fro2, op):
    n = t.shape[1]
    b = (1.0 - eps) * fro2 / n
    delta = (1.0 - eps) * op * op / (eps * n)
    a = np.zeros((t.shape[0], t.shape[0]))
    chosen = []
    for _ in range(ell):
        b_next = b - delta
        lam, q = np.linalg.eigh(a)
        shifted = lam - b_next
        w = q.T @ t
        inv1 = np.sum(w * w / shifted[:, None], axis=0)
        inv2 = np.sum(w * w / (shifted * shifted)[:, None], axis=0)
        gain = -1.0 - inv1
        potential = np.full(n, np.inf)
        ok = gain > 0
        ok[chosen] = False
        # tr (M + u u^T)^-1 = tr M^-1 - u^T M^-2 u / (1 + u^T M^-1 u)
        potential[ok] = np.sum(1.0 / shifted) + inv2[ok] / gain[ok]
        if not ok.any():
            break
        i = int(np.argmin(potential))  # lowest index on ties
        chosen.append(i)
        a += np.outer(t[:, i], t[:, i])
        b = b_next
    return sorted(chosen)


def select_invertible_subset(T, eps):
    """Column subset J certifying restricted invertibility of T at level eps.

    Raises :class:`UndefinedRatioError` for the zero matrix and
    :class:`NoCertificateError` (carrying the best attempt) when neither the
    greedy pass nor, for n <= 12, exhaustive search certifies the bound.
    """
    t = as_square(T)
    if not 0.0 < eps < 1.0:
        raise ParameterError(f"eps must lie in (0, 1), got {eps}")
    n = t.shape[0]
    fro2, op = _norms(t)
    ell = required_size(fro2, op, eps)
    bound = required_bound(fro2, n, eps)
    if ell == 0:
        return SubsetCertificate((), 0, eps, 0, bound, math.inf, "degenerate")

    J = _barrier_select(t, eps, ell, fro2, op)
    best = None
    if len(J) == ell:
        achieved = smallest_singular_value(t[:, J])
        best = SubsetCertificate(tuple(J), ell, eps, ell, bound, achieved, "barrier")
        if achieved >= bound * (1.0 - SLACK):
            return best
    if n <= EXHAUSTIVE_MAX_N:
        J, value = brute_force_subset_oracle(t, ell)
        cand = SubsetCertificate(tuple(J), ell, eps, ell, bound, value, "exhaustive")
        if value >= bound * (1.0 - SLACK):
            return cand
        best = cand
    raise NoCertificateError(
        f"no certificate found for eps={eps}: need s_{ell}(T_J) >= {bound:.6g}", best=best
    )


def verify_certificate(T, cert):
    """Recompute norms and ``s_ell(T_J)`` from T and check both certificate claims."""
    t = as_square(T)
    n = t.shape[0]
    J = list(cert.J)
    if any(not 0 <= j < n for j in J):
        raise ParameterError(f"certificate index out of range for n={n}: {J}")
    if len(set(J)) != len(J) or len(J) != cert.ell:
        return False
    fro2, op = _norms(t)
    need = required_size(fro2, op, cert.eps)
    bound = required_bound(fro2, n, cert.eps)
    if cert.ell < need:
        return False
    achieved = smallest_singular_value(t[:, J])
    if not math.isinf(cert.achieved) and cert.achieved > achieved * (1.0 + SLACK):
        return False
    if cert.ell == 0:
        return True
    return achieved >= bound * (1.0 - SLACK)


def subset_singular_values(t, subsets):
    """``s_ell(t[:, J])`` for each row J of an integer array of subsets."""
    subsets = np.asarray(subsets, dtype=np.intp)
    out = np.empty(len(subsets))
    for start in range(0, len(subsets), _CHUNK):
        block = subsets[start:start + _CHUNK]
        mats = np.transpose(t[:, block], (1, 0, 2))
        out[start:start + _CHUNK] = np.linalg.svd(mats, compute_uv=False)[:, -1]
    return out


def iter_subsets(n, ell):
    return np.array(list(combinations(range(n), ell)), dtype=np.intp).reshape(-1, ell)


def brute_force_subset_oracle(T, ell):
    """Exhaustive maximum of ``s_ell(T_J)`` over ``|J| = ell``.

    Returns the lexicographically smallest maximizer and the maximum.
    """
    t = as_square(T)
    n = t.shape[0]
    if n > ORACLE_MAX_N:
        raise GuardError(f"brute-force oracle limited to n <= {ORACLE_MAX_N}, got n={n}")
    if not 1 <= ell <= n:
        raise ParameterError(f"ell must satisfy 1 <= ell <= n, got {ell}")
    subsets = iter_subsets(n, ell)
    values = subset_singular_values(t, subsets)
    i = int(np.argmax(values))  # first maximum = lexicographically smallest
    return tuple(int(j) for j in subsets[i]), float(values[i])

