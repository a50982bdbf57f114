"""Monte Carlo estimates of spectral tail probabilities.

One batch of trials is sampled and reduced to singular spectra once; every
grid point and every statistic is then evaluated on those shared spectra.
Trials are grouped in fixed-size blocks that are processed by a thread pool
and reassembled in block order, so the worker count never changes a result.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .ensembles import as_distribution, sample_matrix, sample_vectors
from .errors import InsufficientDataError, ParameterError

BLOCK = 512
Z95 = NormalDist().inv_cdf(0.975)

SMIN_LD = "SMIN_LD"
COND_SB = "COND_SB"
HSINV_SB = "HSINV_SB"
SK_SB = "SK_SB"
OPNORM = "OPNORM"
KINDS = (SMIN_LD, COND_SB, HSINV_SB, SK_SB, OPNORM)


@dataclass(frozen=True)
class StatisticSpec:
    """Which tail event to count.

    For ``SK_SB`` exactly one of ``k`` (grid runs over the threshold t) or
    ``threshold`` (grid runs over k) is used; with neither, the grid runs
    over k at threshold 0.1.
    """

    kind: str
    k: int | None = None
    threshold: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown statistic {self.kind!r}; expected one of {KINDS}")
        if self.kind == SK_SB and self.k is not None and self.threshold is not None:
            raise ParameterError("SK_SB takes either a fixed k or a fixed threshold, not both")

    @property
    def grid_over_k(self):
        return self.kind == SK_SB and self.k is None

    def label(self):
        if self.kind != SK_SB:
            return self.kind
        if self.grid_over_k:
            return f"{SK_SB}(t={self.threshold if self.threshold is not None else 0.1})"
        return f"{SK_SB}(k={self.k})"


def check_grid(stat, n, grid):
    grid = [float(g) for g in grid]
    if not grid:
        raise ParameterError("grid must be nonempty")
    if stat.kind in (COND_SB, HSINV_SB) and min(grid) <= 0:
        raise ParameterError(f"{stat.kind} needs a positive grid (it thresholds at n/t)")
    if stat.kind in (SMIN_LD, OPNORM) and min(grid) < 0:
        raise ParameterError(f"{stat.kind} needs a nonnegative grid")
    if stat.kind == SK_SB:
        if stat.grid_over_k:
            if any(g != int(g) or not 1 <= g <= n for g in grid):
                raise ParameterError(f"SK_SB k-grid must hold integers in [1, {n}]")
            if stat.threshold is not None and stat.threshold < 0:
                raise ParameterError("SK_SB threshold must be nonnegative")
        else:
            if not 1 <= stat.k <= n:
                raise ParameterError(f"SK_SB needs 1 <= k <= n, got k={stat.k}")
            if min(grid) < 0:
                raise ParameterError("SK_SB threshold grid must be nonnegative")
    return grid


def event_matrix(stat, spectra, grid):
    """Boolean (trials x grid) array of the tail event at each grid point.

    ``spectra`` holds one non-increasing singular spectrum per row.
    """
    s = np.asarray(spectra, dtype=np.float64)
    n = s.shape[1]
    g = np.asarray(grid, dtype=np.float64)[None, :]
    rootn = math.sqrt(n)
    smin = s[:, -1:]
    smax = s[:, :1]
    if stat.kind == SMIN_LD:
        return smin >= g / rootn
    if stat.kind == COND_SB:
        with np.errstate(divide="ignore"):
            kappa = np.where(smin > 0, smax / smin, np.inf)
        return kappa <= n / g
    if stat.kind == HSINV_SB:
        with np.errstate(divide="ignore"):
            hs = np.sqrt(np.sum(s ** -2.0, axis=1, keepdims=True))
        return hs <= np.minimum(n / g, np.sqrt(n / g))
    if stat.kind == OPNORM:
        return smax <= g * rootn
    if stat.grid_over_k:
        t = 0.1 if stat.threshold is None else stat.threshold
        ks = g.astype(int)[0]
        return s[:, n - ks] <= t * ks[None, :] / rootn
    return s[:, n - stat.k][:, None] <= g * stat.k / rootn


def _spectra_block(dist, n, master_seed, start, stop):
    mats = np.stack([sample_matrix(dist, n, master_seed, i).entries for i in range(start, stop)])
    return np.linalg.svd(mats, compute_uv=False)


def _blocks(trials):
    return [(a, min(a + BLOCK, trials)) for a in range(0, trials, BLOCK)]


def _map_blocks(fn, trials, threads):
    blocks = _blocks(trials)
    if threads is None or threads <= 1 or len(blocks) == 1:
        return [fn(a, b) for a, b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: fn(*ab), blocks))


def sample_spectra(dist, n, trials, master_seed, threads=1):
    """(trials x n) array of singular spectra; row i comes from trial index i."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    dist = as_distribution(dist)
    parts = _map_blocks(lambda a, b: _spectra_block(dist, n, master_seed, a, b), trials, threads)
    return np.concatenate(parts)


def wilson_interval(successes, trials, z=Z95):
    """Wilson score interval; zero successes use the rule of three for the upper end."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if successes == 0:
        return 0.0, min(1.0, 3.0 / trials)
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, min(centre - half, p)), min(1.0, max(centre + half, p))


@dataclass(eq=False)
class TailEstimate:
    grid: list
    trials: int
    successes: list
    p_hat: list
    ci_lo: list
    ci_hi: list
    provenance: dict = field(default_factory=dict)

    @classmethod
    def from_counts(cls, grid, trials, successes, provenance=None):
        successes = [int(c) for c in successes]
        ci = [wilson_interval(c, trials) for c in successes]
        return cls(
            grid=[float(g) for g in grid],
            trials=int(trials),
            successes=successes,
            p_hat=[c / trials for c in successes],
            ci_lo=[lo for lo, _ in ci],
            ci_hi=[hi for _, hi in ci],
            provenance=dict(provenance or {}),
        )

    def to_csv(self):
        prov = " ".join(f"{k}={v}" for k, v in self.provenance.items())
        lines = [f"# {prov}", "param,trials,successes,p_hat,ci_lo,ci_hi"]
        lines += [
            f"{g!r},{self.trials},{c},{p!r},{lo!r},{hi!r}"
            for g, c, p, lo, hi in zip(self.grid, self.successes, self.p_hat, self.ci_lo, self.ci_hi)
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text):
        provenance = {}
        grid, successes, trials = [], [], None
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        key, val = tok.split("=", 1)
                        provenance[key] = val
                continue
            if line.startswith("param"):
                continue
            cells = line.split(",")
            grid.append(float(cells[0]))
            trials = int(cells[1])
            successes.append(int(cells[2]))
        if trials is None:
            raise ParameterError("tail CSV holds no data rows")
        return cls.from_counts(grid, trials, successes, provenance)


def estimate_from_spectra(stat, spectra, grid, provenance=None):
    n = spectra.shape[1]
    grid = check_grid(stat, n, grid)
    counts = event_matrix(stat, spectra, grid).sum(axis=0)
    return TailEstimate.from_counts(grid, spectra.shape[0], counts, provenance)


def _provenance(stat, dist, n, master_seed):
    return {
        "ensemble": as_distribution(dist).kind,
        "n": n,
        "master_seed": master_seed,
        "statistic": stat.label(),
    }


def estimate_tail(stat, dist, n, grid, trials, master_seed, threads=1):
    """Empirical probability of ``stat``'s event at every grid point.

    Events (s = singular values of one sampled matrix):
    SMIN_LD ``s_min >= t/sqrt(n)``; COND_SB ``kappa <= n/t``;
    HSINV_SB ``||A^-1||_HS <= min(n/t, sqrt(n/t))``;
    SK_SB ``s_{n-k+1} <= t k / sqrt(n)``; OPNORM ``s_max <= t sqrt(n)``.
    """
    check_grid(stat, n, grid)
    spectra = sample_spectra(dist, n, trials, master_seed, threads)
    return estimate_from_spectra(stat, spectra, grid, _provenance(stat, dist, n, master_seed))


def estimate_tails(stats, dist, n, grid, trials, master_seed, threads=1):
    """Several statistics on one shared set of samples; returns a dict by label."""
    for stat in stats:
        check_grid(stat, n, grid)
    spectra = sample_spectra(dist, n, trials, master_seed, threads)
    return {
        stat.label(): estimate_from_spectra(stat, spectra, grid, _provenance(stat, dist, n, master_seed))
        for stat in stats
    }


@dataclass(frozen=True)
class ExponentFit:
    c_hat: float
    intercept: float
    r_squared: float
    points_used: int
    excluded: tuple = ()

    def to_csv(self):
        return (
            "c_hat,intercept,r_squared,points_used\n"
            f"{self.c_hat!r},{self.intercept!r},{self.r_squared!r},{self.points_used}\n"
        )


def fit_quadratic_exponent(est):
    """Least-squares fit of ``-ln p_hat`` against ``param^2``; p_hat in {0, 1} is skipped."""
    x, y, excluded = [], [], []
    for g, p in zip(est.grid, est.p_hat):
        if 0.0 < p < 1.0:
            x.append(g * g)
            y.append(-math.log(p))
        else:
            excluded.append(g)
    if len(x) < 3:
        raise InsufficientDataError(
            f"need at least 3 grid points with 0 < p_hat < 1, have {len(x)}; excluded {excluded}",
            excluded,
        )
    x = np.array(x)
    y = np.array(y)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return ExponentFit(float(slope), float(intercept), r2, len(x), tuple(excluded))


@dataclass(frozen=True)
class DistanceSummary:
    mode: str
    n: int
    ell: int
    trials: int
    mean: float
    stddev: float
    small_ball: dict
    large_deviation: dict

    def to_csv(self):
        keys = list(self.small_ball) + list(self.large_deviation)
        head = ["mode", "n", "ell", "trials", "mean", "stddev"]
        head += [f"small_{e}" for e in self.small_ball] + [f"dev_ge_{t}" for t in self.large_deviation]
        vals = [self.mode, self.n, self.ell, self.trials, repr(self.mean), repr(self.stddev)]
        vals += [repr(self.small_ball[e]) for e in self.small_ball]
        vals += [repr(self.large_deviation[t]) for t in self.large_deviation]
        assert len(keys) + 6 == len(head)
        return ",".join(head) + "\n" + ",".join(str(v) for v in vals) + "\n"


SMALL_BALL_EPS = (0.01, 0.1, 0.5)
DEVIATIONS = (1.0, 2.0, 3.0)
MODES = ("fixed_subspace", "random_subspace")


def _distance_block(dist, n, ell, master_seed, mode, start, stop):
    out = np.empty(stop - start)
    for j, i in enumerate(range(start, stop)):
        if mode == "fixed_subspace":
            # F = span(e_1..e_{n-ell}): the distance is the norm of the last ell coordinates
            x = sample_vectors(dist, n, 1, master_seed, i)[:, 0]
            out[j] = np.linalg.norm(x[n - ell:])
        else:
            v = sample_vectors(dist, n, n - ell + 1, master_seed, i)
            x, f = v[:, 0], v[:, 1:]
            if f.shape[1] == 0:
                out[j] = np.linalg.norm(x)
                continue
            q, _ = np.linalg.qr(f)
            r = x - q @ (q.T @ x)
            out[j] = np.linalg.norm(r - q @ (q.T @ r))
    return out


def distances(dist, n, ell, trials, master_seed, mode="fixed_subspace", threads=1):
    if not 1 <= ell <= n:
        raise ParameterError(f"ell must satisfy 1 <= ell <= n={n}, got {ell}")
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    dist = as_distribution(dist)
    parts = _map_blocks(
        lambda a, b: _distance_block(dist, n, ell, master_seed, mode, a, b), trials, threads
    )
    return np.concatenate(parts)


def distance_concentration(dist, n, ell, trials, master_seed, mode="fixed_subspace", threads=1):
    """Mean, spread and small-ball / deviation fractions of ``dist(X, F)``
    where F has codimension ell (fixed coordinate subspace or spanned by
    fresh random vectors)."""
    d = distances(dist, n, ell, trials, master_seed, mode, threads)
    root = math.sqrt(ell)
    return DistanceSummary(
        mode=mode, n=n, ell=ell, trials=trials,
        mean=float(d.mean()),
        stddev=float(d.std(ddof=1)) if trials > 1 else 0.0,
        small_ball={e: float(np.mean(d <= e * root)) for e in SMALL_BALL_EPS},
        large_deviation={t: float(np.mean(np.abs(d - root) >= t)) for t in DEVIATIONS},
    )


def operator_norm_tail(dist, n, trials, multiple, master_seed, threads=1):
    """Fraction of trials with ``s_max <= multiple * sqrt(n)``."""
    if multiple < 0:
        raise ParameterError(f"multiple must be nonnegative, got {multiple}")
    est = estimate_tail(StatisticSpec(OPNORM), dist, n, [multiple], trials, master_seed, threads)
    return est.p_hat[0]
