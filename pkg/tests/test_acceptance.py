"""Exit criteria: one test (and one PASS/FAIL line) per acceptance criterion.

Seeds are fixed up front; tolerances are the contract values.
"""
import math

import pytest

from rmlab import montecarlo as mc
from rmlab.cli import body_lines, main
from rmlab.ensembles import KINDS, sample_matrix
from rmlab.montecarlo import HSINV_SB, SK_SB, SMIN_LD, StatisticSpec
from rmlab.prooftrace import bottom_frame, frame_errors, frame_ok, trace_chain
from rmlab.rii import brute_force_subset_oracle, select_invertible_subset, verify_certificate
from rmlab.spectra import negative_second_moment_residual, spectral_summary
from rmlab.errors import InsufficientDataError, NoCertificateError

SEED = 20261017
SIZES = (5, 20, 50)
EPSILONS = (0.25, 0.5, 0.75)


def _samples_per_cell(total=300):
    cells = [(kind, n) for kind in KINDS for n in SIZES]
    base, extra = divmod(total, len(cells))
    return [(kind, n, base + (i < extra)) for i, (kind, n) in enumerate(cells)]


def test_ac1_negative_second_moment_identity(criterion):
    worst, used, skipped = 0.0, 0, 0
    for kind, n, count in _samples_per_cell():
        trial = 0
        got = 0
        while got < count:
            a = sample_matrix(kind, n, SEED + 1, trial).entries
            trial += 1
            s = spectral_summary(a)
            if s.singular or s.kappa > 1e8:
                skipped += 1
                continue
            worst = max(worst, negative_second_moment_residual(a))
            got += 1
        used += got
    ok = used == 300 and worst <= 1e-8
    criterion("AC1 negative second moment identity", ok,
              f"{used} samples, max residual {worst:.2e} (tol 1e-8), {skipped} singular draws skipped")
    assert ok


def test_ac2_bottom_frame_invariants(criterion):
    worst = {"orthonormality": 0.0, "prop1": 0.0, "norms": 0.0}
    failures = used = 0
    for kind, n, count in _samples_per_cell():
        for trial in range(count):
            a = sample_matrix(kind, n, SEED + 2, trial).entries
            for k in sorted({1, n // 4, n}):
                err = frame_errors(a, bottom_frame(a, k))
                failures += not frame_ok(err)
                worst = {key: max(worst[key], err[key]) for key in worst}
            used += 1
    ok = failures == 0 and used == 300
    criterion("AC2 bottom frame invariants", ok,
              f"{used} samples, worst orth {worst['orthonormality']:.1e} (1e-10), "
              f"prop1 {worst['prop1']:.1e} (1e-8), norms {worst['norms']:.1e} (1e-10)")
    assert ok


def test_ac3_restricted_invertibility(criterion):
    silent = raised = certified = 0
    for trial in range(500):
        t = sample_matrix("gaussian", 30, SEED + 3, trial).entries
        for eps in EPSILONS:
            try:
                cert = select_invertible_subset(t, eps)
            except NoCertificateError:
                raised += 1
                continue
            if verify_certificate(t, cert):
                certified += 1
            else:
                silent += 1
    exists = dominated = small_total = 0
    for trial in range(200):
        t = sample_matrix("gaussian", 10, SEED + 4, trial).entries
        for eps in EPSILONS:
            cert = select_invertible_subset(t, eps)
            small_total += 1
            if cert.required_size == 0:
                exists += 1
                dominated += 1
                continue
            _, value = brute_force_subset_oracle(t, cert.required_size)
            exists += value >= cert.required_bound
            dominated += value >= cert.achieved
    ok = silent == 0 and raised == 0 and exists == small_total and dominated == small_total
    criterion("AC3 restricted invertibility", ok,
              f"n=30: {certified}/1500 certified, {silent} silent failures, {raised} explicit; "
              f"n=10: oracle confirms {exists}/{small_total}, dominance {dominated}/{small_total}")
    assert ok


def test_ac4_chain_soundness(criterion):
    bad_triggered = bad_unconditional = triggered = 0
    for trial in range(10 ** 4):
        a = sample_matrix("gaussian", 50, SEED + 5, trial).entries
        tr = trace_chain(a, 6, 0.5, 0.1, seed_trace=(SEED + 5, trial))
        triggered += tr.triggered
        bad_triggered += tr.triggered and not all(tr.verdicts)
        bad_unconditional += not (tr.verdicts[1] and tr.verdicts[2])
    ok = bad_triggered == 0 and bad_unconditional == 0
    criterion("AC4 chain soundness", ok,
              f"10000 traces, {triggered} triggered, {bad_triggered} triggered with a false verdict, "
              f"{bad_unconditional} failing (ii)/(iii)")
    assert ok


@pytest.fixture(scope="module")
def shared_spectra():
    return mc.sample_spectra("gaussian", 64, 2 * 10 ** 5, SEED + 6)


T_GRID = [1.0 + 0.5 * i for i in range(7)]


def test_ac5_smin_decay_shape(criterion, shared_spectra):
    est = mc.estimate_from_spectra(StatisticSpec(SMIN_LD), shared_spectra, T_GRID)
    fit = mc.fit_quadratic_exponent(est)
    ok = fit.c_hat > 0 and fit.r_squared >= 0.95
    criterion("AC5a s_min large-deviation decay", ok,
              f"successes {est.successes}; c_hat {fit.c_hat:.4f}, R^2 {fit.r_squared:.4f} "
              f"on {fit.points_used} points (need c_hat > 0, R^2 >= 0.95)")
    assert ok


def test_ac5_hsinv_below_smin(criterion, shared_spectra):
    sm = mc.estimate_from_spectra(StatisticSpec(SMIN_LD), shared_spectra, T_GRID)
    hs = mc.estimate_from_spectra(StatisticSpec(HSINV_SB), shared_spectra, T_GRID)
    bad = [t for t, a, b in zip(T_GRID, hs.p_hat, sm.p_hat) if a > b]
    ok = not bad
    criterion("AC5b p_hat HSINV_SB <= p_hat SMIN_LD", ok,
              f"HSINV {hs.successes} vs SMIN {sm.successes}; violated at t={bad}")
    assert ok


def test_ac6_sk_decay_shape(criterion, shared_spectra):
    est = mc.estimate_from_spectra(StatisticSpec(SK_SB, threshold=0.1), shared_spectra, [1, 2, 3, 4, 5])
    try:
        fit = mc.fit_quadratic_exponent(est)
    except InsufficientDataError as exc:
        criterion("AC6 s_{n-k+1} small-ball decay", False,
                  f"successes {est.successes}; {exc}")
        raise
    ok = fit.c_hat > 0 and fit.r_squared >= 0.9
    criterion("AC6 s_{n-k+1} small-ball decay", ok,
              f"successes {est.successes}; slope {fit.c_hat:.4f}, R^2 {fit.r_squared:.4f}")
    assert ok


def test_ac7_distance_concentration(criterion):
    s = mc.distance_concentration("gaussian", 100, 9, 10 ** 4, SEED + 7, mode="fixed_subspace")
    chi9 = math.sqrt(2) * math.exp(math.lgamma(5) - math.lgamma(4.5))
    ok = abs(s.mean - chi9) <= 0.05 and abs(chi9 - 2.918) <= 0.001 and s.large_deviation[3.0] <= 0.02
    criterion("AC7 distance concentration", ok,
              f"mean {s.mean:.4f} vs chi_9 mean {chi9:.4f} (+-0.05); "
              f"P(|d - 3| >= 3) = {s.large_deviation[3.0]:.4f} (<= 0.02)")
    assert ok


def test_ac8_operator_norm_event(criterion):
    fractions = {kind: mc.operator_norm_tail(kind, 100, 10 ** 4, 3.0, SEED + 8) for kind in ("gaussian", "rademacher")}
    ok = all(f >= 0.999 for f in fractions.values())
    criterion("AC8 operator norm event", ok, f"fractions {fractions} (>= 0.999)")
    assert ok


def test_ac9_determinism_across_threads(criterion, tmp_path):
    argv = "tail --stat smin --ensemble gaussian --n 16 --grid 0.5:3:0.5 --trials 5000 --seed 99".split()
    bodies = []
    for threads in (1, 4):
        out = tmp_path / f"t{threads}.csv"
        assert main(argv + ["--threads", str(threads), "--out", str(out)]) == 0
        bodies.append("\n".join(body_lines(out.read_text())).encode())
    ok = bodies[0] == bodies[1]
    criterion("AC9 determinism across --threads", ok, f"{len(bodies[0])} body bytes, identical={ok}")
    assert ok
