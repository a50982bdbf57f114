import math
from dataclasses import replace
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmlab.ensembles import sample_matrix
from rmlab.errors import GuardError, ParameterError, UndefinedRatioError
from rmlab.rii import (
    brute_force_subset_oracle, required_bound, required_size, select_invertible_subset,
    verify_certificate,
)


def _oracle(t, ell):
    """Plain loop over subsets with scipy-free eigenvalue route: s_ell^2 = lambda_min(T_J^T T_J)."""
    best, arg = -1.0, None
    for J in combinations(range(t.shape[0]), ell):
        g = t[:, J].T @ t[:, J]
        v = math.sqrt(max(np.linalg.eigvalsh(g)[0], 0.0))
        if v > best + 1e-12:
            best, arg = v, J
    return arg, best


def test_identity_certificate():
    c = select_invertible_subset(np.eye(4), 0.5)
    assert c.required_size == 1 and c.ell == 1
    assert c.required_bound == pytest.approx(0.5)
    assert c.achieved == pytest.approx(1.0)
    assert verify_certificate(np.eye(4), c)


def test_rank_two_diagonal():
    t = np.diag([1.0, 1.0, 0.0, 0.0])
    c = select_invertible_subset(t, 0.9)
    assert c.required_size == 1
    assert c.required_bound == pytest.approx(0.1 * math.sqrt(2) / 2)
    assert c.J == (0,) and c.achieved == pytest.approx(1.0)


def test_zero_matrix():
    with pytest.raises(UndefinedRatioError, match="undefined ratio"):
        select_invertible_subset(np.zeros((3, 3)), 0.5)


def test_bad_eps():
    with pytest.raises(ParameterError):
        select_invertible_subset(np.eye(3), 1.0)


def test_degenerate_empty_certificate():
    # one dominant direction: eps^2 ||T||_HS^2 / ||T||^2 < 1
    t = np.diag([10.0, 0.1, 0.1])
    c = select_invertible_subset(t, 0.25)
    assert c.degenerate and c.J == () and c.required_size == 0
    assert verify_certificate(t, c)


def test_verify_examples():
    good = select_invertible_subset(np.eye(4), 0.5)
    assert verify_certificate(np.eye(4), replace(good, J=(1,)))
    # eps close to 1 needs 3 columns of I_4
    assert not verify_certificate(np.eye(4), replace(good, J=(1,), eps=0.999))
    assert not verify_certificate(np.eye(4), replace(good, achieved=5.0))


def test_verify_rejects_out_of_range():
    c = select_invertible_subset(np.eye(4), 0.5)
    with pytest.raises(ParameterError):
        verify_certificate(np.eye(4), replace(c, J=(7,)))


def test_oracle_examples():
    assert brute_force_subset_oracle(np.eye(3), 2) == ((0, 1), pytest.approx(1.0))
    J, v = brute_force_subset_oracle(np.diag([3.0, 2.0, 1.0]), 1)
    assert J == (0,) and v == pytest.approx(3.0)


def test_oracle_guard():
    with pytest.raises(GuardError):
        brute_force_subset_oracle(np.eye(21), 2)
    with pytest.raises(ParameterError):
        brute_force_subset_oracle(np.eye(3), 0)


def test_oracle_against_loop():
    for i in range(10):
        t = sample_matrix("gaussian", 7, 4, i).entries
        for ell in (1, 3, 5):
            J, v = brute_force_subset_oracle(t, ell)
            J2, v2 = _oracle(t, ell)
            assert v == pytest.approx(v2, rel=1e-9)
            assert J == J2


def test_gaussian_10_certificates_and_oracle():
    for i in range(200):
        t = sample_matrix("gaussian", 10, 31, i).entries
        for eps in (0.25, 0.5, 0.75):
            c = select_invertible_subset(t, eps)
            assert verify_certificate(t, c)
            if c.ell:
                _, best = brute_force_subset_oracle(t, c.ell)
                assert best >= c.achieved * (1 - 1e-12)


def test_oracle_dominance_8x8():
    t = sample_matrix("gaussian", 8, 5, 0).entries
    c = select_invertible_subset(t, 0.75)
    assert brute_force_subset_oracle(t, c.ell)[1] >= c.achieved


@pytest.mark.parametrize("kind", ["gaussian", "rademacher", "uniform"])
def test_ill_conditioned_inputs_certify(kind):
    rng = np.random.default_rng(3)
    for i in range(50):
        t = sample_matrix(kind, 15, 8, i).entries @ np.diag(np.exp(3 * rng.standard_normal(15)))
        for eps in (0.25, 0.5, 0.75, 0.95):
            assert verify_certificate(t, select_invertible_subset(t, eps))


def test_required_quantities():
    assert required_size(4.0, 1.0, 0.5) == 1
    assert required_bound(4.0, 4, 0.5) == pytest.approx(0.5)


def test_csv_line():
    c = select_invertible_subset(np.eye(4), 0.5)
    assert c.csv_line() == "0.5,1,1,0.5,1.0,0"


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 12), st.integers(0, 2 ** 32), st.sampled_from([0.25, 0.5, 0.75]))
def test_scaling_equivariance(n, seed, eps):
    t = sample_matrix("gaussian", n, seed, 0).entries
    a, b = select_invertible_subset(t, eps), select_invertible_subset(7 * t, eps)
    assert a.J == b.J
    if a.ell:
        assert b.achieved == pytest.approx(7 * a.achieved, rel=1e-9)
