import math

import pytest
from hypothesis import given, strategies as st

from kcuckoo import params
from kcuckoo.errors import ParameterError
from kcuckoo.hashing import CuckooParams

EPS = st.floats(1e-30, 0.99)


def test_examples():
    assert params.k_for_failure(2**20, 2.0**-40) == 4
    assert params.k_robust(2**20, 2.0**-20) == 44
    assert params.k_robust(1, 0.5) == 5
    assert params.b_single_hash(10, 0.01) == 10_000
    assert params.b_single_hash(1, 0.25) == 4
    assert params.overhead_lower_bound(2**20, 2.0**-80) == 2
    assert params.overhead_lower_bound(1024, 1 / 1024) == 1
    assert params.overhead_lower_bound(2**10, 2.0**-100, ell=1, s=10) == 1


@pytest.mark.parametrize("fn, args", [
    (params.k_for_failure, (100, 1.5)),
    (params.k_for_failure, (100, 0.0)),
    (params.k_for_failure, (1, 0.1)),
    (params.k_robust, (0, 0.1)),
    (params.k_robust, (10, 1.0)),
    (params.b_single_hash, (10, -0.1)),
    (params.overhead_lower_bound, (10, 2.0)),
])
def test_domain_errors(fn, args):
    with pytest.raises(ParameterError):
        fn(*args)


@given(st.integers(2, 2**30), EPS, EPS)
def test_k_for_failure_monotone_in_eps(n, e1, e2):
    lo, hi = sorted((e1, e2))
    assert params.k_for_failure(n, lo) >= params.k_for_failure(n, hi) >= 4


@given(st.integers(2, 2**30), st.integers(2, 2**30), EPS)
def test_k_for_failure_monotone_in_n(n1, n2, eps):
    small, large = sorted((n1, n2))
    assert params.k_for_failure(small, eps) >= params.k_for_failure(large, eps)


@given(st.integers(1, 2**40), EPS)
def test_k_robust_doubling(Q, eps):
    assert params.k_robust(2 * Q, eps) - params.k_robust(Q, eps) in (0, 1, 2)
    assert params.k_robust(2 * Q, eps, c=1.0) >= params.k_robust(Q, eps)


@given(st.integers(1, 1000), st.sampled_from([2.0**-j for j in range(1, 30)]))
def test_b_single_hash_linear_in_inverse_eps(n, eps):
    assert params.b_single_hash(n, eps / 2) == 2 * params.b_single_hash(n, eps)


@given(st.integers(2, 2**20), EPS, st.integers(1, 3), st.integers(0, 4))
def test_overhead_lower_bound_is_smallest(n, eps, ell, s):
    k = params.overhead_lower_bound(n, eps, ell, s)
    bound = math.log2(1 / eps) / math.log2(n)
    assert k * k * ell + k * s >= bound * (1 - 1e-9)
    if k > 1:
        assert (k - 1) ** 2 * ell + (k - 1) * s < bound


@given(st.integers(2, 5000), EPS, st.integers(1, 3))
def test_returned_k_gives_valid_params(n, eps, ell):
    k = params.k_for_failure(n, eps)
    p = CuckooParams(n, k, params.default_b(n, k, ell), ell)
    assert p.b % k == 0 and p.b >= (2 * n if ell == 1 else math.ceil(2 * n / ell))


def test_default_b_rounding():
    assert params.default_b(1024, 3) == 2049
    assert params.default_b(10, 4, ell=3) == 8
    assert params.choose_params(1024, 2.0**-10).k == 4


def test_calibration_file_roundtrip(tmp_path):
    path = tmp_path / "cal.txt"
    params.write_calibration({"k_for_failure": 1.25, "k_robust": 1.0}, path)
    assert path.read_text() == "k_for_failure = 1.25\nk_robust = 1\n"
    loaded = params.load_calibration(path)
    assert loaded["k_for_failure"] == 1.25 and loaded["pbc_load"] == 1.0
    path.write_text("oops\n")
    with pytest.raises(ParameterError):
        params.load_calibration(path)


def test_packaged_calibration_is_readable():
    values = params.load_calibration()
    assert set(params.FORMULAS) <= set(values)
    assert all(v >= 1.0 for v in values.values())
