import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import kurtosis

from scanb.errors import CsvFormatError, InputError
from scanb.simgen import (CASES, CASE_DIMENSION, StreamSpec, generate,
                          generate_reference_pool, make_rng, read_csv, write_csv)

POST = 50_000


def post_segment(case, seed=11):
    return generate(StreamSpec(case, 0, POST, seed=seed))


def test_case3_variance():
    var = post_segment("case3-full-cov").var(axis=0, ddof=1)
    assert np.all((1.9 <= var) & (var <= 2.1))


def test_case5_variance_and_kurtosis():
    x = post_segment("case5-laplace")[:, 0]
    assert 0.96 <= x.var(ddof=1) <= 1.04
    assert 2.7 <= kurtosis(x, fisher=True) <= 3.3


def test_case4_mixture_variance():
    var = post_segment("case4-mixture").var(axis=0, ddof=1)
    np.testing.assert_allclose(var, 0.37, rtol=0.05)


def test_case2_variance_pattern():
    var = post_segment("case2-partial-cov").var(axis=0, ddof=1)
    np.testing.assert_allclose(var[:5], 2.0, rtol=0.05)
    np.testing.assert_allclose(var[5:], 1.0, rtol=0.05)


def test_case1_mean_and_custom_shift():
    x = post_segment("case1-mean-shift")
    np.testing.assert_allclose(x.mean(axis=0), 1.0, atol=0.03)
    y = generate(StreamSpec("case1-mean-shift", 0, 10_000, seed=1, mean_shift=0.25))
    np.testing.assert_allclose(y.mean(axis=0), 0.25, atol=0.04)


@pytest.mark.parametrize("case", CASES)
def test_pre_change_moments(case):
    x = generate(StreamSpec(case, 20_000, 20_000, seed=5))
    d = CASE_DIMENSION[case]
    assert x.shape == (20_000, d)
    assert np.linalg.norm(x.mean(axis=0)) < 3 * np.sqrt(d / 20_000)
    np.testing.assert_allclose(x.var(axis=0), 1.0, rtol=0.05)


@pytest.mark.parametrize("case", CASES)
def test_pool_mean_clt_bound(case):
    pool = generate_reference_pool(case, 2000, seed=9)
    d = CASE_DIMENSION[case]
    assert pool.shape == (2000, d)
    assert np.linalg.norm(pool.mean(axis=0)) < 3 * np.sqrt(d / 2000)


def test_pool_determinism_and_independence_from_stream():
    a = generate_reference_pool("case1-mean-shift", 50, seed=3)
    np.testing.assert_array_equal(a, generate_reference_pool("case1-mean-shift", 50, seed=3))
    assert not np.array_equal(a, generate_reference_pool("case1-mean-shift", 50, seed=4))
    stream = generate(StreamSpec("case1-mean-shift", 50, 50, seed=3))
    assert not np.array_equal(a, stream)


def test_case5_pool_is_univariate():
    assert generate_reference_pool("case5-laplace", 10, 0).shape == (10, 1)


def test_tau_equals_length_is_pure_null():
    x = generate(StreamSpec("case1-mean-shift", 300, 300, seed=2))
    null = generate(StreamSpec("null-only", 300, 300, seed=2))
    np.testing.assert_array_equal(x, null)


def test_prefix_shared_up_to_change():
    a = generate(StreamSpec("case3-full-cov", 40, 100, seed=8))
    b = generate(StreamSpec("case3-full-cov", 40, 60, seed=8))
    np.testing.assert_array_equal(a[:40], b[:40])


@pytest.mark.parametrize("bad", [dict(case_id="case9", tau=0, length=1),
                                 dict(case_id="null-only", tau=5, length=4),
                                 dict(case_id="null-only", tau=-1, length=4)])
def test_invalid_spec(bad):
    with pytest.raises(InputError):
        StreamSpec(**bad)


def test_pool_size_must_be_positive():
    with pytest.raises(InputError):
        generate_reference_pool("null-only", 0, 1)


def test_rng_keys_do_not_collide():
    draws = {key: make_rng(0, *key).random() for key in
             [("case1-mean-shift", 0, "pool"), ("case1-mean-shift", 0, "stream"),
              ("case1-mean-shift", 1, "pool"), ("case2-partial-cov", 0, "pool")]}
    assert len(set(draws.values())) == len(draws)
    assert make_rng(0, "a", 1).random() == make_rng(0, "a", 1).random()


@settings(max_examples=30, deadline=None)
@given(case=st.sampled_from(CASES), tau=st.integers(0, 30), extra=st.integers(0, 30),
       seed=st.integers(0, 2**31), header=st.booleans())
def test_csv_roundtrip_is_exact(tmp_path_factory, case, tau, extra, seed, header):
    x = generate(StreamSpec(case, tau, tau + extra + 1, seed=seed))
    path = tmp_path_factory.mktemp("csv") / "s.csv"
    write_csv(path, x, header=header)
    np.testing.assert_array_equal(read_csv(path), x)


def test_csv_serialisation_is_deterministic(tmp_path):
    spec = StreamSpec("case4-mixture", 10, 30, seed=77)
    write_csv(tmp_path / "a.csv", generate(spec))
    write_csv(tmp_path / "b.csv", generate(spec))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2\n3,4,5\n")
    with pytest.raises(CsvFormatError) as err:
        read_csv(p)
    assert err.value.row == 2 and err.value.width_mismatch
    p.write_text("1,2\n3,oops\n")
    with pytest.raises(CsvFormatError) as err:
        read_csv(p)
    assert err.value.row == 2 and not err.value.width_mismatch
    p.write_text("")
    with pytest.raises(CsvFormatError):
        read_csv(p)
    p.write_text("1,2\n")
    with pytest.raises(CsvFormatError):
        read_csv(p, dim=3)
