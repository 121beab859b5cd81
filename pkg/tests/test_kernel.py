import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from scanb.errors import DegenerateDataError, InputError
from scanb.kernel import KernelSpec, eval_kernel, gram, kernel_rows, median_bandwidth

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
RBF = [KernelSpec("gaussian-rbf", 1.3), KernelSpec("laplacian-rbf", 0.7)]


def test_gaussian_self_similarity_is_one():
    assert eval_kernel(KernelSpec("gaussian-rbf", 1.0), [0.3, -2.0], [0.3, -2.0]) == 1.0


def test_laplacian_unit_distance():
    value = eval_kernel(KernelSpec("laplacian-rbf", 1.0), [0.0, 0.0], [0.6, 0.8])
    assert value == pytest.approx(math.exp(-1), rel=1e-12)
    assert value == pytest.approx(0.367879, abs=1e-6)


def test_polynomial():
    assert eval_kernel(KernelSpec("polynomial", offset=1.0, degree=2), [1, 0], [1, 0]) == 4.0


def test_dimension_mismatch():
    with pytest.raises(InputError):
        eval_kernel(KernelSpec(), [1.0, 2.0], [1.0])


@pytest.mark.parametrize("kwargs", [
    dict(family="gaussian-rbf", bandwidth=0.0),
    dict(family="laplacian-rbf", bandwidth=-1.0),
    dict(family="polynomial", offset=0.0),
    dict(family="polynomial", degree=0),
    dict(family="cosine"),
])
def test_invalid_spec(kwargs):
    with pytest.raises(InputError):
        KernelSpec(**kwargs)


@pytest.mark.parametrize("spec", RBF + [KernelSpec("polynomial", offset=0.5, degree=3)])
def test_gram_and_rows_match_pointwise(spec, rng):
    A, B = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
    K = gram(spec, A, B)
    expected = [[eval_kernel(spec, a, b) for b in B] for a in A]
    np.testing.assert_allclose(K, expected, rtol=1e-12)
    np.testing.assert_allclose(kernel_rows(spec, A, B[:4]), np.diag(K[:, :4]), rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(x=arrays(float, 3, elements=finite), y=arrays(float, 3, elements=finite))
def test_symmetry_and_rbf_range(x, y):
    for spec in RBF + [KernelSpec("polynomial")]:
        assert eval_kernel(spec, x, y) == eval_kernel(spec, y, x)
    for spec in RBF:
        assert 0.0 <= eval_kernel(spec, x, y) <= 1.0
        assert eval_kernel(spec, x, x) == 1.0


def test_median_single_pair():
    assert median_bandwidth([0.0, 2.0]) == 2.0


def test_median_enumerated():
    # distances {1, 2, 3}
    assert median_bandwidth([0.0, 1.0, 3.0]) == 2.0


def test_median_even_count_is_midpoint():
    # distances {1, 3, 4, 2, 3, 1} -> sorted 1,1,2,3,3,4 -> (2 + 3) / 2
    assert median_bandwidth([0.0, 1.0, 3.0, 4.0]) == 2.5


def test_median_rejects_degenerate():
    with pytest.raises(DegenerateDataError):
        median_bandwidth(np.ones((5, 2)))
    with pytest.raises(InputError):
        median_bandwidth([[1.0, 2.0]])


@settings(max_examples=30, deadline=None)
@given(data=arrays(float, (6, 2), elements=finite), c=st.floats(0.1, 10), seed=st.integers(0, 99))
def test_median_permutation_invariant_and_scales(data, c, seed):
    try:
        base = median_bandwidth(data)
    except DegenerateDataError:
        return
    perm = np.random.default_rng(seed).permutation(len(data))
    assert median_bandwidth(data[perm]) == pytest.approx(base, rel=1e-12)
    assert median_bandwidth(c * data) == pytest.approx(c * base, rel=1e-9)
