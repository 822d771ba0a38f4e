import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from morawetz import tridiag

floats = st.floats(min_value=-10, max_value=10, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 40).flatmap(lambda n: st.tuples(arrays(float, n, elements=floats),
                                                       arrays(float, n - 1, elements=floats))),
       st.floats(-25, 25))
def test_count_matches_dense_eigenvalues(de, lam):
    d, e = de
    w = sla.eigvalsh_tridiagonal(d, e)
    if np.min(np.abs(w - lam)) < 1e-8:
        return  # too close to call
    assert tridiag.count_below(d, e, lam) == int(np.sum(w < lam))


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 30), st.integers(0, 2**31 - 1))
def test_pencil_count_matches_generalized_eigenvalues(n, seed):
    rng = np.random.default_rng(seed)
    kd, ke = rng.normal(size=n), rng.normal(size=n - 1)
    # diagonally dominant positive definite B
    be = rng.uniform(-0.4, 0.4, size=n - 1)
    bd = 1.0 + np.abs(np.r_[be, 0]) + np.abs(np.r_[0, be])
    K = np.diag(kd) + np.diag(ke, 1) + np.diag(ke, -1)
    B = np.diag(bd) + np.diag(be, 1) + np.diag(be, -1)
    w = sla.eigh(K, B, eigvals_only=True)
    for lam in (-1.0, 0.0, 0.7):
        if np.min(np.abs(w - lam)) > 1e-8:
            assert tridiag.pencil_count_below(kd, ke, bd, be, lam) == int(np.sum(w < lam))


def test_smallest_eigenvalue_of_discrete_laplacian():
    n = 500
    d, e = 2 * np.ones(n), -np.ones(n - 1)
    exact = 2 - 2 * np.cos(np.pi / (n + 1))
    assert tridiag.smallest_eigenvalue(d, e) == pytest.approx(exact, rel=1e-9)


def test_gershgorin_contains_spectrum():
    rng = np.random.default_rng(3)
    d, e = rng.normal(size=50), rng.normal(size=49)
    lo, hi = tridiag.gershgorin(d, e)
    w = sla.eigvalsh_tridiagonal(d, e)
    assert lo <= w.min() and w.max() <= hi


def test_bisect_requires_valid_bracket():
    d, e = np.array([1.0, 2.0]), np.array([0.0])
    with pytest.raises(ValueError):
        tridiag.bisect_lowest(lambda lam: tridiag.count_below(d, e, lam), 1.5, 3.0)
