import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccrps.linalg import (
    NotPositiveDefinite,
    block_condition,
    cholesky,
    gaussian_logpdf,
    log_det,
    mahalanobis_sq,
    solve_spd,
)


def random_spd(rng, d):
    a = rng.standard_normal((d, d))
    return a @ a.T + 0.1 * np.eye(d)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.integers(1, 8))
def test_cholesky_reconstructs(seed, d):
    rng = np.random.default_rng(seed)
    s = random_spd(rng, d)
    f = cholesky(s)
    assert np.allclose(np.triu(f.lower, 1), 0.0)
    assert np.all(np.diag(f.lower) > 0)
    np.testing.assert_allclose(f.matrix(), s, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(f.lower, np.linalg.cholesky(s), rtol=1e-9, atol=1e-10)


def test_not_pd_reports_pivot():
    with pytest.raises(NotPositiveDefinite) as info:
        cholesky([[1.0, 2.0], [2.0, 1.0]])
    assert info.value.pivot == 1
    with pytest.raises(ValueError):
        cholesky([[1.0, 0.5], [0.0, 1.0]])


def test_solve_and_logdet():
    rng = np.random.default_rng(1)
    s = random_spd(rng, 5)
    f = cholesky(s)
    b = rng.standard_normal((5, 3))
    np.testing.assert_allclose(solve_spd(f, b), np.linalg.solve(s, b), rtol=1e-10)
    np.testing.assert_allclose(solve_spd(f, b[:, 0]), np.linalg.solve(s, b[:, 0]), rtol=1e-10)
    assert log_det(f) == pytest.approx(np.linalg.slogdet(s)[1])
    with pytest.raises(ValueError):
        solve_spd(f, np.ones(4))


def test_block_condition_example():
    mean, var = block_condition([1.0, -1.0], [[1.0, 0.8], [0.8, 4.0]], 1, [0], [1.0])
    assert mean == pytest.approx(-1.0)
    assert var == pytest.approx(3.36)


def test_block_condition_against_precision_matrix():
    # the conditional of one coordinate given all others reads off the precision matrix
    rng = np.random.default_rng(7)
    s = random_spd(rng, 4)
    mu = rng.standard_normal(4)
    obs = rng.standard_normal((6, 3))
    prec = np.linalg.inv(s)
    mean, var = block_condition(mu, s, 0, [1, 2, 3], obs)
    assert var == pytest.approx(1.0 / prec[0, 0])
    expect = mu[0] - (obs - mu[1:]) @ prec[0, 1:] / prec[0, 0]
    np.testing.assert_allclose(mean, expect, rtol=1e-10)
    m0, v0 = block_condition(mu, s, 2, [], [])
    assert (m0, v0) == (mu[2], s[2, 2])


def test_gaussian_logpdf():
    f = cholesky(np.eye(2))
    assert gaussian_logpdf(np.zeros(2), np.zeros(2), f) == pytest.approx(-np.log(2 * np.pi))
    s = np.array([[2.0, 0.3], [0.3, 0.5]])
    r = np.array([[0.2, -1.0], [1.0, 1.0]])
    np.testing.assert_allclose(mahalanobis_sq(cholesky(s), r),
                               np.einsum("ni,ij,nj->n", r, np.linalg.inv(s), r))
