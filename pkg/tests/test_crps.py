import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from _laws import KINDS, random_law
from ccrps.crps import (
    InfiniteScore,
    crps,
    crps_beta,
    crps_empirical,
    crps_gaussian,
    crps_lognormal,
    crps_mixture_gaussian,
    crps_quadrature_oracle,
    crps_sample_estimate,
    crps_student_t,
    h_function,
)
from ccrps.special import DomainError
from ccrps.univariate import Empirical, Gaussian, LogNormal, MixtureGaussian, ScaledBeta, StudentT


@pytest.mark.parametrize("kind", KINDS)
def test_closed_form_matches_quadrature(kind):
    rng = np.random.default_rng(hash(kind) % 2**32)
    for _ in range(15):
        law, y, support, brk = random_law(kind, rng)
        oracle = crps_quadrature_oracle(law.cdf, y, support, brk)
        assert crps(law, y) == pytest.approx(oracle, abs=1e-8)


@pytest.mark.parametrize("kind", ["gaussian", "mixture", "lognormal", "student_t", "scaled_beta"])
def test_closed_form_matches_sampling(kind):
    rng = np.random.default_rng(11)
    law, y, _, _ = random_law(kind, rng)
    est, se = crps_sample_estimate(law.sample(rng, 200_000), law.sample(rng, 200_000), y)
    assert abs(crps(law, y) - est) < 4 * se


def test_gaussian_reference_values():
    # standard normal at its mean: (sqrt2 - 1)/sqrt(pi)
    assert crps_gaussian(0.0, 1.0, 0.0) == pytest.approx((math.sqrt(2) - 1) / math.sqrt(math.pi))
    np.testing.assert_allclose(crps_gaussian(1.0, 4.0, np.array([1.0, 3.0])),
                               2.0 * crps_gaussian(0.0, 1.0, np.array([0.0, 1.0])))
    with pytest.raises(DomainError):
        crps_gaussian(0.0, 0.0, 1.0)


def test_h_function():
    assert h_function(0.0, 1.0) == pytest.approx(2 * stats.norm.pdf(0))
    assert h_function(-1.5, 0.0) == 1.5
    # H is E|N(mu, s^2)|
    rng = np.random.default_rng(0)
    x = rng.normal(0.7, 1.3, 400_000)
    assert h_function(0.7, 1.69) == pytest.approx(np.abs(x).mean(), abs=4 * x.std() / 600)


def test_single_component_mixture_is_gaussian():
    assert crps_mixture_gaussian([1.0], [0.3], [2.0], 1.1) == pytest.approx(crps_gaussian(0.3, 2.0, 1.1))


def test_mixture_with_atom():
    # half atom at 0, half N(0,1): brute force expectation via quadrature
    law = MixtureGaussian([0.5, 0.5], [0.0, 0.0], [0.0, 1.0])
    for y in (-1.0, 0.0, 0.4):
        assert crps(law, y) == pytest.approx(crps_quadrature_oracle(law.cdf, y, breakpoints=(0.0,)), abs=1e-9)
    with pytest.raises(DomainError):
        crps_mixture_gaussian([1.0], [0.0], [-1.0], 0.0)


def test_lognormal_nonpositive_observation():
    mu, var = 0.2, 0.5
    for y in (-1.0, 0.0):
        oracle = crps_quadrature_oracle(LogNormal(mu, var).cdf, y, (0.0, np.inf))
        assert crps_lognormal(mu, var, y) == pytest.approx(oracle, abs=1e-9)


def test_student_t_large_df_approaches_gaussian():
    assert crps_student_t(0.5, 1.2, 1e7, 1.0) == pytest.approx(crps_gaussian(0.5, 1.44, 1.0), rel=1e-6)


def test_student_t_infinite_mean():
    with pytest.raises(InfiniteScore):
        crps_student_t(0.0, 1.0, 1.0, 0.0)
    with pytest.raises(InfiniteScore):
        crps(StudentT(0.0, 1.0, 0.8), 0.0)
    with pytest.raises(DomainError):
        crps_student_t(0.0, 1.0, 1.0 + 1e-9, 0.0)


def test_beta_uniform_case():
    # Beta(1, 1) at y in [0, 1]: CRPS = y^3/3 + (1-y)^3/3
    for y in (0.0, 0.3, 1.0):
        assert crps_beta(1.0, 1.0, y) == pytest.approx(y**3 / 3 + (1 - y) ** 3 / 3)
    # U(0, 2) above its support: E|X - y| - E|X - X'|/2 = 1.6 - 1/3
    assert crps(ScaledBeta(1.0, 1.0, 2.0), 2.6) == pytest.approx(1.6 - 1.0 / 3.0)


def test_empirical_matches_brute_force():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=9)
    w = rng.dirichlet(np.ones(9))
    y = 0.25
    brute = np.sum(w * np.abs(pts - y)) - 0.5 * np.sum(np.outer(w, w) * np.abs(pts[:, None] - pts[None, :]))
    assert crps_empirical(pts, w, y) == pytest.approx(brute, abs=1e-14)
    assert crps(Empirical([1.0]), 3.0) == 2.0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), kind=st.sampled_from(KINDS))
def test_crps_nonnegative(seed, kind):
    law, y, _, _ = random_law(kind, np.random.default_rng(seed))
    assert crps(law, y) >= -1e-12


@settings(max_examples=40, deadline=None)
@given(mean=st.floats(-5, 5), sd=st.floats(0.1, 5), y=st.floats(-10, 10), shift=st.floats(-5, 5))
def test_gaussian_translation_invariance(mean, sd, y, shift):
    a = crps(Gaussian(mean, sd * sd), y)
    b = crps(Gaussian(mean + shift, sd * sd), y + shift)
    assert a == pytest.approx(b, abs=1e-12)


def test_batched_parameters():
    means = np.array([0.0, 1.0, -2.0])
    got = crps_gaussian(means, np.ones(3), np.zeros(3))
    np.testing.assert_allclose(got, [crps_gaussian(m, 1.0, 0.0) for m in means])
