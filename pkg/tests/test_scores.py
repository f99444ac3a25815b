import itertools
import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ccrps import distributions as D
from ccrps import scores as S
from ccrps.crps import crps_empirical, crps_gaussian
from ccrps.rng import make_rng
from ccrps.special import DomainError


def random_spd(rng, d):
    a = rng.standard_normal((d, d))
    return a @ a.T / d + 0.2 * np.eye(d)


def random_mixture(rng, d, m):
    return D.MvMixtureGaussian.from_arrays(rng.dirichlet(np.ones(m)), rng.normal(0, 1.5, (m, d)),
                                           [random_spd(rng, d) for _ in range(m)])


def h(mu, var):
    s = np.sqrt(var)
    return mu * (2 * stats.norm.cdf(mu / s) - 1) + 2 * s * stats.norm.pdf(mu / s)


def t0_double_sum(w, mus, sigmas, y):
    """Explicit loops over pairs and components; an independent oracle."""
    m, d = mus.shape
    total = 0.0
    for i in range(d):
        mi, vi = mus[:, i], sigmas[:, i, i]
        total += sum(w[k] * h(y[i] - mi[k], vi[k]) for k in range(m))
        total -= 0.5 * sum(w[k] * w[l] * h(mi[k] - mi[l], vi[k] + vi[l]) for k in range(m) for l in range(m))
    for i, j in itertools.permutations(range(d), 2):
        lik = np.array([w[k] * stats.norm.pdf(y[j], mus[k, j], math.sqrt(sigmas[k, j, j])) for k in range(m)])
        wh = lik / lik.sum()
        mh = np.array([mus[k, i] + sigmas[k, i, j] / sigmas[k, j, j] * (y[j] - mus[k, j]) for k in range(m)])
        vh = np.array([sigmas[k, i, i] - sigmas[k, i, j] ** 2 / sigmas[k, j, j] for k in range(m)])
        total += sum(wh[k] * h(y[i] - mh[k], vh[k]) for k in range(m))
        total -= 0.5 * sum(wh[k] * wh[l] * h(mh[k] - mh[l], vh[k] + vh[l]) for k in range(m) for l in range(m))
    return total


def test_spec_constructors():
    assert S.spec_chain(2).pairs == ((0, ()), (1, (0,)))
    assert S.spec_chain(1).pairs == ((0, ()),)
    assert S.spec_chain(3, (1, 2, 0)).pairs == ((1, ()), (2, (1,)), (0, (1, 2)))
    assert set(S.spec_t0(2).pairs) == {(0, ()), (1, ()), (0, (1,)), (1, (0,))}
    assert S.spec_t0(3).q == 9
    assert S.spec_t0(1).pairs == ((0, ()),)
    with pytest.raises(ValueError):
        S.spec_chain(3, (0, 0, 1))


def test_spec_validation_and_duplicates(caplog):
    with pytest.raises(ValueError):
        S.ConditionalSpec(2, ((0, (0,)),))
    with pytest.raises(IndexError):
        S.ConditionalSpec(2, ((2, ()),))
    with caplog.at_level(logging.WARNING):
        spec = S.ConditionalSpec(2, ((0, ()), (0, ())))
    assert spec.q == 2 and "duplicate" in caplog.text


def test_ccrps_chain_gaussian_is_sum_of_two_terms():
    mu, sig = np.array([1.0, -1.0]), np.array([[1.0, 0.8], [0.8, 4.0]])
    y = np.array([0.3, 0.9])
    res = S.ccrps(D.MvGaussian(mu, sig), S.spec_chain(2), y)
    direct = crps_gaussian(1.0, 1.0, 0.3) + crps_gaussian(-1.0 + 0.8 * (0.3 - 1.0), 4.0 - 0.64, 0.9)
    assert res.value == pytest.approx(direct, abs=1e-12)
    assert res.n_ill_defined == 0
    other = S.ccrps(D.MvGaussian(mu, sig), S.spec_chain(2, (1, 0)), y)
    assert math.isfinite(other.value)


@pytest.mark.parametrize("seed", range(6))
def test_ccrps_t0_matches_explicit_double_sum(seed):
    rng = np.random.default_rng(seed)
    d, m = 2 + seed % 2, 1 + seed % 3
    mix = random_mixture(rng, d, m)
    y = rng.normal(size=d)
    got = S.ccrps(mix, S.spec_t0(d), y).value
    assert got == pytest.approx(t0_double_sum(mix.weights, mix.mus, mix.sigmas, y), abs=1e-10)


def test_ccrps_many_matches_single():
    rng = np.random.default_rng(1)
    mix = random_mixture(rng, 3, 2)
    ys = rng.normal(size=(5, 3))
    vals, bad = S.ccrps_many(mix, S.spec_chain(3), ys)
    np.testing.assert_allclose(vals, [S.ccrps(mix, S.spec_chain(3), y).value for y in ys], rtol=1e-13)
    assert not bad.any()
    mean_vals, _ = S.ccrps_many(mix, S.spec_chain(3), ys, reduction="mean")
    np.testing.assert_allclose(mean_vals, vals / 3)


def test_ccrps_ill_defined_is_infinite():
    dr = D.Dirichlet([1.0, 2.0, 3.0])
    res = S.ccrps(dr, S.spec_chain(3), [0.7, 0.6, -0.3])
    assert res.value == math.inf and res.n_ill_defined == 1
    res = S.ccrps(D.MvLogNormal([0, 0], np.eye(2)), S.spec_t0(2), [-1.0, 1.0])
    assert res.value == math.inf and res.n_ill_defined == 1
    assert S.mean_score(lambda p, y: S.ccrps(p, S.spec_chain(3), y), dr,
                        [[0.2, 0.3, 0.5], [0.7, 0.6, -0.3]]) == math.inf


def test_ccrps_other_families_finite():
    for dist, y in [(D.Dirichlet([1.0, 2.0, 3.0]), [0.2, 0.3, 0.5]),
                    (D.MvStudentT([0, 0, 0], np.eye(3), 3.0), [0.1, -0.2, 0.4]),
                    (D.MvLogNormal([0, 0], np.eye(2)), [0.4, 2.0])]:
        assert math.isfinite(S.ccrps(dist, S.spec_t0(dist.dim), y).value)


def test_ccrps_rejects_ensembles():
    with pytest.raises(D.UnsupportedOperation):
        S.ccrps(D.EnsembleDist([[0.0, 0.0]]), S.spec_chain(2), [0.0, 0.0])


def test_energy_score_ensemble_examples():
    e = D.EnsembleDist([[0.0, 0.0], [2.0, 0.0]], [0.5, 0.5])
    assert S.energy_score(e, [0.0, 0.0]) == pytest.approx(0.5)
    one = D.EnsembleDist([[1.0, 2.0, 2.0]])
    assert S.energy_score(one, [0.0, 0.0, 0.0], beta=1.5) == pytest.approx(3.0**1.5)
    pts = np.random.default_rng(0).normal(size=(7, 1))
    assert S.energy_score(D.EnsembleDist(pts), [0.3]) == pytest.approx(crps_empirical(pts[:, 0], None, 0.3))
    with pytest.raises(DomainError):
        S.energy_score(e, [0.0, 0.0], beta=2.0)


def test_energy_score_ensemble_brute_force():
    rng = np.random.default_rng(2)
    pts, w, y = rng.normal(size=(6, 3)), rng.dirichlet(np.ones(6)), rng.normal(size=3)
    beta = 0.7
    brute = sum(w[i] * np.linalg.norm(pts[i] - y) ** beta for i in range(6))
    brute -= 0.5 * sum(w[i] * w[j] * np.linalg.norm(pts[i] - pts[j]) ** beta for i in range(6) for j in range(6))
    assert S.energy_score(D.EnsembleDist(pts, w), y, beta) == pytest.approx(brute, abs=1e-13)
    batch = S.energy_score_ensemble_batch(pts[None], y[None], beta, w)
    assert batch[0] == pytest.approx(brute, abs=1e-13)


def test_energy_score_mc_gaussian_d1_is_crps():
    g = D.MvGaussian([0.2], [[1.5]])
    vals = [S.energy_score(g, [1.0], n_mc=2000, rng=make_rng(s)) for s in range(30)]
    assert np.mean(vals) == pytest.approx(crps_gaussian(0.2, 1.5, 1.0), abs=4 * np.std(vals) / math.sqrt(30))
    with pytest.raises(ValueError):
        S.energy_score(g, [1.0])


def test_energy_score_deterministic_under_seed():
    g = D.MvGaussian([0, 0], np.eye(2))
    a = S.energy_score_many(g, np.ones((3, 2)), rng=make_rng(7))
    b = S.energy_score_many(g, np.ones((3, 2)), rng=make_rng(7))
    assert np.array_equal(a, b)


def test_variogram_examples():
    assert S.variogram_score(D.EnsembleDist([[1.0]]), [0.0], 1.0) == 0.0
    assert S.variogram_score(D.EnsembleDist([[0.0, 0.0]]), [0.0, 1.0], 1.0) == 1.0
    with pytest.raises(DomainError):
        S.variogram_score(D.EnsembleDist([[0.0, 0.0]]), [0.0, 1.0], 3.0)


def test_variogram_gaussian_p1_zero_mean():
    s = np.array([[1.0, 0.3], [0.3, 2.0]])
    m, _ = S.expected_abs_diff_power(D.MvGaussian([0.5, 0.5], s), 1.0)
    assert m[0] == pytest.approx(math.sqrt(1 + 2 - 0.6) * math.sqrt(2 / math.pi), rel=1e-13)


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
def test_variogram_mixture_analytic_vs_mc(p):
    rng = np.random.default_rng(int(p * 10))
    mix = random_mixture(rng, 3, 3)
    exact, _ = S.expected_abs_diff_power(mix, p)

    class Opaque(D.Distribution):
        dim = 3

        def sample(self, rng, n):
            return mix.sample(rng, n)

    mc, se = S.expected_abs_diff_power(Opaque(), p, n_mc=400_000, rng=make_rng(1))
    assert np.all(np.abs(exact - mc) < 4 * se)


def test_variogram_p2_identity():
    rng = np.random.default_rng(5)
    mix = random_mixture(rng, 3, 2)
    got, _ = S.expected_abs_diff_power(mix, 2.0)
    for k, (i, j) in enumerate(itertools.combinations(range(3), 2)):
        mh = mix.mus[:, i] - mix.mus[:, j]
        vh = mix.sigmas[:, i, i] + mix.sigmas[:, j, j] - 2 * mix.sigmas[:, i, j]
        assert got[k] == pytest.approx(mix.weights @ (vh + mh**2), abs=1e-10)
    # the hypergeometric path gives the same value
    hyp = S.gaussian_abs_moment(0.7, 1.3, 2.0)
    assert hyp == pytest.approx(1.3 + 0.49, abs=1e-12)


def test_variogram_ensemble_weighted():
    e = D.EnsembleDist([[0.0, 1.0, 3.0], [1.0, 1.0, 0.0]], [0.25, 0.75])
    y = np.array([0.5, 0.0, 1.0])
    expect = 0.0
    for i, j in itertools.combinations(range(3), 2):
        mom = 0.25 * abs(e.points[0, i] - e.points[0, j]) ** 0.5 + 0.75 * abs(e.points[1, i] - e.points[1, j]) ** 0.5
        expect += (abs(y[i] - y[j]) ** 0.5 - mom) ** 2
    assert S.variogram_score(e, y, 0.5) == pytest.approx(expect)


def test_log_score():
    g = D.MvGaussian([0, 0], np.eye(2))
    assert S.log_score(g, [0.0, 0.0]) == pytest.approx(math.log(2 * math.pi))
    assert S.log_score(D.MvMixtureGaussian((1.0,), (g,)), [0.3, 0.1]) == pytest.approx(S.log_score(g, [0.3, 0.1]))
    assert S.log_score(D.MvLogNormal([0, 0], np.eye(2)), [-1.0, 1.0]) == math.inf


def test_mle_biv():
    assert S.mle_biv(D.MvGaussian(np.zeros(3), np.eye(3)), np.zeros(3)) == pytest.approx(6 * math.log(2 * math.pi))
    g = D.MvGaussian([0.1, 0.2], [[1.0, 0.4], [0.4, 2.0]])
    y = np.array([0.5, -0.3])
    assert S.mle_biv(g, y) == pytest.approx(-2 * D.log_density(g, y))
    mix = random_mixture(np.random.default_rng(3), 2, 3)
    assert S.mle_biv(mix, y) == pytest.approx(-2 * D.log_density(mix, y))


def test_mean_score():
    g = D.MvGaussian([0, 0], np.eye(2))
    assert S.mean_score(S.log_score, g, [[0.0, 0.0]]) == pytest.approx(math.log(2 * math.pi))
    assert S.mean_score(S.log_score, lambda k: g, [[0.0, 0.0], [1.0, 0.0]]) == pytest.approx(
        math.log(2 * math.pi) + 0.25)
    with pytest.raises(ValueError):
        S.mean_score(S.log_score, g, [])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_fmean_order_independent(seed):
    rng = np.random.default_rng(seed)
    vals = rng.lognormal(0, 3, 500)
    assert S.fmean(vals) == S.fmean(rng.permutation(vals))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_ccrps_nonnegative(seed):
    rng = np.random.default_rng(seed)
    mix = random_mixture(rng, 3, 2)
    assert S.ccrps(mix, S.spec_t0(3), rng.normal(size=3)).value >= 0.0
