import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnlab.bn_decompose import (
    decompose_check,
    estimate_population,
    linear_zeta_exact,
    verify_priors,
    zeta_of_h,
)
from bnlab.core import DegenerateError, DomainError
from bnlab.sgd_lab import StudentState, TeacherStudentConfig, make_dataset


def fitted_student(N=256, alpha=8.0, seed=0, convention="no_bias"):
    cfg = TeacherStudentConfig(N=N, M=16, alpha=alpha, S=0.25, seed=seed)
    _, X, y = make_dataset(cfg)
    w = np.linalg.lstsq(X, y, rcond=None)[0]
    h = X @ w
    z = (h - h.mean()) / h.std() if convention == "bias" else h / np.sqrt(np.mean(h * h))
    return X, y, StudentState(w, float(z @ y / (z @ z)))


# ---------------------------------------------------------------- population


def test_gaussian_population_moments():
    pop = estimate_population(np.random.default_rng(0).standard_normal(10**6))
    assert abs(pop.mu_P) < 0.01 and abs(pop.sigma_P - 1) < 0.01 and abs(pop.rho) < 0.05


def test_laplace_excess_kurtosis():
    pop = estimate_population(np.random.default_rng(1).laplace(size=10**6))
    assert pop.rho == pytest.approx(3.0, abs=0.2)


def test_population_errors():
    with pytest.raises(DegenerateError):
        estimate_population(np.full(5000, 2.0))
    with pytest.raises(DomainError):
        estimate_population(np.ones(10))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["normal", "uniform", "laplace", "exponential"]))
def test_kurtosis_lower_bound(seed, dist):
    h = getattr(np.random.default_rng(seed), dist)(size=2000)
    assert estimate_population(h).rho >= -2


# ---------------------------------------------------------------- priors


def test_gaussian_prior_variances():
    h = np.random.default_rng(2).standard_normal(10**6)
    rep = verify_priors(h, 32, 10**5, seed=0).by_name()
    assert rep["var_mu_B"].empirical == pytest.approx(1 / 32, rel=0.05)
    assert rep["var_sigma_B"].empirical == pytest.approx(1 / 64, rel=0.10)


def test_heavy_tailed_sigma_variance():
    h = np.random.default_rng(3).laplace(size=10**6) / math.sqrt(2)
    rep = verify_priors(h, 32, 10**5, seed=1).by_name()
    assert rep["var_sigma_B"].empirical == pytest.approx(5 / 128, rel=0.15)


def test_mean_noise_shrinks_with_batch_size():
    h = np.random.default_rng(4).standard_normal(20000)
    v = [verify_priors(h, M, 10**4, seed=0).by_name()["var_mu_B"].empirical for M in (16, 256, 4096)]
    assert v[0] > v[1] > v[2]
    assert v[2] < 1e-3


def test_prior_preconditions():
    h = np.random.default_rng(0).standard_normal(5000)
    with pytest.raises(DomainError):
        verify_priors(h, 4)
    with pytest.raises(DomainError):
        verify_priors(h, 16, trials=100)


# ---------------------------------------------------------------- zeta(h)


def test_gaussian_identity_zeta_is_quarter_over_M():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((200_000, 8))
    w = rng.standard_normal(8)
    for M in (16, 64):
        t = zeta_of_h(X, w, 1.0, 0.0, M)
        assert t.zeta == pytest.approx(1 / (4 * M), rel=0.02)


def test_zeta_scales_inversely_with_M():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((5000, 4))
    w = rng.standard_normal(4)
    z = [zeta_of_h(X, w, 0.8, 0.1, M, loss="softplus", convention="bias").zeta for M in (16, 32, 10**9)]
    assert z[0] / z[1] == pytest.approx(2.0, rel=1e-12)
    assert z[2] < 1e-9


@settings(max_examples=40, deadline=None)
@given(
    st.integers(0, 2**31),
    st.floats(-3, 3),
    st.floats(-2, 2),
    st.integers(2, 512),
    st.sampled_from(["no_bias", "bias"]),
    st.sampled_from(["sigmoid", "sigmoid_prime"]),
)
def test_zeta_components_in_range(seed, gamma, beta, M, convention, variant):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((400, 3))
    w = rng.standard_normal(3)
    t = zeta_of_h(X, w, gamma, beta, M, "softplus", convention, variant)
    assert t.zeta > 0 or (gamma == 0 and convention == "no_bias")
    assert t.fisher_term >= 0
    assert 0 < t.sigmoid_term < 1 / (2 * M)


def test_score_form_needs_labels():
    X = np.random.default_rng(0).standard_normal((100, 2))
    with pytest.raises(ValueError):
        zeta_of_h(X, np.ones(2), 1.0, 0.0, 16, fisher="score")


# ---------------------------------------------------------------- exact linear zeta


def test_exact_linear_zeta_domain():
    with pytest.raises(DomainError):
        linear_zeta_exact(4)


@pytest.mark.parametrize("M", [8, 32, 128])
def test_exact_linear_zeta_is_expected_squared_ratio_error(M):
    # sigma_B / sigma_P ~ chi_{M-1} / sqrt(M) for Gaussian h
    chi = np.sqrt(np.random.default_rng(M).chisquare(M - 1, size=2_000_000))
    d = (1 - math.sqrt(M) / chi) ** 2
    assert linear_zeta_exact(M) == pytest.approx(d.mean(), abs=4 * d.std() / math.sqrt(d.size))


def test_exact_linear_zeta_asymptote():
    vals = [M * linear_zeta_exact(M) for M in (16, 32, 64, 128, 256, 512, 1024)]
    assert all(0 < v < 1 for v in vals)
    assert np.all(np.diff(vals) < 0)
    assert vals[-1] == pytest.approx(0.5, rel=0.01)
    assert linear_zeta_exact(64, lam=0.5) == pytest.approx(linear_zeta_exact(64) / 2)


# ---------------------------------------------------------------- decomposition


def test_decomposition_identity_loss():
    X, y, s = fitted_student()
    rep = decompose_check(X, y, s, 64, 100_000, seed=0)
    assert rep.mc_stderr > 0
    assert rep.within()
    assert abs(rep.residual) <= max(3 * rep.mc_stderr, 0.1 * rep.zeta * rep.gamma**2)


def test_zero_scale_gives_zero_residual():
    X, y, s = fitted_student()
    rep = decompose_check(X, y, StudentState(s.w, 0.0, 0.3), 32, 2000, seed=1)
    assert abs(rep.residual) <= 3 * rep.mc_stderr
    assert rep.e_bn_mc == pytest.approx(rep.pn_loss)


def test_gap_scales_like_one_over_M():
    X, y, s = fitted_student()
    Ms = np.array([16, 32, 64, 128])
    gaps = [decompose_check(X, y, s, int(M), 50_000, seed=2).gap for M in Ms]
    slope = np.polyfit(np.log(Ms), np.log(gaps), 1)[0]
    assert -1.3 <= slope <= -0.7


def test_residual_is_second_order_in_one_over_M():
    ratios = []
    for seed in range(3):
        X, y, s = fitted_student(seed=seed)
        r = [decompose_check(X, y, s, M, 200_000, seed=seed).residual for M in (32, 64, 128)]
        ratios += [r[0] / r[1], r[1] / r[2]]
    assert 2.5 <= np.mean(ratios) <= 6


def test_softplus_report_and_json(tmp_path):
    X, _, s = fitted_student(N=64, alpha=20.0)
    rng = np.random.default_rng(0)
    y = (rng.random(X.shape[0]) < 1 / (1 + np.exp(-(X @ s.w)))).astype(float)
    student = StudentState(s.w, 1.0, 0.2)
    a = decompose_check(X, y, student, 32, 4000, seed=0, loss="softplus", convention="bias")
    b = decompose_check(X, y, student, 32, 4000, seed=0, loss="softplus", convention="bias",
                        variant="sigmoid_prime")
    assert a.sigmoid_term != b.sigmoid_term
    a.to_json(tmp_path / "r.json")
    keys = set(json.loads((tmp_path / "r.json").read_text()))
    assert {"e_bn_mc", "mc_stderr", "pn_loss", "zeta", "fisher_term", "sigmoid_term", "gamma",
            "residual", "M", "N", "convention"} <= keys


def test_decomposition_is_reproducible():
    X, y, s = fitted_student()
    a = decompose_check(X, y, s, 32, 10_000, seed=9)
    b = decompose_check(X, y, s, 32, 10_000, seed=9)
    assert a == b
