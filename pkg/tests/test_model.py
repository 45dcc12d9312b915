import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from vasicek_put.model import (
    MarketModel,
    OptionContract,
    VasicekParams,
    bond_price,
    bond_price_dr,
    forward_correlation,
    forward_rate,
    g,
    log_variance,
    mean_integral,
    pricing_inputs,
    rate_log_cov,
    rate_moments,
    rate_variance,
)

P0 = VasicekParams(kappa=0.3, theta=0.05, beta=0.01)


def test_parameter_validation():
    with pytest.raises(ValueError):
        VasicekParams(0.0, 0.05, 0.01)
    with pytest.raises(ValueError):
        VasicekParams(0.3, 0.05, -0.01)
    with pytest.raises(ValueError):
        MarketModel(P0, sigma=0.0, rho=0.0)
    with pytest.raises(ValueError):
        MarketModel(P0, sigma=0.2, rho=1.0)
    with pytest.raises(ValueError):
        OptionContract(strike=0.0, maturity=1.0)
    with pytest.raises(ValueError):
        OptionContract(strike=100.0, maturity=0.0)


def test_g_examples():
    assert g(0.3, 0.0) == 0.0
    assert abs(g(1e-12, 2.0) - 2.0) < 1e-9
    assert g(0.0, 1.7) == 1.7
    mp.mp.dps = 50
    exact = (1 - mp.e ** mp.mpf("-0.3")) / mp.mpf("0.3")
    assert abs(g(0.3, 1.0) - float(exact)) < 1e-16


def test_g_small_argument_relative_error():
    mp.mp.dps = 40
    for au in [1e-14, 1e-10, 1e-6, 1e-3, 0.1]:
        a, u = au, 1.0
        exact = -mp.expm1(-mp.mpf(a) * u) / mp.mpf(a)
        assert abs(g(a, u) / float(exact) - 1) < 1e-14


@given(st.floats(1e-6, 50.0), st.floats(0.0, 30.0), st.floats(1e-6, 5.0))
def test_g_bounds_and_monotone(a, u, h):
    v = g(a, u)
    assert 0.0 <= v <= u * (1 + 1e-15)
    assert g(a, u + h) >= v


def test_rate_moments_zero_horizon():
    m = rate_moments(P0, 0.03, 0.4, 0.4)
    assert m.mean_rate == 0.03
    assert m.var_rate == 0.0
    assert m.mean_int == 0.0
    assert m.var_int == 0.0


def test_rate_moments_expected_rate_weights():
    # weight on r in E[r_1] is exp(-kappa)
    p = VasicekParams(0.1, 0.05, 0.01)
    w = rate_moments(p, 1.0, 0, 1).mean_rate - rate_moments(p, 0.0, 0, 1).mean_rate
    assert abs(w - np.exp(-0.1)) < 1e-15
    assert round(w, 2) == 0.90
    p = VasicekParams(1.0, 0.05, 0.01)
    w1 = rate_moments(p, 1.0, 0, 1).mean_rate - rate_moments(p, 0.0, 0, 1).mean_rate
    assert abs(w1 - np.exp(-1.0)) < 1e-15
    theta_w = rate_moments(VasicekParams(1.0, 1.0, 0.0), 0.0, 0, 1).mean_rate
    assert abs(theta_w - (1 - np.exp(-1.0))) < 1e-15  # 0.632, the formula's value


def test_rate_moments_domain():
    with pytest.raises(ValueError):
        rate_moments(P0, 0.05, 1.0, 0.5)
    with pytest.raises(ValueError):
        bond_price(P0, 1.0, 0.05, 0.5)


def test_cov_int_rate_matches_quadrature():
    k, b, d = 0.3, 0.01, 1.0
    # Cov(int_0^d r, r_d) = b^2 int_0^d g(k, d - u) exp(-k (d - u)) du
    val, _ = integrate.quad(lambda u: b**2 * g(k, d - u) * np.exp(-k * (d - u)), 0, d, epsabs=1e-16, epsrel=1e-13)
    assert abs(rate_moments(P0, 0.04, 0, d).cov_int_rate - val) < 1e-10


def test_var_int_matches_quadrature():
    for d in [1e-4, 0.01, 0.5, 1.0, 10.0]:
        val, _ = integrate.quad(lambda u: P0.beta**2 * g(P0.kappa, d - u) ** 2, 0, d, epsabs=0, epsrel=1e-13)
        assert abs(rate_moments(P0, 0.0, 0, d).var_int / val - 1) < 1e-10


def test_var_int_equals_rate_only_log_variance():
    m = MarketModel(P0, sigma=1e-300, rho=0.0)
    for d in np.linspace(0.0, 3.0, 31):
        v1 = rate_moments(P0, 0.0, 0.0, d).var_int
        assert abs(v1 - log_variance(m, d)) <= 1e-12 * max(v1, 1e-300)


def test_bond_price_examples():
    assert bond_price(P0, 0.7, 0.05, 0.7) == 1.0
    p = VasicekParams(0.3, 0.05, 0.0)
    assert bond_price(p, 0.0, 0.04, 2.0) == pytest.approx(np.exp(-mean_integral(p, 0.04, 0.0, 2.0)), rel=1e-15)


def test_bond_price_monte_carlo():
    # independent oracle: draw int r directly from its Gaussian law
    m = rate_moments(P0, 0.0478, 0.0, 1.0)
    z = np.random.default_rng(42).standard_normal(10**6)
    s = np.exp(-(m.mean_int + np.sqrt(m.var_int) * z))
    se = s.std(ddof=1) / np.sqrt(s.size)
    assert abs(s.mean() - bond_price(P0, 0.0, 0.0478, 1.0)) < 3 * se


def test_bond_price_decreasing_in_r():
    rs = np.linspace(-0.1, 0.2, 61)
    for T in [0.1, 1.0, 5.0]:
        p = bond_price(P0, 0.0, rs, T)
        assert np.all(np.diff(p) < 0)
        fd = (bond_price(P0, 0.0, rs + 1e-6, T) - bond_price(P0, 0.0, rs - 1e-6, T)) / 2e-6
        assert np.allclose(fd, bond_price_dr(P0, 0.0, rs, T), rtol=1e-6)


def test_forward_rate_is_log_bond_slope():
    for u in [0.1, 0.5, 1.0]:
        h = 1e-6
        fd = -(np.log(bond_price(P0, 0, 0.03, u + h)) - np.log(bond_price(P0, 0, 0.03, u - h))) / (2 * h)
        assert abs(fd - forward_rate(P0, 0, 0.03, u)) < 1e-8


def test_pricing_inputs_examples():
    model, contract = MarketModel.default(), OptionContract.default()
    pi = pricing_inputs(model, contract, 0.3, 0.3, 0.04, 90.0)
    assert pi.q == 0.04
    assert pi.degenerate and pi.rho_tilde == 0.0
    flat = MarketModel(VasicekParams(0.3, 0.05, 0.0), sigma=0.4, rho=0.0)
    assert pricing_inputs(flat, contract, 0.2, 0.9, 0.05, 80.0).gamma1 == pytest.approx(0.7 * 0.16, rel=1e-14)
    with pytest.raises(ValueError):
        pricing_inputs(model, contract, 0.5, 0.4, 0.05, 80.0)
    with pytest.raises(ValueError):
        pricing_inputs(model, contract, 0.0, 0.5, 0.05, 0.0)
    with pytest.raises(ValueError):
        pricing_inputs(model, contract, 0.0, 1.5, 0.05, 80.0)


def _kernel_cov(model, d):
    # covariance of (log X_d, r_d) from the Brownian kernels, by quadrature
    k, b, s, rho = model.rates.kappa, model.rates.beta, model.sigma, model.rho
    q = lambda f: integrate.quad(f, 0, d, epsabs=0, epsrel=1e-12)[0]
    va = q(lambda v: s**2 + 2 * rho * s * b * g(k, d - v) + b**2 * g(k, d - v) ** 2)
    vy = q(lambda v: b**2 * np.exp(-2 * k * (d - v)))
    cay = q(lambda v: (rho * s + b * g(k, d - v)) * b * np.exp(-k * (d - v)))
    return np.array([[va, cay], [cay, vy]])


def test_forward_quantities_match_kernels():
    model = MarketModel.default()
    for d in [0.01, 0.5, 1.0, 3.0]:
        c = _kernel_cov(model, d)
        assert log_variance(model, d) == pytest.approx(c[0, 0], rel=1e-10)
        assert rate_variance(model, d) == pytest.approx(c[1, 1], rel=1e-10)
        assert rate_log_cov(model, d) == pytest.approx(c[0, 1], rel=1e-10)


def test_rho_tilde_monte_carlo():
    model, contract = MarketModel.default(), OptionContract.default()
    c = _kernel_cov(model, 1.0)
    z = np.random.default_rng(7).standard_normal((10**6, 2)) @ np.linalg.cholesky(c).T
    sample = np.corrcoef(z.T)[0, 1]
    rt = pricing_inputs(model, contract, 0.0, 1.0, 0.0478, 82.11).rho_tilde
    se = (1 - sample**2) / np.sqrt(z.shape[0])
    assert abs(sample - rt) < 3 * se


@settings(max_examples=200)
@given(
    st.floats(0.0, 0.99), st.floats(1e-4, 1.0), st.floats(-0.1, 0.2), st.floats(1.0, 500.0),
    st.floats(0.01, 3.0), st.floats(0.0, 0.1), st.floats(0.01, 1.0), st.floats(-0.99, 0.99),
)
def test_pricing_inputs_properties(t, frac, r, x, kappa, beta, sigma, rho):
    model = MarketModel(VasicekParams(kappa, 0.05, beta), sigma, rho)
    contract = OptionContract(100.0, 1.0)
    u = min(t + frac * (1.0 - t), 1.0)
    if u <= t:
        return
    pi = pricing_inputs(model, contract, t, u, r, x)
    assert pi.gamma1 >= 0 and pi.gamma2 >= 0
    assert -1 <= pi.rho_tilde <= 1
    assert abs((pi.d1 - pi.d2) - np.sqrt(pi.gamma1)) <= 4 * np.finfo(float).eps * max(abs(pi.d1), 1.0)
    assert -1 <= forward_correlation(model, u - t) <= 1
