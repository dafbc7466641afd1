"""Infinite-volume formulas: Bose functions, critical lines, mean-field pressure."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonext_bec import (
    DivergenceError,
    DomainError,
    bose_density,
    bose_pressure,
    critical_beta,
    critical_density,
    mf_pressure,
)
from nonext_bec.thermolimit import (
    band_integral_inside,
    bose_g,
    critical_beta_root,
    limit_point,
    residual_band_integral,
    thermal_wavelength,
    zeta,
)

BETA = 0.6037732186507889  # 2 * critical_beta(1.0)


def test_bose_g_anchors():
    # g_s(1) = zeta(s); g_1(z) = -ln(1-z); small-z limit g_s(z) ~ z
    assert bose_g(1.5, 1.0) == pytest.approx(zeta(1.5), rel=1e-14)
    assert bose_g(2.5, 1.0) == pytest.approx(zeta(2.5), rel=1e-14)
    for z in (0.1, 0.5, 0.9):
        assert bose_g(1.0, z) == pytest.approx(-math.log1p(-z), rel=1e-13)
    assert bose_g(1.5, 1e-12) == pytest.approx(1e-12, rel=1e-10)


@given(alpha=st.floats(-8.0, -1e-3), beta=st.floats(0.05, 5.0))
@settings(max_examples=40, deadline=None)
def test_series_and_quadrature_agree(alpha, beta):
    for fn in (bose_pressure, bose_density):
        s = fn(alpha, beta, method="series")
        q = fn(alpha, beta, method="quadrature")
        assert q == pytest.approx(s, rel=1e-10, abs=1e-13)


def test_series_and_quadrature_agree_at_alpha_zero():
    s = bose_pressure(0.0, BETA, method="series")
    q = bose_pressure(0.0, BETA, method="quadrature")
    assert q == pytest.approx(s, rel=1e-10)
    sd = bose_density(0.0, BETA, method="series")
    qd = bose_density(0.0, BETA, method="quadrature")
    assert qd == pytest.approx(sd, rel=1e-10)


def test_density_closed_form():
    # rho(alpha) = g_{d/2}(e^{beta alpha}) / lambda_T^d
    lt = thermal_wavelength(BETA)
    for alpha in (-2.0, -0.7, -0.1, 0.0):
        want = bose_g(1.5, math.exp(BETA * alpha)) / lt ** 3
        assert bose_density(alpha, BETA) == pytest.approx(want, rel=1e-12)


def test_pressure_monotone_and_positive():
    alphas = np.linspace(-4.0, 0.0, 30)
    p = [bose_pressure(a, BETA) for a in alphas]
    assert all(x > 0.0 for x in p)
    assert all(b > a for a, b in zip(p, p[1:]))


def test_state_domain_checks():
    with pytest.raises(DomainError):
        bose_pressure(0.5, BETA)
    with pytest.raises(DomainError):
        bose_pressure(-1.0, 0.0)
    with pytest.raises(DivergenceError):
        critical_density(BETA, dimension=2)
    with pytest.raises(DivergenceError):
        bose_density(0.0, BETA, dimension=2)


def test_critical_beta_inverts_critical_density():
    for rho in (0.2, 1.0, 3.5):
        bc = critical_beta(rho)
        assert critical_density(bc) == pytest.approx(rho, rel=1e-13)
        assert critical_beta_root(rho) == pytest.approx(bc, rel=1e-12)


def test_critical_beta_headline_value():
    assert critical_beta(1.0) == pytest.approx(0.30188660932539446, abs=1e-15)


def test_mf_pressure_condensation_threshold():
    lam = 0.5
    thr = 2.0 * lam * critical_density(BETA)
    below = mf_pressure(thr - 1e-6, lam, BETA)
    above = mf_pressure(thr + 1e-6, lam, BETA)
    at = mf_pressure(thr, lam, BETA)
    assert not below.condensed and below.alpha_star < 0.0
    assert above.condensed and above.alpha_star == 0.0
    assert at.condensed and at.alpha_star == 0.0


def test_mf_pressure_is_variational_minimum():
    # p_mf(mu) = min over alpha <= 0 of [p_free(alpha) + (mu - alpha)^2 / 4 lam]
    lam = 0.5
    for mu in (0.1, 0.3535533905932738, 0.8):
        pt = mf_pressure(mu, lam, BETA)
        grid = np.linspace(-3.0, 0.0, 121)
        obj = [bose_pressure(a, BETA) + (mu - a) ** 2 / (4.0 * lam) for a in grid]
        assert min(obj) >= pt.pressure - 1e-9
        if not pt.condensed:
            at_star = bose_pressure(pt.alpha_star, BETA) + (
                mu - pt.alpha_star
            ) ** 2 / (4.0 * lam)
            assert at_star == pytest.approx(pt.pressure, rel=1e-12)


def test_mf_pressure_convex_increasing_in_mu():
    lam = 0.5
    mus = np.linspace(-0.5, 1.5, 41)
    p = [mf_pressure(m, lam, BETA).pressure for m in mus]
    assert all(b > a for a, b in zip(p, p[1:]))
    d2 = np.diff(p, 2)
    assert np.all(d2 > -1e-12)


def test_band_integrals():
    # inside-band density grows with delta and converges to the full density
    rho = bose_density(-0.4, BETA)
    parts = [band_integral_inside(d, -0.4, BETA) for d in (0.5, 1.0, 2.0, 12.0)]
    assert all(b > a for a, b in zip(parts, parts[1:]))
    assert parts[-1] == pytest.approx(rho, rel=1e-9)
    # residual band integral is finite and shrinks as the band widens
    r1 = residual_band_integral(0.5, BETA)
    r2 = residual_band_integral(1.5, BETA)
    assert 0.0 < r2 < r1


def test_limit_point_bundles():
    pt = limit_point(BETA, alpha=-0.3, mu=0.8, lam=0.5, rho=1.0)
    assert pt.pressure == pytest.approx(bose_pressure(-0.3, BETA), rel=1e-14)
    assert pt.rho_c == pytest.approx(critical_density(BETA), rel=1e-14)
    assert pt.pressure_mf == pytest.approx(mf_pressure(0.8, 0.5, BETA).pressure,
                                           rel=1e-14)
    assert pt.beta_c == pytest.approx(critical_beta(1.0), rel=1e-14)
    assert pt.methods["pressure"] == "series"
