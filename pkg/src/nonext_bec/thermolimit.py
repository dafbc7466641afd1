"""Thermodynamic-limit quantities for the free and mean-field Bose gas.

Pressure and density of the free gas in d dimensions,

    p(alpha)   = g_{d/2+1}(e^{beta*alpha}) / (beta * lam_T^d)
    rho(alpha) = g_{d/2}(e^{beta*alpha}) / lam_T^d,      lam_T = sqrt(2*pi*beta/m)

for alpha <= 0, the critical density rho_c = rho(0) (finite only for d >= 3),
and the mean-field pressure as the variational infimum

    p_mf(mu) = inf_{alpha <= 0} [ p(alpha) + (mu - alpha)^2 / (4*lambda) ].

Every special-function value has two independent evaluation routes: a series
route (truncated Bose sum plus an Euler-Maclaurin tail built from exact
incomplete-gamma integrals) and an adaptive radial quadrature route.  The
series route is the default; the quadrature route exists so the two can be
cross-checked to 1e-10.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy import special as sp

from .errors import DivergenceError, DomainError
from .util import bisect_root

# Bernoulli numbers B_2, B_4, ... used by the Euler-Maclaurin tail.
_BERNOULLI_EVEN = (1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0)

_SERIES_CROSSOVER = 0.5   # direct Bose sum below, Euler-Maclaurin tail above
_TAIL_START = 128         # partial-sum length feeding the tail machinery


def _upper_gamma_nonpos(a: float, y: float) -> float:
    """Upper incomplete gamma Gamma(a, y) for a <= 0.5, y > 0.

    Downward recursion Gamma(a-1, y) = (Gamma(a, y) - y^(a-1) e^-y) / (a-1)
    from Gamma(1/2, y) = sqrt(pi) erfc(sqrt(y)) for half-integer a, or from
    Gamma(0, y) = E1(y) for integer a.  The subtraction only loses digits
    when y is large, where the whole tail is negligible anyway.
    """
    frac = a - math.floor(a)
    if abs(frac - 0.5) < 1e-12:
        cur_a = 0.5
        val = math.sqrt(math.pi) * sp.erfc(math.sqrt(y))
    elif frac < 1e-12 or frac > 1.0 - 1e-12:
        cur_a = 0.0
        a = round(a)
        val = sp.exp1(y)
    else:
        raise DomainError(f"incomplete gamma recursion needs (half-)integer a, got {a}")
    while cur_a > a + 1e-9:
        val = (val - y ** (cur_a - 1.0) * math.exp(-y)) / (cur_a - 1.0)
        cur_a -= 1.0
    return val


def _tail_integral(s: float, b: float, L: int) -> float:
    """Exact integral_L^inf e^(-b*x) x^(-s) dx for b >= 0."""
    if b == 0.0:
        if s <= 1.0:
            raise DivergenceError(f"tail integral diverges for s={s} at z=1")
        return L ** (1.0 - s) / (s - 1.0)
    y = b * L
    return b ** (s - 1.0) * _upper_gamma_nonpos(1.0 - s, y)


def _derivative_coeffs(s: float, b: float, order: int):
    """Coefficient table of f^(n)(x) = e^(-b*x) * sum_i c_i x^(-s-i)."""
    coeffs = {0: 1.0}
    for _ in range(order):
        nxt = {}
        for i, c in coeffs.items():
            nxt[i] = nxt.get(i, 0.0) - b * c
            nxt[i + 1] = nxt.get(i + 1, 0.0) + (-s - i) * c
        coeffs = nxt
    return coeffs


def _bose_g_from_b(s: float, b: float) -> float:
    """g_s(e^-b) = sum_{l>=1} e^(-b*l) / l^s for b >= 0.

    b > ln 2: plain truncated sum (geometric decay).  Otherwise partial sum
    to L plus Euler-Maclaurin tail: the integral term is an exact incomplete
    gamma and five Bernoulli corrections bring the remainder far below 1e-15.
    At b = 0 the same tail machinery yields zeta(s).
    """
    if b < 0.0:
        raise DomainError(f"fugacity above 1 (b={b})")
    if b == 0.0 and s <= 1.0:
        raise DivergenceError(f"g_{s}(1) diverges (s <= 1)")
    if b > -math.log(_SERIES_CROSSOVER):
        n_terms = max(8, int(math.ceil(45.0 / b)))
        l = np.arange(1, n_terms + 1, dtype=float)
        return float(np.sum(np.exp(-b * l) / l ** s))
    L = _TAIL_START
    l = np.arange(1, L + 1, dtype=float)
    partial = float(np.sum(np.exp(-b * l) / l ** s))
    tail = _tail_integral(s, b, L)
    f_L = math.exp(-b * L) * L ** (-s)
    tail -= 0.5 * f_L
    fact = 1.0
    for j, b2j in enumerate(_BERNOULLI_EVEN, start=1):
        order = 2 * j - 1
        fact *= (2 * j - 1) * (2 * j)
        deriv = sum(c * L ** (-s - i) for i, c in _derivative_coeffs(s, b, order).items())
        deriv *= math.exp(-b * L)
        tail -= b2j / fact * deriv
    return partial + tail


def bose_g(s: float, z: float) -> float:
    """Bose function g_s(z) for 0 <= z <= 1 (series route)."""
    if z < 0.0 or z > 1.0:
        raise DomainError(f"fugacity must lie in [0, 1], got {z}")
    if z == 0.0:
        return 0.0
    return _bose_g_from_b(s, -math.log(z))


def zeta(s: float) -> float:
    """zeta(s) = g_s(1) through the same tail machinery (s > 1)."""
    return _bose_g_from_b(s, 0.0)


def thermal_wavelength(beta: float, mass: float = 1.0) -> float:
    return math.sqrt(2.0 * math.pi * beta / mass)


def _sphere_surface(dimension: int) -> float:
    return 2.0 * math.pi ** (dimension / 2.0) / math.gamma(dimension / 2.0)


def _check_state(alpha, beta):
    if alpha > 0.0:
        raise DomainError(f"free-gas formulas need alpha <= 0, got {alpha}")
    if beta <= 0.0:
        raise DomainError(f"beta must be positive, got {beta}")


def bose_pressure(alpha: float, beta: float, mass: float = 1.0,
                  dimension: int = 3, method: str = "series") -> float:
    """Free-gas pressure p(alpha) in the thermodynamic limit."""
    _check_state(alpha, beta)
    s = dimension / 2.0 + 1.0
    if method == "series":
        return _bose_g_from_b(s, -beta * alpha) / (beta * thermal_wavelength(beta, mass) ** dimension)
    if method == "quadrature":
        pref = _sphere_surface(dimension) / (2.0 * math.pi) ** dimension / beta

        def integrand(k):
            x = beta * (k * k / (2.0 * mass) - alpha)
            return -(k ** (dimension - 1)) * math.log1p(-math.exp(-x))

        val, _ = integrate.quad(integrand, 0.0, np.inf,
                                epsabs=1e-13, epsrel=1e-12, limit=500)
        return pref * val
    raise DomainError(f"unknown method {method!r}")


def bose_density(alpha: float, beta: float, mass: float = 1.0,
                 dimension: int = 3, method: str = "series") -> float:
    """Free-gas density rho(alpha) = p'(alpha); diverges at alpha=0 for d <= 2."""
    _check_state(alpha, beta)
    s = dimension / 2.0
    if alpha == 0.0 and dimension <= 2:
        raise DivergenceError(f"critical density diverges for d={dimension}")
    if method == "series":
        return _bose_g_from_b(s, -beta * alpha) / thermal_wavelength(beta, mass) ** dimension
    if method == "quadrature":
        pref = _sphere_surface(dimension) / (2.0 * math.pi) ** dimension

        def integrand(k):
            x = beta * (k * k / (2.0 * mass) - alpha)
            e = math.exp(-x)
            return k ** (dimension - 1) * e / (1.0 - e)

        val, _ = integrate.quad(integrand, 0.0, np.inf,
                                epsabs=1e-13, epsrel=1e-12, limit=500)
        return pref * val
    raise DomainError(f"unknown method {method!r}")


def critical_density(beta: float, mass: float = 1.0, dimension: int = 3,
                     method: str = "series") -> float:
    """rho_c(beta) = rho(0); finite only for d >= 3."""
    return bose_density(0.0, beta, mass, dimension, method)


@dataclass(frozen=True)
class MeanFieldPoint:
    pressure: float
    alpha_star: float
    condensed: bool


def mf_pressure(mu: float, lam: float, beta: float, mass: float = 1.0,
                dimension: int = 3, method: str = "series") -> MeanFieldPoint:
    """Variational mean-field pressure and its minimizer alpha*.

    For mu < 2*lambda*rho_c the stationarity condition rho(alpha) =
    (mu - alpha)/(2*lambda) has a unique root alpha* < 0 (the objective's
    derivative is monotone); at and above the threshold alpha* sticks at 0.
    """
    if lam <= 0.0:
        raise DomainError(f"mean-field pressure needs lambda > 0, got {lam}")
    if beta <= 0.0:
        raise DomainError(f"beta must be positive, got {beta}")

    def rho(alpha):
        return bose_density(alpha, beta, mass, dimension, method)

    try:
        rho_c = critical_density(beta, mass, dimension, method)
    except DivergenceError:
        rho_c = math.inf

    if math.isfinite(rho_c) and mu >= 2.0 * lam * rho_c:
        alpha_star = 0.0
        condensed = True
    else:
        condensed = False

        def stationarity(alpha):
            return rho(alpha) - (mu - alpha) / (2.0 * lam)

        hi = 0.0
        if not math.isfinite(rho_c):
            # d <= 2: pull hi below 0 until the divergent side is positive
            hi = -1.0
            while stationarity(hi) <= 0.0:
                hi *= 0.5
                if abs(hi) < 1e-280:
                    raise DomainError("could not bracket alpha* near 0")
        lo = min(mu, hi) - 1.0
        while stationarity(lo) >= 0.0:
            lo = hi + 2.0 * (lo - hi)
            if lo < -1e12:
                raise DomainError("could not bracket alpha* from below")
        alpha_star = bisect_root(stationarity, lo, hi, xtol=1e-12)
    p = bose_pressure(alpha_star, beta, mass, dimension, method)
    p += (mu - alpha_star) ** 2 / (4.0 * lam)
    return MeanFieldPoint(pressure=float(p), alpha_star=float(alpha_star),
                          condensed=condensed)


def critical_beta(rho: float, mass: float = 1.0, dimension: int = 3) -> float:
    """Closed-form condensation temperature: beta_c = (m/2pi)(zeta(d/2)/rho)^(2/d)."""
    if dimension <= 2:
        raise DivergenceError(f"no finite critical beta for d={dimension}")
    if rho <= 0.0:
        raise DomainError(f"density must be positive, got {rho}")
    return mass / (2.0 * math.pi) * (zeta(dimension / 2.0) / rho) ** (2.0 / dimension)


def critical_beta_root(rho: float, mass: float = 1.0, dimension: int = 3) -> float:
    """Root-finder cross-check of critical_beta: solve rho_c(beta) = rho."""
    if dimension <= 2:
        raise DivergenceError(f"no finite critical beta for d={dimension}")

    def resid(beta):
        return critical_density(beta, mass, dimension) - rho

    lo, hi = 1e-6, 1.0
    while resid(lo) < 0.0:
        lo *= 0.5
        if lo < 1e-300:
            raise DomainError("could not bracket beta_c from below")
    while resid(hi) > 0.0:
        hi *= 2.0
        if hi > 1e300:
            raise DomainError("could not bracket beta_c from above")
    return bisect_root(resid, lo, hi, xtol=0.0, rtol=1e-14)


def band_integral_inside(delta: float, alpha: float, beta: float,
                         mass: float = 1.0, dimension: int = 3) -> float:
    """Density carried by modes |k| < delta in the limit: the regular band part."""
    if delta <= 0.0:
        raise DomainError(f"delta must be positive, got {delta}")
    _check_state(alpha, beta)
    if alpha == 0.0 and dimension <= 2:
        raise DivergenceError(f"band integral diverges at alpha=0 for d={dimension}")
    pref = _sphere_surface(dimension) / (2.0 * math.pi) ** dimension

    def integrand(k):
        x = beta * (k * k / (2.0 * mass) - alpha)
        if x > 700.0:  # expm1 overflows; 1/expm1(x) -> e^-x already
            return k ** (dimension - 1) * math.exp(-x)
        return k ** (dimension - 1) / math.expm1(x)

    val, _ = integrate.quad(integrand, 0.0, delta,
                            epsabs=1e-13, epsrel=1e-12, limit=500)
    return pref * val


def residual_band_integral(delta: float, beta: float, mass: float = 1.0,
                           dimension: int = 3) -> float:
    """Limit of the shifted high-band sum: int_{|k|>=delta} (e^{beta(eps - delta^2/8m)} - 1)^-1."""
    if delta <= 0.0:
        raise DomainError(f"delta must be positive, got {delta}")
    if beta <= 0.0:
        raise DomainError(f"beta must be positive, got {beta}")
    shift = delta * delta / (8.0 * mass)
    pref = _sphere_surface(dimension) / (2.0 * math.pi) ** dimension

    def integrand(k):
        x = beta * (k * k / (2.0 * mass) - shift)
        if x > 700.0:  # expm1 overflows; 1/expm1(x) -> e^-x already
            return k ** (dimension - 1) * math.exp(-x)
        return k ** (dimension - 1) / math.expm1(x)

    val, _ = integrate.quad(integrand, delta, np.inf,
                            epsabs=1e-13, epsrel=1e-12, limit=500)
    return pref * val


@dataclass(frozen=True)
class LimitQuantities:
    """Bundle of limit values at one (beta, mass, d) state, with method tags."""

    beta: float
    mass: float
    dimension: int
    alpha: float = math.nan
    pressure: float = math.nan
    density: float = math.nan
    rho_c: float = math.nan
    mu: float = math.nan
    alpha_star: float = math.nan
    pressure_mf: float = math.nan
    rho_target: float = math.nan
    beta_c: float = math.nan
    methods: dict = field(default_factory=dict)


def limit_point(beta: float, mass: float = 1.0, dimension: int = 3, *,
                alpha: float = None, mu: float = None, lam: float = None,
                rho: float = None, method: str = "series") -> LimitQuantities:
    """Evaluate whichever limit quantities the given inputs determine."""
    vals = {"beta": beta, "mass": mass, "dimension": dimension}
    tags = {}
    try:
        vals["rho_c"] = critical_density(beta, mass, dimension, method)
        tags["rho_c"] = method
    except DivergenceError:
        vals["rho_c"] = math.inf
        tags["rho_c"] = "divergent"
    if alpha is not None:
        vals["alpha"] = alpha
        vals["pressure"] = bose_pressure(alpha, beta, mass, dimension, method)
        tags["pressure"] = method
        try:
            vals["density"] = bose_density(alpha, beta, mass, dimension, method)
            tags["density"] = method
        except DivergenceError:
            vals["density"] = math.inf
            tags["density"] = "divergent"
    if mu is not None and lam is not None:
        pt = mf_pressure(mu, lam, beta, mass, dimension, method)
        vals["mu"] = mu
        vals["alpha_star"] = pt.alpha_star
        vals["pressure_mf"] = pt.pressure
        tags["pressure_mf"] = method + "+bisection"
    if rho is not None:
        vals["rho_target"] = rho
        vals["beta_c"] = critical_beta(rho, mass, dimension)
        tags["beta_c"] = "closed-form"
    return LimitQuantities(methods=tags, **vals)
