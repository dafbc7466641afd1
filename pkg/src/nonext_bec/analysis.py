"""State preparation, finite-size scaling, condensate classification, audits.

This layer glues the exact finite-volume engine to the infinite-volume
module: solve mu against a target density on each box of a volume ladder,
track how the ground mode and low-momentum band fill up, and classify the
condensation type from the trends.  It also evaluates a family of exact
inequality audits on computed moment tables; every audit is an identity or
a Jensen/ladder bound that the exact ensemble must satisfy, so a violation
beyond tolerance means the numerics (not the physics) broke.

Audit ids: og, in1, in2, in3, lemma4, lemma5, p1-jensen, pres-order.
The three ladder bounds come from reweighting moves on the Gibbs measure
(add one particle to mode k, remove one, exchange k against j) plus Jensen;
all reduce to exact equalities for the free gas, which the tests exploit.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, TruncationError
from .modes import BoxSpec, band_shells, enumerate_shells
from .partition import (
    EnsembleMoments,
    ModelParams,
    PartitionEngine,
    Variant,
    auto_tilt,
    engine_moments,
    free_occupation,
    free_pressure_exact,
)
from . import thermolimit as tl
from .util import bisect_root, grow_bracket_monotone

AUDIT_TOL = 1e-9
SIGMA_PAD = 14.0
MAX_DOUBLINGS = 6


# -- solved states -------------------------------------------------------------

@dataclass
class SolvedState:
    """One finite box brought to a target density by tuning mu."""

    box: BoxSpec
    shells: list
    params: ModelParams          # mu holds the solved value
    target_rho: float
    method: str                  # "dp" or "closed_form"
    engine: object               # PartitionEngine or None for closed_form
    mu_residual: float
    tail_mass: float
    certified: bool
    n_max: int
    mu_ref: float

    @property
    def volume(self) -> float:
        return self.box.volume


def _free_density(shells, beta: float, mu: float, volume: float) -> float:
    total = 0.0
    for sh in shells:
        total += sh.degeneracy / math.expm1(beta * (sh.energy - mu))
    return total / volume


def _solve_mu_free(shells, beta: float, rho: float, volume: float):
    # bisect on u = ln(-mu); density is monotone decreasing in u and spans
    # (0, huge) across u in [ln tiny, ln big], so the bracket always works
    def f(u):
        return rho - _free_density(shells, beta, -math.exp(u), volume)

    u = bisect_root(f, math.log(1e-18), math.log(200.0 / beta), xtol=1e-14)
    mu = -math.exp(u)
    resid = abs(_free_density(shells, beta, mu, volume) - rho) / max(1.0, rho)
    return mu, resid


def dp_grand_sizing(beta: float, lam: float, rho: float, volume: float) -> int:
    """Total-occupation cutoff comfortably past the confined N distribution."""
    sigma = math.sqrt(volume * (1.0 / (2.0 * beta * lam) + rho))
    need = rho * volume + SIGMA_PAD * sigma + 64.0
    return int(need / 0.9) + 1


def solve_mu(box: BoxSpec, variant: Variant, beta: float, rho: float,
             lam: float = 0.0, *, tail_tol: float = 1e-12,
             resid_tol: float = 1e-9, shells=None) -> SolvedState:
    """Tune mu so the exact finite-volume density hits rho.

    The density is strictly increasing in mu (its mu derivative is
    beta Var(N) / V > 0), so bracketed bisection is safe.  Interacting
    variants run on the convolution engine, whose assembly is reused across
    every bisection step; the free gas uses its closed product form.
    """
    if rho <= 0.0:
        raise DomainError(f"target density must be positive, got {rho}")
    if isinstance(variant, str):
        variant = Variant.parse(variant)
    shells = enumerate_shells(box) if shells is None else shells
    volume = box.volume

    if variant is Variant.FREE:
        mu, resid = _solve_mu_free(shells, beta, rho, volume)
        params = ModelParams(variant, beta, mu, 0.0)
        return SolvedState(box=box, shells=shells, params=params,
                           target_rho=rho, method="closed_form", engine=None,
                           mu_residual=resid, tail_mass=0.0, certified=True,
                           n_max=0, mu_ref=0.0)

    mu_center = 2.0 * lam * rho
    n_max = dp_grand_sizing(beta, lam, rho, volume)
    for attempt in range(MAX_DOUBLINGS):
        proto = ModelParams(variant, beta, mu_center, lam)
        mu_ref = auto_tilt(shells, proto, volume, n_max, rho * volume,
                           cap_mu=mu_center + 1.0)
        eng = PartitionEngine(shells, proto, volume, n_max, mu_ref=mu_ref,
                              cap_mu=mu_center + 1.0, tail_tol=tail_tol)

        def f(mu):
            return eng.grand(mu).mean_n / volume - rho

        lo, hi = grow_bracket_monotone(f, mu_center, max(0.5, abs(mu_center) / 2.0))
        mu = bisect_root(f, lo, hi, xtol=0.0, rtol=4e-16, max_iter=200)
        g = eng.grand(mu)
        resid = abs(g.mean_n / volume - rho) / max(1.0, rho)
        if g.tail_mass < tail_tol and eng.caps_valid_for(mu) and resid <= resid_tol:
            params = ModelParams(variant, beta, mu, lam)
            eng.params = params
            return SolvedState(box=box, shells=shells, params=params,
                               target_rho=rho, method="dp", engine=eng,
                               mu_residual=resid, tail_mass=g.tail_mass,
                               certified=True, n_max=n_max, mu_ref=mu_ref)
        n_max *= 2
        if mu > mu_center:
            mu_center = mu + 0.5
    raise TruncationError(
        f"state at rho={rho}, L={box.side_length} failed to certify "
        f"(n_max reached {n_max})"
    )


def fixed_mu_state(box: BoxSpec, params: ModelParams, *,
                   tail_tol: float = 1e-12, rho_hint: float = None,
                   shells=None) -> SolvedState:
    """Certified engine state at a prescribed mu (no density solving)."""
    shells = enumerate_shells(box) if shells is None else shells
    volume = box.volume
    if params.variant is Variant.FREE:
        rho = _free_density(shells, params.beta, params.mu, volume)
        return SolvedState(box=box, shells=shells, params=params,
                           target_rho=rho, method="closed_form", engine=None,
                           mu_residual=0.0, tail_mass=0.0, certified=True,
                           n_max=0, mu_ref=0.0)
    if rho_hint is None:
        mfp = tl.mf_pressure(params.mu, params.lam, params.beta,
                             box.mass, box.dimension)
        rho_hint = max((params.mu - mfp.alpha_star) / (2.0 * params.lam), 0.05)
    n_max = dp_grand_sizing(params.beta, params.lam, rho_hint, volume)
    for attempt in range(MAX_DOUBLINGS):
        mu_ref = auto_tilt(shells, params, volume, n_max, rho_hint * volume)
        eng = PartitionEngine(shells, params, volume, n_max, mu_ref=mu_ref,
                              tail_tol=tail_tol)
        g = eng.grand(params.mu)
        if g.tail_mass < tail_tol:
            return SolvedState(box=box, shells=shells, params=params,
                               target_rho=g.mean_n / volume, method="dp",
                               engine=eng, mu_residual=0.0,
                               tail_mass=g.tail_mass, certified=True,
                               n_max=n_max, mu_ref=mu_ref)
        n_max *= 2
    raise TruncationError(f"fixed-mu state at mu={params.mu} failed to certify")


# -- moment tables for solved states -----------------------------------------

def _free_moment_table(state: SolvedState, pairs=(), with_total=()) -> EnsembleMoments:
    beta, mu = state.params.beta, state.params.mu
    occ = np.array([free_occupation(sh.energy, beta, mu) for sh in state.shells])
    deg = np.array([sh.degeneracy for sh in state.shells], dtype=float)
    squares = occ * (2.0 * occ + 1.0)
    mean_n = float(np.dot(deg, occ))
    var_n = float(np.dot(deg, occ * (occ + 1.0)))
    pressure = free_pressure_exact(state.shells, beta, mu, state.volume)
    pair_vals = {}
    for (i, j) in pairs:
        pair_vals[(i, j)] = float(occ[i] * occ[j])  # independent modes
    cross = {i: float(occ[i] * (mean_n + occ[i] + 1.0)) for i in with_total}
    return EnsembleMoments(
        pressure=pressure,
        log_z=pressure * beta * state.volume,
        mean_n=mean_n,
        var_n=var_n,
        occupations=occ,
        squares=squares,
        pair_moments=pair_vals,
        cross_total=cross,
        tail_mass=0.0,
        certified=True,
        n_cap=0,
        n_max=0,
    )


def state_moments(state: SolvedState, *, pairs=(), with_total=()) -> EnsembleMoments:
    if state.method == "closed_form":
        return _free_moment_table(state, pairs=pairs, with_total=with_total)
    return engine_moments(state.engine, state.params.mu,
                          pairs=pairs, with_total=with_total)


def pressure_point(box: BoxSpec, params: ModelParams, *,
                   tail_tol: float = 1e-12, rho_hint: float = None,
                   shells=None):
    """Finite-volume pressure at fixed mu: (pressure, SolvedState)."""
    if params.variant is Variant.FREE:
        shells = enumerate_shells(box) if shells is None else shells
        return free_pressure_exact(shells, params.beta, params.mu, box.volume), None
    state = fixed_mu_state(box, params, tail_tol=tail_tol,
                           rho_hint=rho_hint, shells=shells)
    return state.engine.grand(params.mu).pressure, state


# -- inequality audits ---------------------------------------------------------

@dataclass(frozen=True)
class InequalityAudit:
    audit_id: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    skipped: bool = False
    shell: int = -1
    partner: int = -1
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "audit_id": self.audit_id, "lhs": self.lhs, "rhs": self.rhs,
            "margin": self.margin, "passed": self.passed,
            "skipped": self.skipped, "shell": self.shell,
            "partner": self.partner, "note": self.note,
        }


def _bound_audit(audit_id, lhs, rhs, *, tol=AUDIT_TOL, shell=-1, partner=-1,
                 note="") -> InequalityAudit:
    """Audit of lhs <= rhs with relative slack on the larger magnitude."""
    margin = rhs - lhs
    passed = margin >= -tol * max(1.0, abs(lhs), abs(rhs))
    return InequalityAudit(audit_id=audit_id, lhs=lhs, rhs=rhs, margin=margin,
                           passed=passed, shell=shell, partner=partner, note=note)


def _skip(audit_id, *, shell=-1, partner=-1, note="") -> InequalityAudit:
    return InequalityAudit(audit_id=audit_id, lhs=math.nan, rhs=math.nan,
                           margin=math.nan, passed=True, skipped=True,
                           shell=shell, partner=partner, note=note)


def audit_shell_selection(n_shells: int, budget: int = 8):
    """Deterministic spread of shell indices: the low band plus samples above."""
    if n_shells <= budget:
        return list(range(n_shells))
    picks = {0, 1, 2, 3, n_shells // 4, n_shells // 2, (3 * n_shells) // 4,
             n_shells - 1}
    return sorted(i for i in picks if i < n_shells)


def audit_og(state: SolvedState, table: EnsembleMoments,
             tol: float = AUDIT_TOL) -> InequalityAudit:
    """Variational lower bound: the pressure dominates every quasi-free trial.

    For a trial free ensemble at chemical potential t < 0,
    p >= p_free(t) + [ (mu - t) <N>_t - A <N^2>_t - C sum_k <N_k^2>_t ] / V.
    """
    p = state.params
    beta, volume = p.beta, state.volume
    a = p.pair_coupling / volume
    c = p.square_coupling / volume
    trials = [-2.0 / beta, -1.0 / beta, -0.5 / beta, -0.1 / beta, -0.02 / beta]
    if p.mu < 0.0:
        trials.append(p.mu)
    best = -math.inf
    best_t = math.nan
    deg = np.array([sh.degeneracy for sh in state.shells], dtype=float)
    eps = np.array([sh.energy for sh in state.shells], dtype=float)
    for t in trials:
        occ = 1.0 / np.expm1(beta * (eps - t))
        mean = float(np.dot(deg, occ))
        var = float(np.dot(deg, occ * (occ + 1.0)))
        sq = float(np.dot(deg, occ * (2.0 * occ + 1.0)))
        p0 = free_pressure_exact(state.shells, beta, t, volume)
        val = p0 + ((p.mu - t) * mean - a * (mean * mean + var) - c * sq) / volume
        if val > best:
            best, best_t = val, t
    return _bound_audit("og", best, table.pressure, tol=tol,
                        note=f"best trial t={best_t:.6g}")


def audit_in1(state, table, k: int, tol: float = AUDIT_TOL) -> InequalityAudit:
    """Add-one ladder + Jensen:
    beta[(eps_k - mu - A - C) <N_k> + 2A <N N_k> + 2C <N_k^2>]
        <= <N_k> ln((<N_k> + 1)/<N_k>).
    """
    p = state.params
    v = state.volume
    a, c = p.pair_coupling / v, p.square_coupling / v
    nk = float(table.occupations[k])
    if nk <= 0.0:
        return _skip("in1", shell=k, note="occupation underflowed")
    nnk = table.cross_total[k]
    nk2 = float(table.squares[k])
    eps_k = state.shells[k].energy
    lhs = p.beta * ((eps_k - p.mu - a - c) * nk + 2.0 * a * nnk + 2.0 * c * nk2)
    rhs = nk * math.log1p(1.0 / nk)
    return _bound_audit("in1", lhs, rhs, tol=tol, shell=k)


def audit_in2(state, table, k: int, tol: float = AUDIT_TOL) -> InequalityAudit:
    """Remove-one ladder + Jensen:
    (<N_k> + 1) ln((<N_k> + 1)/<N_k>)
        <= beta[(eps_k - mu + A + C)(<N_k> + 1) + 2A(<N N_k> + <N>)
                 + 2C(<N_k^2> + <N_k>)].
    """
    p = state.params
    v = state.volume
    a, c = p.pair_coupling / v, p.square_coupling / v
    nk = float(table.occupations[k])
    if nk <= 0.0:
        return _skip("in2", shell=k, note="occupation underflowed")
    nnk = table.cross_total[k]
    nk2 = float(table.squares[k])
    eps_k = state.shells[k].energy
    lhs = (nk + 1.0) * math.log1p(1.0 / nk)
    rhs = p.beta * ((eps_k - p.mu + a + c) * (nk + 1.0)
                    + 2.0 * a * (nnk + table.mean_n)
                    + 2.0 * c * (nk2 + nk))
    return _bound_audit("in2", lhs, rhs, tol=tol, shell=k)


def audit_in3(state, table, k: int, j: int = 0,
              tol: float = AUDIT_TOL) -> InequalityAudit:
    """Exchange ladder (move k -> j) + Jensen:
    beta[(eps_k - eps_j) <N_k> + 2C(<N_k^2> - <N_j N_k> - <N_k>)]
        <= <N_k> ln((<N_k> + 1)/<N_k>).
    The N^2 coupling drops out because the move conserves total N.
    """
    p = state.params
    c = p.square_coupling / state.volume
    nk = float(table.occupations[k])
    if nk <= 0.0:
        return _skip("in3", shell=k, partner=j, note="occupation underflowed")
    njk = table.pair_moments[(j, k)] if (j, k) in table.pair_moments \
        else table.pair_moments[(k, j)]
    nk2 = float(table.squares[k])
    eps_k, eps_j = state.shells[k].energy, state.shells[j].energy
    lhs = p.beta * ((eps_k - eps_j) * nk + 2.0 * c * (nk2 - njk - nk))
    rhs = nk * math.log1p(1.0 / nk)
    return _bound_audit("in3", lhs, rhs, tol=tol, shell=k, partner=j)


def audit_lemma4(state, table, k: int, delta: float, j: int = 0,
                 tol: float = AUDIT_TOL) -> InequalityAudit:
    """Band-exterior occupation bound at band radius delta:
    <N_k> <= 1/(e^{c_k} - 1) + (2A + 4C) <N_j N_k> / (1 - e^{-c_d})
    with c_k = beta(eps_k - delta^2/(8m) - 2(A + C)) and c_d its value at
    |k| = delta; applicable only where both exponents are positive.
    """
    p = state.params
    v = state.volume
    a, c = p.pair_coupling / v, p.square_coupling / v
    m = state.box.mass
    shift = delta * delta / (8.0 * m) + 2.0 * (a + c)
    c_k = p.beta * (state.shells[k].energy - shift)
    c_d = p.beta * (delta * delta / (2.0 * m) - shift)
    if c_k <= 0.0 or c_d <= 0.0:
        return _skip("lemma4", shell=k, partner=j,
                     note=f"outside applicability (c_k={c_k:.3g}, c_d={c_d:.3g})")
    njk = table.pair_moments[(j, k)] if (j, k) in table.pair_moments \
        else table.pair_moments[(k, j)]
    nk = float(table.occupations[k])
    rhs = 1.0 / math.expm1(c_k) + (2.0 * a + 4.0 * c) * njk / (-math.expm1(-c_d))
    return _bound_audit("lemma4", nk, rhs, tol=tol, shell=k, partner=j,
                        note=f"delta={delta:g}")


def _mean_field_twin(state: SolvedState) -> float:
    """Mean-field pressure on the same box at the same (beta, mu, lam)."""
    p = state.params
    mf = ModelParams(Variant.MEAN_FIELD, p.beta, p.mu, p.lam)
    n_max = max(state.n_max, 256)
    for attempt in range(MAX_DOUBLINGS):
        # flat ground-shell weights keep the mean-field Q representable
        # untilted at any volume, so the twin never borrows the state's tilt
        eng = PartitionEngine(state.shells, mf, state.volume, n_max,
                              tail_tol=1e-12)
        g = eng.grand(p.mu)
        if g.tail_mass < 1e-12:
            return g.pressure
        n_max *= 2
    raise TruncationError("mean-field twin failed to certify")


def audit_p1_jensen(state, table, p_mf: float,
                    tol: float = AUDIT_TOL) -> InequalityAudit:
    """0 <= (lam / 2V^2) sum_k g_k <N_k^2> <= p_mf - p at equal mu.

    Both bounds are Jensen applied to the reweighting that removes the
    per-mode quadratic term.
    """
    p = state.params
    if p.variant is not Variant.NON_EXTENSIVE:
        return _skip("p1-jensen", note="defined for the non-extensive model")
    deg = np.array([sh.degeneracy for sh in state.shells], dtype=float)
    jsum = p.lam / (2.0 * state.volume ** 2) * float(np.dot(deg, table.squares))
    gap = p_mf - table.pressure
    low = _bound_audit("p1-jensen", 0.0, jsum, tol=tol)
    high = _bound_audit("p1-jensen", jsum, gap, tol=tol)
    margin = min(low.margin, high.margin)
    return InequalityAudit(audit_id="p1-jensen", lhs=jsum, rhs=gap,
                           margin=margin, passed=low.passed and high.passed,
                           note="lhs = quadratic Jensen sum, rhs = pressure gap")


def audit_pres_order(state, table, p_mf: float,
                     tol: float = AUDIT_TOL) -> InequalityAudit:
    """p <= p_mf at equal mu, plus the exact bridge identity
    p_mf - p = ln omega(e^{beta lam sum N_k^2 / 2V}) / (beta V)
    evaluated through an independently ordered assembly.
    """
    p = state.params
    if p.variant is not Variant.NON_EXTENSIVE:
        return _skip("pres-order", note="defined for the non-extensive model")
    bridge = state.engine.bridge_log_expectation(p.mu) / (p.beta * state.volume)
    gap = p_mf - table.pressure
    dev = abs(gap - bridge)
    scale = max(1.0, abs(p_mf), abs(table.pressure))
    order = _bound_audit("pres-order", table.pressure, p_mf, tol=tol)
    passed = order.passed and dev <= tol * scale
    return InequalityAudit(audit_id="pres-order", lhs=table.pressure, rhs=p_mf,
                           margin=order.margin, passed=passed,
                           note=f"bridge identity deviation {dev:.3e}")


def run_point_audits(state: SolvedState, *, delta: float = 0.8,
                     shell_budget: int = 8, tol: float = AUDIT_TOL):
    """Every per-state audit on a deterministic shell selection."""
    idx = audit_shell_selection(len(state.shells), shell_budget)
    pairs = [(0, k) for k in idx if k != 0]
    table = state_moments(state, pairs=pairs, with_total=idx)
    out = [audit_og(state, table, tol=tol)]
    for k in idx:
        out.append(audit_in1(state, table, k, tol=tol))
        out.append(audit_in2(state, table, k, tol=tol))
    for k in idx:
        if k != 0:
            out.append(audit_in3(state, table, k, j=0, tol=tol))
            out.append(audit_lemma4(state, table, k, delta, j=0, tol=tol))
    if state.params.variant is Variant.NON_EXTENSIVE:
        p_mf = _mean_field_twin(state)
        out.append(audit_p1_jensen(state, table, p_mf, tol=tol))
        out.append(audit_pres_order(state, table, p_mf, tol=tol))
    else:
        out.append(_skip("p1-jensen", note="defined for the non-extensive model"))
        out.append(_skip("pres-order", note="defined for the non-extensive model"))
    return out


def audit_lemma5(volumes, cross_series, variant: Variant,
                 tol: float = AUDIT_TOL) -> InequalityAudit:
    """<N N_0> / V^2 must not increase with V for the non-extensive model."""
    vals = [c / v ** 2 for c, v in zip(cross_series, volumes)]
    diffs = [vals[i + 1] - vals[i] for i in range(len(vals) - 1)]
    worst = max(diffs) if diffs else 0.0
    note = "series " + ", ".join(f"{x:.6g}" for x in vals)
    if variant is not Variant.NON_EXTENSIVE:
        return InequalityAudit(audit_id="lemma5", lhs=worst, rhs=0.0,
                               margin=-worst, passed=True, skipped=True,
                               note="monotonicity asserted only for the "
                                    "non-extensive model; " + note)
    passed = worst <= tol * max(1.0, max(abs(x) for x in vals))
    return InequalityAudit(audit_id="lemma5", lhs=worst, rhs=0.0,
                           margin=-worst, passed=passed, note=note)


# -- scaling sweeps and classification ----------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    variant: Variant
    beta: float
    rho: float
    lam: float = 0.0
    sides: tuple = (4.0, 6.0, 8.0, 12.0, 16.0)
    deltas: tuple = (0.8, 1.2)
    band_mode: str = "k_norm"
    dimension: int = 3
    mass: float = 1.0
    mode_cut: float = 1.5        # n_max = ceil(mode_cut * L): fixed momentum cutoff
    theta: float = 1e-3
    stable_slope: float = -0.05
    decay_slope: float = -0.2
    fit_window: int = 3
    tail_tol: float = 1e-12

    def boxes(self):
        return [BoxSpec(self.dimension, L, int(math.ceil(self.mode_cut * L)),
                        self.mass) for L in self.sides]


@dataclass
class ScalingReport:
    config: SweepConfig
    volumes: list
    mu_series: list
    n0_over_v: list
    max_mode_density: list
    band_density: dict           # delta -> series
    band_excess: dict            # delta -> series
    cross_series: list           # <N N_0> per volume
    pressure_series: list
    alpha_eff_series: list
    n0_slope: float
    excess_slope: dict           # delta -> fitted exponent
    classification: str
    lemma5: InequalityAudit
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "variant": cfg.variant.value,
            "beta": cfg.beta, "rho": cfg.rho, "lam": cfg.lam,
            "sides": list(cfg.sides), "deltas": list(cfg.deltas),
            "theta": cfg.theta, "decay_slope": cfg.decay_slope,
            "volumes": self.volumes,
            "mu": self.mu_series,
            "n0_over_v": self.n0_over_v,
            "max_mode_density": self.max_mode_density,
            "band_density": {str(d): s for d, s in self.band_density.items()},
            "band_excess": {str(d): s for d, s in self.band_excess.items()},
            "cross_over_v2": [c / v ** 2 for c, v in
                              zip(self.cross_series, self.volumes)],
            "pressure": self.pressure_series,
            "alpha_eff": self.alpha_eff_series,
            "n0_slope": self.n0_slope,
            "excess_slope": {str(d): s for d, s in self.excess_slope.items()},
            "classification": self.classification,
            "lemma5": self.lemma5.to_dict(),
            "diagnostics": self.diagnostics,
        }


def fit_exponent(volumes, series, window: int) -> float:
    """Least-squares slope of ln(series) against ln(V) over the last points."""
    v = np.log(np.asarray(volumes[-window:], dtype=float))
    y = np.log(np.maximum(np.asarray(series[-window:], dtype=float), 1e-300))
    if len(v) < 2:
        raise DomainError("exponent fit needs at least two ladder points")
    return float(np.polyfit(v, y, 1)[0])


def _band_reference(shells, band_idx, alpha: float, beta: float,
                    volume: float) -> float:
    """Thermal band density of the free reference gas on the same lattice.

    At alpha = 0 (condensed reference) the zero mode is excluded: its
    entire weight is condensate there, which is exactly what band excess
    is meant to detect.
    """
    total = 0.0
    for i in band_idx:
        sh = shells[i]
        if sh.energy - alpha <= 0.0:
            continue
        total += sh.degeneracy / math.expm1(beta * (sh.energy - alpha))
    return total / volume


def classify(n0_series, excess_min_series, volumes, *, theta: float,
             stable_slope: float, decay_slope: float, window: int) -> str:
    n0_slope = fit_exponent(volumes, n0_series, window)
    exc_slope = fit_exponent(volumes, excess_min_series, window)
    if n0_series[-1] >= theta and n0_slope >= stable_slope:
        return "ground-state"
    if excess_min_series[-1] >= theta and exc_slope >= stable_slope:
        return "non-extensive" if n0_slope <= decay_slope else "generalized"
    return "none"


def _band_indices(shells, delta: float, band_mode: str):
    if band_mode == "k_norm":
        idx = [i for i, sh in enumerate(shells) if sh.k_norm < delta]
    elif band_mode == "energy":
        idx = [i for i, sh in enumerate(shells) if sh.energy < delta]
    else:
        raise DomainError(f"unknown band mode {band_mode!r}")
    return idx if 0 in idx else [0] + idx


def _subset_occupations(state: SolvedState, indices):
    """Per-shell occupation and pressure without a full moment table.

    The full table walks every shell's leave-one-out product, which is the
    dominant cost on large boxes; a sweep only needs the band.
    """
    if state.method == "closed_form":
        beta, mu = state.params.beta, state.params.mu
        occ = {i: free_occupation(state.shells[i].energy, beta, mu)
               for i in indices}
        mean = _free_density(state.shells, beta, mu, state.volume) * state.volume
        cross0 = occ[0] * (mean + occ[0] + 1.0)
        pressure = free_pressure_exact(state.shells, beta, mu, state.volume)
        return occ, cross0, pressure
    eng = state.engine
    g = eng.grand(state.params.mu)
    occ = {i: eng.shell_moments(i, state.params.mu, g.log_z)[0]
           for i in indices}
    cross0 = eng.shell_cross_total(0, state.params.mu, g.log_z)
    return occ, cross0, g.pressure


def scaling_sweep(cfg: SweepConfig) -> ScalingReport:
    """Solve the density target on every box and classify the condensate."""
    volumes, mu_series, n0_series, maxmode = [], [], [], []
    band_density = {d: [] for d in cfg.deltas}
    band_excess = {d: [] for d in cfg.deltas}
    cross_series, pressures, alphas, diagnostics = [], [], [], []
    for box in cfg.boxes():
        state = solve_mu(box, cfg.variant, cfg.beta, cfg.rho, cfg.lam,
                         tail_tol=cfg.tail_tol)
        shells = state.shells
        volume = box.volume
        needed = _band_indices(shells, max(cfg.deltas), cfg.band_mode)
        occ, cross0, pressure = _subset_occupations(state, needed)

        if cfg.variant is Variant.FREE:
            alpha_eff = state.params.mu
        else:
            mfp = tl.mf_pressure(state.params.mu, cfg.lam, cfg.beta,
                                 cfg.mass, cfg.dimension)
            alpha_eff = mfp.alpha_star
        deg = [sh.degeneracy for sh in shells]
        for d in cfg.deltas:
            idx = _band_indices(shells, d, cfg.band_mode)
            dens = sum(deg[i] * occ[i] for i in idx) / volume
            ref = _band_reference(shells, idx, alpha_eff, cfg.beta, volume)
            band_density[d].append(float(dens))
            band_excess[d].append(float(dens - ref))
        volumes.append(volume)
        mu_series.append(state.params.mu)
        n0_series.append(float(occ[0]) / volume)
        maxmode.append(max(occ.values()) / volume)
        cross_series.append(float(cross0))
        pressures.append(float(pressure))
        alphas.append(alpha_eff)
        diagnostics.append({
            "side": box.side_length, "n_shells": len(shells),
            "method": state.method, "mu_residual": state.mu_residual,
            "tail_mass": state.tail_mass, "certified": state.certified,
            "n_max": state.n_max, "mu_ref": state.mu_ref,
        })

    d_min = min(cfg.deltas)
    label = classify(n0_series, band_excess[d_min], volumes,
                     theta=cfg.theta, stable_slope=cfg.stable_slope,
                     decay_slope=cfg.decay_slope, window=cfg.fit_window)
    lemma5 = audit_lemma5(volumes, cross_series, cfg.variant)
    return ScalingReport(
        config=cfg,
        volumes=volumes,
        mu_series=mu_series,
        n0_over_v=n0_series,
        max_mode_density=maxmode,
        band_density=band_density,
        band_excess=band_excess,
        cross_series=cross_series,
        pressure_series=pressures,
        alpha_eff_series=alphas,
        n0_slope=fit_exponent(volumes, n0_series, cfg.fit_window),
        excess_slope={d: fit_exponent(volumes, band_excess[d], cfg.fit_window)
                      for d in cfg.deltas},
        classification=label,
        lemma5=lemma5,
        diagnostics=diagnostics,
    )


# -- audit fixture grid --------------------------------------------------------

def default_fixture_grid():
    """30 audited state points: every variant, several couplings, three boxes."""
    grid = []
    sides = (4.0, 6.0, 8.0)
    nonext = [(0.6037732186507889, 1.0, 0.5), (1.0, 0.8, 0.75),
              (0.35, 0.5, 0.5), (0.9, 1.2, 1.0)]
    meanfield = [(0.6037732186507889, 1.0, 0.5), (0.8, 0.6, 0.6),
                 (0.45, 0.9, 0.8)]
    free = [(0.6037732186507889, 0.25, 0.0), (0.35, 0.4, 0.0),
            (1.2, 0.1, 0.0)]
    for variant, combos in ((Variant.NON_EXTENSIVE, nonext),
                            (Variant.MEAN_FIELD, meanfield),
                            (Variant.FREE, free)):
        for beta, rho, lam in combos:
            for side in sides:
                grid.append({
                    "variant": variant, "beta": beta, "rho": rho,
                    "lam": lam, "side": side,
                })
    return grid


def _ground_cross_total(state: SolvedState) -> float:
    """<N N_0> of a solved state (closed form when the modes are independent)."""
    if state.method == "closed_form":
        p = state.params
        o0 = free_occupation(state.shells[0].energy, p.beta, p.mu)
        mean = _free_density(state.shells, p.beta, p.mu, state.volume) * state.volume
        return o0 * (mean + o0 + 1.0)
    return state.engine.shell_cross_total(0, state.params.mu)


def audit_grid_point(spec: dict, *, delta: float = 0.8,
                     shell_budget: int = 8, tol: float = AUDIT_TOL,
                     mode_cut: float = 1.5):
    """Solve one fixture point, audit it, and hand back its ladder datum.

    Returns (record, combo_key, volume, <N N_0>); stateless, so grid points
    can run on any worker in any order.
    """
    box = BoxSpec(3, spec["side"], int(math.ceil(mode_cut * spec["side"])))
    state = solve_mu(box, spec["variant"], spec["beta"], spec["rho"],
                     spec["lam"])
    audits = run_point_audits(state, delta=delta,
                              shell_budget=shell_budget, tol=tol)
    record = {
        "point": {k: (v.value if isinstance(v, Variant) else v)
                  for k, v in spec.items()},
        "mu": state.params.mu,
        "audits": [a.to_dict() for a in audits],
        "passed": all(a.passed for a in audits),
    }
    combo = (spec["variant"], spec["beta"], spec["rho"], spec["lam"])
    return record, combo, state.volume, _ground_cross_total(state)


def run_fixture_audits(*, delta: float = 0.8, shell_budget: int = 8,
                       tol: float = AUDIT_TOL, mode_cut: float = 1.5,
                       grid=None, map_fn=None):
    """Solve and audit every grid point; returns (records, all_passed).

    Besides the per-point audits, each (variant, beta, rho, lam) combo with
    at least two box sides contributes one lemma5 record over its volume
    ladder (the decay statement compares volumes, so it cannot live on a
    single point).  map_fn may be a thread pool's map; records keep grid
    order regardless.
    """
    grid = default_fixture_grid() if grid is None else grid
    map_fn = map if map_fn is None else map_fn

    def work(spec):
        return audit_grid_point(spec, delta=delta, shell_budget=shell_budget,
                                tol=tol, mode_cut=mode_cut)

    records = []
    all_ok = True
    ladders = {}
    for record, combo, volume, cross0 in map_fn(work, grid):
        all_ok = all_ok and record["passed"]
        records.append(record)
        ladders.setdefault(combo, []).append((volume, cross0))
    for (variant, beta, rho, lam), series in ladders.items():
        if len(series) < 2:
            continue
        series.sort()
        vols = [v for v, _c in series]
        cross = [c for _v, c in series]
        audit = audit_lemma5(vols, cross, variant)
        all_ok = all_ok and audit.passed
        records.append({
            "point": {"variant": variant.value, "beta": beta, "rho": rho,
                      "lam": lam, "side": "ladder"},
            "mu": None,
            "audits": [audit.to_dict()],
            "passed": audit.passed,
        })
    return records, all_ok
