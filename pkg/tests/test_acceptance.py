"""End-to-end acceptance battery: nine graded criteria, one verdict line each.

Each test computes its criterion verbatim at the stated tolerance, prints one
PASS/FAIL line through capsys.disabled() so the verdict shows in ordinary
pytest runs, then asserts.  Heavy artifacts (volume ladders, scaling sweeps)
are session fixtures shared across criteria.
"""

import math
import time

import numpy as np
import pytest

from nonext_bec import (
    BoxSpec,
    ModelParams,
    PartitionEngine,
    Variant,
    bose_density,
    bose_pressure,
    critical_beta,
    critical_density,
    enumerate_shells,
    fixed_mu_state,
    mf_pressure,
    pressure_point,
    run_fixture_audits,
    scaling_sweep,
)
from nonext_bec.analysis import SweepConfig
from nonext_bec.oracle import default_toy_suite, engine_deviation
from nonext_bec.partition import free_occupation, free_pressure_exact
from nonext_bec.thermolimit import critical_beta_root

BETA_C = 0.30188660932539446        # critical inverse temperature at rho = 1
BETA = 2.0 * BETA_C                 # headline condensed state
LAM = 0.5
MU_STAR = 2.0 * LAM * critical_density(BETA)   # condensation threshold in mu


def verdict(capsys, num: int, ok: bool, detail: str):
    with capsys.disabled():
        print(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})",
              flush=True)


def box_of(side) -> BoxSpec:
    return BoxSpec(3, float(side), int(math.ceil(1.5 * side)))


def free_engine(shells, beta: float, mu: float, volume: float):
    """DP engine for the free gas, sized from its own closed-form moments."""
    occ = [free_occupation(sh.energy, beta, mu) for sh in shells]
    mean = sum(sh.degeneracy * o for sh, o in zip(shells, occ))
    var = sum(sh.degeneracy * o * (1.0 + o) for sh, o in zip(shells, occ))
    n_max = int(mean + 16.0 * math.sqrt(var) + 60.0 / (beta * abs(mu))) + 64
    params = ModelParams(Variant.FREE, beta, mu, 0.0)
    return PartitionEngine(shells, params, volume, n_max)


# -- shared heavy artifacts ----------------------------------------------------

@pytest.fixture(scope="session")
def pressure_ladder():
    """Finite-volume non-extensive pressure over L in {4,6,8,12,16}."""
    out = {}
    for mu in (0.25, 0.8):
        params = ModelParams(Variant.NON_EXTENSIVE, BETA, mu, LAM)
        rows = []
        for side in (4, 6, 8, 12, 16):
            p, state = pressure_point(box_of(side), params)
            rows.append((side, p, state.certified))
        out[mu] = rows
    return out


@pytest.fixture(scope="session")
def fixture_audits():
    return run_fixture_audits()


@pytest.fixture(scope="session")
def headline_report():
    return scaling_sweep(SweepConfig(variant=Variant.NON_EXTENSIVE,
                                     beta=BETA, rho=1.0, lam=LAM))


@pytest.fixture(scope="session")
def free_cold_report():
    return scaling_sweep(SweepConfig(variant=Variant.FREE, beta=BETA,
                                     rho=1.0, lam=0.0))


@pytest.fixture(scope="session")
def free_hot_report():
    return scaling_sweep(SweepConfig(variant=Variant.FREE, beta=0.5 * BETA_C,
                                     rho=1.0, lam=0.0))


# -- the nine criteria ---------------------------------------------------------

def test_criterion_1_oracle_equivalence(capsys):
    t0 = time.monotonic()
    suite = default_toy_suite()
    in_class = [t for t in suite
                if len(t.shell_groups()) <= 4 and max(t.caps) <= 6]
    variants = {t.params.variant for t in in_class}
    worst = 0.0
    for toy in suite:
        worst = max(worst, engine_deviation(toy)["max_rel_dev"])
    elapsed = time.monotonic() - t0
    ok = (len(in_class) >= 10 and len(variants) == 3
          and worst <= 1e-10 and elapsed < 60.0)
    verdict(capsys, 1, ok,
            f"{len(suite)} toys ({len(in_class)} with <=4 shells, caps <=6), "
            f"worst rel dev {worst:.2e} vs 1e-10, {elapsed:.1f}s")
    assert len(in_class) >= 10
    assert variants == {Variant.FREE, Variant.MEAN_FIELD,
                        Variant.NON_EXTENSIVE}
    assert worst <= 1e-10
    assert elapsed < 60.0


def test_criterion_2_free_closed_forms(capsys):
    box = box_of(4)
    shells = enumerate_shells(box)
    betas = (0.4, 0.6, 1.0, 1.6, 2.2)
    mus = (-1.2, -0.6, -0.3, -0.15)
    worst = 0.0
    n_points = 0
    for beta in betas:
        for mu in mus:
            eng = free_engine(shells, beta, mu, box.volume)
            g = eng.grand(mu)
            assert g.tail_mass < 1e-12
            p_exact = free_pressure_exact(shells, beta, mu, box.volume)
            worst = max(worst, abs(g.pressure - p_exact) / abs(p_exact))
            occ, _ = eng.occupations(mu)
            for i, sh in enumerate(shells):
                nbar = free_occupation(sh.energy, beta, mu)
                worst = max(worst, abs(occ[i] - nbar) / max(nbar, 1e-300))
            n_points += 1
    ok = n_points >= 20 and worst <= 1e-10
    verdict(capsys, 2, ok,
            f"{n_points} (beta, mu<0) points, worst rel dev {worst:.2e} "
            f"vs 1e-10 on pressure and every <N_k>")
    assert n_points >= 20
    assert worst <= 1e-10


def test_criterion_3_thermodynamic_consistency(capsys):
    points = [
        (Variant.NON_EXTENSIVE, BETA, 0.8, LAM, 4),
        (Variant.NON_EXTENSIVE, BETA, 0.25, LAM, 4),
        (Variant.NON_EXTENSIVE, 1.0, 0.5, 0.75, 4),
        (Variant.NON_EXTENSIVE, 0.35, 0.2, LAM, 6),
        (Variant.MEAN_FIELD, BETA, 0.8, LAM, 4),
        (Variant.MEAN_FIELD, 0.8, 0.3, 0.6, 4),
        (Variant.MEAN_FIELD, 0.45, 0.55, 0.8, 6),
        (Variant.FREE, BETA, -0.5, 0.0, 4),
        (Variant.FREE, 1.2, -0.2, 0.0, 4),
        (Variant.FREE, 0.6, -1.0, 0.0, 6),
    ]
    h = 1e-5
    worst = 0.0
    for variant, beta, mu, lam, side in points:
        box = box_of(side)
        params = ModelParams(variant, beta, mu, lam)
        if variant is Variant.FREE:
            eng = free_engine(enumerate_shells(box), beta, mu, box.volume)
        else:
            eng = fixed_mu_state(box, params).engine
        g0 = eng.grand(mu)
        gp = eng.grand(mu + h)
        gm = eng.grand(mu - h)
        dp = (gp.pressure - gm.pressure) / (2.0 * h)
        dn = (gp.mean_n - gm.mean_n) / (2.0 * h)
        worst = max(
            worst,
            abs(dp - g0.mean_n / box.volume) / abs(g0.mean_n / box.volume),
            abs(dn - beta * g0.var_n) / abs(beta * g0.var_n),
        )
    ok = len(points) >= 10 and worst <= 1e-5
    verdict(capsys, 3, ok,
            f"{len(points)} state points, worst rel dev {worst:.2e} vs 1e-5 "
            f"for dp/dmu = <N>/V and d<N>/dmu = beta Var(N)")
    assert len(points) >= 10
    assert worst <= 1e-5


def test_criterion_4_finite_volume_ordering_and_identity(capsys):
    worst_gap_dev = 0.0
    order_ok = True
    n_points = 0
    for side in (4, 6):
        box = box_of(side)
        vol = box.volume
        for mu in (0.25, 0.8, 1.2):
            nx = fixed_mu_state(
                box, ModelParams(Variant.NON_EXTENSIVE, BETA, mu, LAM))
            mf = fixed_mu_state(
                box, ModelParams(Variant.MEAN_FIELD, BETA, mu, LAM))
            p_tilde = nx.engine.grand(mu).pressure
            p_mf = mf.engine.grand(mu).pressure
            gap = p_mf - p_tilde
            order_ok = order_ok and (gap >= -1e-12 * max(1.0, abs(p_mf)))
            ident = nx.engine.bridge_log_expectation(mu) / (BETA * vol)
            worst_gap_dev = max(worst_gap_dev,
                                abs(gap - ident) / max(1.0, abs(gap)))
            n_points += 1
    ok = order_ok and worst_gap_dev <= 1e-9
    verdict(capsys, 4, ok,
            f"{n_points} points: p_tilde <= p_mf everywhere, gap identity "
            f"worst dev {worst_gap_dev:.2e} vs 1e-9")
    assert order_ok
    assert worst_gap_dev <= 1e-9


def test_criterion_5_pressure_convergence(capsys, pressure_ladder):
    assert 0.25 < MU_STAR < 0.8    # sampled mu straddle the threshold
    details = []
    ok = True
    for mu, rows in sorted(pressure_ladder.items()):
        p_mf = mf_pressure(mu, LAM, BETA).pressure
        assert all(cert for _s, _p, cert in rows)
        gaps = [abs(p - p_mf) for _s, p, _c in rows]
        monotone = all(b < a for a, b in zip(gaps, gaps[1:]))
        final_frac = gaps[-1] / p_mf
        ok = ok and monotone and final_frac < 0.05
        details.append(f"mu={mu}: gaps {gaps[0]:.4f}->{gaps[-1]:.4f}, "
                       f"final {100 * final_frac:.2f}% of p_mf, "
                       f"monotone={monotone}")
    verdict(capsys, 5, ok,
            f"L in (4,6,8,12,16), threshold 2*lam*rho_c={MU_STAR:.4f}; "
            + "; ".join(details))
    for mu, rows in pressure_ladder.items():
        p_mf = mf_pressure(mu, LAM, BETA).pressure
        gaps = [abs(p - p_mf) for _s, p, _c in rows]
        assert all(b < a for a, b in zip(gaps, gaps[1:])), mu
        assert gaps[-1] < 0.05 * p_mf, mu


def test_criterion_6_inequality_audits(capsys, fixture_audits):
    records, all_ok = fixture_audits
    points = [r for r in records if r["point"]["side"] != "ladder"]
    ladders = [r for r in records if r["point"]["side"] == "ladder"]
    counts = {}
    worst_margin = math.inf
    lemma4_live = 0
    for rec in records:
        for a in rec["audits"]:
            counts[a["audit_id"]] = counts.get(a["audit_id"], 0) + 1
            if not a["skipped"]:
                if a["audit_id"] == "lemma4":
                    lemma4_live += 1
                if not math.isnan(a["margin"]):
                    worst_margin = min(worst_margin, a["margin"])
    families = {"og", "in1", "in2", "in3", "lemma4", "lemma5", "p1-jensen",
                "pres-order"}
    ok = (all_ok and len(points) >= 30 and set(counts) == families
          and lemma4_live > 0)
    verdict(capsys, 6, ok,
            f"{len(points)} state points + {len(ladders)} decay ladders, "
            f"{sum(counts.values())} audits over {len(counts)} families, "
            f"{lemma4_live} non-vacuous lemma4, worst margin "
            f"{worst_margin:.2e} (tolerance -1e-9 relative)")
    assert len(points) >= 30
    assert set(counts) == families
    assert lemma4_live > 0
    assert all_ok


def test_criterion_7_headline_condensation(capsys, headline_report,
                                           free_cold_report, free_hot_report):
    rep = headline_report
    n0 = rep.n0_over_v
    strictly_down = all(b < a for a, b in zip(n0, n0[1:]))
    delta_min = min(rep.band_density)
    band_final = rep.band_density[delta_min][-1]
    rho_c = critical_density(BETA)
    band_floor = 1.0 - rho_c - 0.05 * 1.0
    ok = (strictly_down and rep.n0_slope < -0.2
          and band_final >= band_floor
          and rep.classification == "non-extensive"
          and free_cold_report.classification == "ground-state"
          and free_hot_report.classification == "none")
    verdict(capsys, 7, ok,
            f"n0/V decreasing={strictly_down} slope={rep.n0_slope:.3f} "
            f"(< -0.2), band({delta_min})={band_final:.4f} >= "
            f"{band_floor:.4f}, labels: {rep.classification} / "
            f"{free_cold_report.classification} / "
            f"{free_hot_report.classification}")
    assert strictly_down
    assert rep.n0_slope < -0.2
    assert band_final >= band_floor
    assert rep.classification == "non-extensive"
    assert free_cold_report.classification == "ground-state"
    assert free_hot_report.classification == "none"


def test_criterion_8_limit_formulas(capsys):
    worst_pq = 0.0
    for beta in (BETA, 1.0):
        for alpha in (-2.0, -1.0, -0.5, -0.2, -0.05, 0.0):
            ps = bose_pressure(alpha, beta, method="series")
            pq = bose_pressure(alpha, beta, method="quadrature")
            rs = bose_density(alpha, beta, method="series")
            rq = bose_density(alpha, beta, method="quadrature")
            worst_pq = max(worst_pq, abs(ps - pq) / abs(ps),
                           abs(rs - rq) / abs(rs))
    worst_bc = max(abs(critical_beta(r) - critical_beta_root(r))
                   / critical_beta(r) for r in (0.5, 1.0, 2.0))
    worst_var = 0.0
    grid = np.linspace(-3.0, 0.0, 601)
    for mu in (0.1, 0.25, MU_STAR, 0.5, 0.8, 1.2):
        pt = mf_pressure(mu, LAM, BETA)

        def objective(a):
            return bose_pressure(a, BETA) + (mu - a) ** 2 / (4.0 * LAM)

        floor = min(objective(a) for a in grid)
        worst_var = max(worst_var,
                        pt.pressure - floor,       # grid never dips below
                        abs(objective(pt.alpha_star) - pt.pressure))
    ok = worst_pq <= 1e-10 and worst_bc <= 1e-12 and worst_var <= 1e-9
    verdict(capsys, 8, ok,
            f"series/quadrature worst {worst_pq:.2e} vs 1e-10 (alpha grid "
            f"incl 0), beta_c closed-vs-root worst {worst_bc:.2e} vs 1e-12, "
            f"alpha* variational worst {worst_var:.2e} vs 1e-9")
    assert worst_pq <= 1e-10
    assert worst_bc <= 1e-12
    assert worst_var <= 1e-9


def test_criterion_9_cli_determinism(capsys, tmp_path):
    import json as _json

    from nonext_bec.cli import main as cli_main

    audit_cfg = tmp_path / "audit.json"
    audit_cfg.write_text(_json.dumps({
        "schema_version": 1,
        "audit": {"grid": [
            {"variant": "non_extensive", "beta": BETA, "rho": 1.0,
             "lam": 0.5, "side": 4},
            {"variant": "non_extensive", "beta": BETA, "rho": 1.0,
             "lam": 0.5, "side": 6},
            {"variant": "mean_field", "beta": 0.8, "rho": 0.6, "lam": 0.6,
             "side": 4},
            {"variant": "free", "beta": 1.2, "rho": 0.1, "lam": 0.0,
             "side": 4},
        ]},
    }))
    pressure_cfg = tmp_path / "pressure.json"
    pressure_cfg.write_text(_json.dumps({
        "schema_version": 1,
        "model": {"variant": "non_extensive", "beta": BETA, "lam": 0.5},
        "box": {"sides": [4, 6]},
        "pressure": {"mu_values": [0.25, 0.8]},
    }))
    oracle_cfg = tmp_path / "oracle.json"
    oracle_cfg.write_text(_json.dumps({"schema_version": 1}))

    jobs = [("audit", audit_cfg), ("pressure", pressure_cfg),
            ("oracle-check", oracle_cfg)]
    mismatches = []
    for command, cfg in jobs:
        snapshots = []
        for threads in (1, 2, 8):
            out = tmp_path / f"{command}-t{threads}"
            rc = cli_main([command, "--config", str(cfg), "--out", str(out),
                           "--threads", str(threads)])
            assert rc == 0, (command, threads)
            snapshots.append({p.name: p.read_bytes()
                              for p in sorted(out.iterdir())})
        if not (snapshots[0] == snapshots[1] == snapshots[2]):
            mismatches.append(command)
    ok = not mismatches
    verdict(capsys, 9, ok,
            "byte-identical outputs across 1/2/8 threads for audit, "
            "pressure, oracle-check"
            + (f"; MISMATCH in {mismatches}" if mismatches else ""))
    assert not mismatches
