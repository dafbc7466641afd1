"""Command-line interface: config ingestion, orchestration, result emission.

Commands write one CSV of tabular results plus one JSON summary into the
output directory.  All numbers are serialized at 17 significant digits and
worker results are assembled in input order, so identical configs produce
byte-identical files at any thread count.

Exit codes: 0 success, 2 configuration, 3 certification, 4 audit failure,
5 resource limits.
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from . import thermolimit as tl
from .analysis import (
    SweepConfig,
    default_fixture_grid,
    pressure_point,
    run_fixture_audits,
    scaling_sweep,
)
from .config import SCHEMA_VERSION, RunConfig, default_config, load_config
from .errors import (
    ConfigError,
    DomainError,
    NonextBecError,
    SizingError,
    TruncationError,
)
from .modes import BoxSpec, enumerate_shells
from .oracle import default_toy_suite, engine_deviation
from .partition import (
    ModelParams,
    PartitionEngine,
    Variant,
    free_occupation,
    free_pressure_exact,
)
from .util import fmt17

log = logging.getLogger("nonext_bec.cli")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CERTIFICATION = 3
EXIT_AUDIT = 4
EXIT_RESOURCE = 5

_CROSS_CHECK_TOL = 1e-10


# -- emission helpers ----------------------------------------------------------

def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return fmt17(value)
    return str(value)


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(c) for c in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    log.info("wrote %s (%d rows)", path, len(rows))


def _write_summary(path: Path, cfg: RunConfig, command: str, payload: dict):
    doc = {
        "tool": "nonext-bec",
        "tool_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config_sha256": cfg.sha256,
    }
    doc.update(payload)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    log.info("wrote %s", path)


def _pool_map(fn, items, threads: int):
    """Order-preserving parallel map; falls back to a plain loop."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _box_for(cfg: RunConfig, side: float) -> BoxSpec:
    box = cfg.box
    return BoxSpec(box.dimension, side,
                   max(1, int(math.ceil(box.mode_cut * side))), box.mass)


# -- pressure ------------------------------------------------------------------

def _free_dp_pressure(shells, beta: float, mu: float, volume: float,
                      tail_tol: float) -> float:
    """Free pressure through the convolution engine (independent of the
    product closed form, used as an in-process column cross-check)."""
    params = ModelParams(Variant.FREE, beta, mu, 0.0)
    occ = [free_occupation(e, beta, mu) for e, _g in
           ((sh.energy, sh.degeneracy) for sh in shells)]
    deg = [sh.degeneracy for sh in shells]
    mean = sum(g * o for g, o in zip(deg, occ))
    var = sum(g * o * (o + 1.0) for g, o in zip(deg, occ))
    n_max = int((mean + 14.0 * math.sqrt(var) + 64.0) / 0.9) + 1
    for _attempt in range(8):
        eng = PartitionEngine(shells, params, volume, n_max,
                              tail_tol=tail_tol)
        g = eng.grand(mu)
        if g.tail_mass < tail_tol:
            return g.pressure
        n_max *= 2
    raise TruncationError("free-gas pressure cross-check failed to certify")


def cmd_pressure(cfg: RunConfig, out: Path, threads: int) -> int:
    cfg.need("model", "box", "pressure")
    model = cfg.model
    tail_tol = cfg.tolerances.tail
    tasks = [(mu, side) for mu in cfg.pressure.mu_values
             for side in cfg.box.sides]

    def one(task):
        mu, side = task
        box = _box_for(cfg, side)
        shells = enumerate_shells(box)
        if model.variant is Variant.FREE:
            p_fin = free_pressure_exact(shells, model.beta, mu, box.volume)
            p_dp = _free_dp_pressure(shells, model.beta, mu, box.volume,
                                     tail_tol)
            if abs(p_dp - p_fin) > _CROSS_CHECK_TOL * max(1.0, abs(p_fin)):
                raise TruncationError(
                    f"free-gas pressure cross-check failed at mu={mu}, "
                    f"L={side}: closed={p_fin!r}, engine={p_dp!r}")
            p_lim = tl.bose_pressure(mu, model.beta, cfg.box.mass,
                                     cfg.box.dimension)
            return (side, box.volume, mu, p_fin, p_fin, p_lim, mu, 0.0)
        params = ModelParams(model.variant, model.beta, mu, model.lam)
        p_fin, state = pressure_point(box, params, tail_tol=tail_tol,
                                      rho_hint=None, shells=shells)
        if model.variant is Variant.MEAN_FIELD:
            p_mf_fin = p_fin
        else:
            mf = ModelParams(Variant.MEAN_FIELD, model.beta, mu, model.lam)
            p_mf_fin, _ = pressure_point(box, mf, tail_tol=tail_tol,
                                         rho_hint=None, shells=shells)
        lim = tl.mf_pressure(mu, model.lam, model.beta, cfg.box.mass,
                             cfg.box.dimension)
        return (side, box.volume, mu, p_fin, p_mf_fin, lim.pressure,
                lim.alpha_star, state.tail_mass)

    rows = _pool_map(one, tasks, threads)
    _write_csv(out / "pressure.csv",
               ("L", "V", "mu", "pressure_finite", "pressure_mf_finite",
                "pressure_mf_limit", "alpha_star", "tail_mass"), rows)
    gaps = {}
    for row in rows:
        # relative distance to the limit at the largest volume per mu
        side, _v, mu, p_fin, _pmf, p_lim = row[:6]
        if side == max(cfg.box.sides):
            gaps[fmt17(mu)] = abs(p_fin - p_lim) / max(1e-300, abs(p_lim))
    _write_summary(out / "pressure_summary.json", cfg, "pressure", {
        "variant": model.variant.value,
        "beta": model.beta,
        "lam": model.lam,
        "mu_values": list(cfg.pressure.mu_values),
        "sides": list(cfg.box.sides),
        "rows": len(rows),
        "final_rel_gap_to_limit": gaps,
    })
    return EXIT_OK


# -- sweep ---------------------------------------------------------------------

def cmd_sweep(cfg: RunConfig, out: Path, threads: int) -> int:
    cfg.need("model", "box", "sweep")
    model, sw = cfg.model, cfg.sweep
    sweep_cfg = SweepConfig(
        variant=model.variant, beta=model.beta, rho=sw.rho, lam=model.lam,
        sides=cfg.box.sides, deltas=sw.deltas, band_mode=sw.band_mode,
        dimension=cfg.box.dimension, mass=cfg.box.mass,
        mode_cut=cfg.box.mode_cut, theta=sw.theta,
        stable_slope=sw.stable_slope, decay_slope=sw.decay_slope,
        fit_window=sw.fit_window, tail_tol=cfg.tolerances.tail)
    report = scaling_sweep(sweep_cfg)

    header = ["L", "V", "mu", "n0_over_v", "max_mode_density"]
    for d in sw.deltas:
        header.append(f"band_density_{d:g}")
    for d in sw.deltas:
        header.append(f"band_excess_{d:g}")
    header += ["cross_over_v2", "pressure", "alpha_eff", "mu_ref",
               "tail_mass", "n_max"]
    rows = []
    for i, diag in enumerate(report.diagnostics):
        row = [diag["side"], report.volumes[i], report.mu_series[i],
               report.n0_over_v[i], report.max_mode_density[i]]
        row += [report.band_density[d][i] for d in sw.deltas]
        row += [report.band_excess[d][i] for d in sw.deltas]
        row += [report.cross_series[i] / report.volumes[i] ** 2,
                report.pressure_series[i], report.alpha_eff_series[i],
                diag["mu_ref"], diag["tail_mass"], diag["n_max"]]
        rows.append(row)
    _write_csv(out / "sweep.csv", header, rows)
    _write_summary(out / "sweep_summary.json", cfg, "sweep",
                   report.to_dict())
    return EXIT_OK


# -- audit ---------------------------------------------------------------------

def _apply_hooks(records, hooks, tol: float):
    if "negate_in2" not in hooks:
        return records
    # test hook: flip the sign of every in2 margin so the audit must fail
    for rec in records:
        for a in rec["audits"]:
            if a["audit_id"] == "in2" and not a["skipped"]:
                a["margin"] = -a["margin"]
                scale = max(1.0, abs(a["lhs"]), abs(a["rhs"]))
                a["passed"] = a["margin"] >= -tol * scale
        rec["passed"] = all(a["passed"] for a in rec["audits"])
    return records


def cmd_audit(cfg: RunConfig, out: Path, threads: int) -> int:
    block = cfg.audit
    tol = cfg.tolerances.audit
    grid = list(block.grid) if block.grid is not None else default_fixture_grid()

    def map_fn(fn, items):
        return _pool_map(fn, items, threads)

    records, _ok = run_fixture_audits(delta=block.delta,
                                      shell_budget=block.shell_budget,
                                      tol=tol, grid=grid, map_fn=map_fn)
    keep = set(block.ids)
    for rec in records:
        rec["audits"] = [a for a in rec["audits"] if a["audit_id"] in keep]
        rec["passed"] = all(a["passed"] for a in rec["audits"])
    records = _apply_hooks(records, block.hooks, tol)

    rows = []
    n_pass = n_fail = n_skip = 0
    worst = {}
    for rec in records:
        pt = rec["point"]
        for a in rec["audits"]:
            if a["skipped"]:
                status = "skipped"
                n_skip += 1
            elif a["passed"]:
                status = "pass"
                n_pass += 1
            else:
                status = "fail"
                n_fail += 1
            if not a["skipped"]:
                key = a["audit_id"]
                if key not in worst or a["margin"] < worst[key]:
                    worst[key] = a["margin"]
            rows.append((a["audit_id"], pt["variant"], pt["beta"], pt["rho"],
                         pt["lam"], pt["side"], a["shell"], a["partner"],
                         a["lhs"], a["rhs"], a["margin"], status, a["note"]))
    _write_csv(out / "audit.csv",
               ("audit_id", "variant", "beta", "rho", "lam", "side", "shell",
                "partner", "lhs", "rhs", "margin", "status", "note"), rows)
    all_passed = n_fail == 0
    _write_summary(out / "audit_summary.json", cfg, "audit", {
        "points": len(records),
        "audits_passed": n_pass,
        "audits_failed": n_fail,
        "audits_skipped": n_skip,
        "worst_margin_by_id": {k: worst[k] for k in sorted(worst)},
        "hooks": list(block.hooks),
        "ids": list(block.ids),
        "all_passed": all_passed,
    })
    return EXIT_OK if all_passed else EXIT_AUDIT


# -- oracle check --------------------------------------------------------------

def cmd_oracle_check(cfg: RunConfig, out: Path, threads: int) -> int:
    tol = cfg.oracle.tolerance
    toys = default_toy_suite()
    results = _pool_map(engine_deviation, toys, threads)
    rows = []
    max_dev = 0.0
    for r in results:
        flagged = r["tail_mass"] > cfg.tolerances.tail
        max_dev = max(max_dev, r["max_rel_dev"])
        rows.append((r["name"], r["variant"], r["n_configs"], r["log_z_dev"],
                     r["moment_dev"], r["max_rel_dev"], r["tail_mass"],
                     flagged))
    _write_csv(out / "oracle_check.csv",
               ("name", "variant", "n_configs", "log_z_dev", "moment_dev",
                "max_rel_dev", "tail_mass", "flagged"), rows)
    passed = max_dev <= tol
    _write_summary(out / "oracle_summary.json", cfg, "oracle-check", {
        "toys": len(rows),
        "max_rel_dev": max_dev,
        "tolerance": tol,
        "flagged": [r[0] for r in rows if r[7]],
        "passed": passed,
    })
    return EXIT_OK if passed else EXIT_AUDIT


# -- limits --------------------------------------------------------------------

def cmd_limits(cfg: RunConfig, out: Path, threads: int) -> int:
    cfg.need("model", "limits")
    model, lim = cfg.model, cfg.limits
    mass = cfg.box.mass if cfg.box is not None else 1.0
    dim = cfg.box.dimension if cfg.box is not None else 3
    beta = model.beta
    if lim.mu_values and model.lam <= 0.0:
        raise ConfigError("limits mu_values need an interacting model (lam > 0)")

    def alpha_row(alpha):
        ps = tl.bose_pressure(alpha, beta, mass, dim, method="series")
        pq = tl.bose_pressure(alpha, beta, mass, dim, method="quadrature")
        rs = tl.bose_density(alpha, beta, mass, dim, method="series")
        rq = tl.bose_density(alpha, beta, mass, dim, method="quadrature")
        return (alpha, ps, pq, abs(ps - pq) / max(1e-300, abs(ps)),
                rs, rq, abs(rs - rq) / max(1e-300, abs(rs)))

    def mu_row(mu):
        pt = tl.mf_pressure(mu, model.lam, beta, mass, dim)
        return (mu, pt.alpha_star, pt.pressure, pt.condensed)

    alpha_rows = _pool_map(alpha_row, lim.alpha_values, threads)
    mu_rows = _pool_map(mu_row, lim.mu_values, threads)
    if alpha_rows:
        _write_csv(out / "limits_alpha.csv",
                   ("alpha", "pressure_series", "pressure_quadrature",
                    "pressure_rel_dev", "density_series",
                    "density_quadrature", "density_rel_dev"), alpha_rows)
    if mu_rows:
        _write_csv(out / "limits_mu.csv",
                   ("mu", "alpha_star", "pressure_mf", "condensed"), mu_rows)
    payload = {
        "beta": beta,
        "mass": mass,
        "dimension": dim,
        "alpha_points": len(alpha_rows),
        "mu_points": len(mu_rows),
        "rho_c_series": tl.critical_density(beta, mass, dim, "series"),
        "rho_c_quadrature": tl.critical_density(beta, mass, dim,
                                                "quadrature"),
    }
    if lim.beta_c_density is not None:
        payload["beta_c_density"] = lim.beta_c_density
        payload["beta_c_closed"] = tl.critical_beta(lim.beta_c_density, mass,
                                                    dim)
        payload["beta_c_root"] = tl.critical_beta_root(lim.beta_c_density,
                                                       mass, dim)
    _write_summary(out / "limits_summary.json", cfg, "limits", payload)
    return EXIT_OK


# -- modes ---------------------------------------------------------------------

def cmd_modes(cfg: RunConfig, out: Path, threads: int) -> int:
    cfg.need("box")

    def one(side):
        box = _box_for(cfg, side)
        shells = enumerate_shells(box)
        rows = [(side, i, sh.norm2, sh.energy, sh.degeneracy, sh.k_norm,
                 " ".join(str(c) for c in sh.rep_vector))
                for i, sh in enumerate(shells)]
        return rows, len(shells), sum(sh.degeneracy for sh in shells)

    per_side = _pool_map(one, cfg.box.sides, threads)
    rows = [row for chunk, _ns, _nm in per_side for row in chunk]
    _write_csv(out / "modes.csv",
               ("L", "shell_index", "norm2", "energy", "degeneracy",
                "k_norm", "rep_vector"), rows)
    _write_summary(out / "modes_summary.json", cfg, "modes", {
        "dimension": cfg.box.dimension,
        "mode_cut": cfg.box.mode_cut,
        "sides": list(cfg.box.sides),
        "shells_per_side": {fmt17(s): n for s, (_r, n, _m) in
                            zip(cfg.box.sides, per_side)},
        "modes_per_side": {fmt17(s): m for s, (_r, _n, m) in
                           zip(cfg.box.sides, per_side)},
    })
    return EXIT_OK


# -- entry point -----------------------------------------------------------

_COMMANDS = {
    "pressure": cmd_pressure,
    "sweep": cmd_sweep,
    "audit": cmd_audit,
    "oracle-check": cmd_oracle_check,
    "limits": cmd_limits,
    "modes": cmd_modes,
}

_HELP = {
    "pressure": "finite-volume pressure ladder vs the mean-field limit",
    "sweep": "volume scaling sweep with condensation classification",
    "audit": "inequality audits over the fixture grid",
    "oracle-check": "convolution engine vs brute-force enumeration",
    "limits": "thermodynamic-limit quantities over parameter grids",
    "modes": "dump mode shell tables",
}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nonext-bec",
        description="Exact finite-volume statistics of diagonal Bose gas "
                    "models and their thermodynamic-limit analysis.")
    ap.add_argument("--version", action="version",
                    version=f"nonext-bec {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", metavar="PATH", default=None,
                       help="JSON run configuration")
        p.add_argument("--out", metavar="DIR", default="out",
                       help="output directory (default: ./out)")
        p.add_argument("--threads", type=int, default=None, metavar="N",
                       help="worker threads (default: config value or 1)")
        p.add_argument("--seedless", action="store_true",
                       help="reserved compatibility flag; this package has "
                            "no randomness (rejected if given a value)")
    return ap


def _init_logging():
    wanted = os.environ.get("NONEXT_BEC_LOG", "WARNING").upper()
    level = getattr(logging, wanted, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors (including --seedless=VALUE) and
        # 0 for --help/--version; surface that as a return code
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    _init_logging()
    try:
        cfg = load_config(args.config) if args.config else default_config()
        threads = args.threads if args.threads is not None else cfg.threads
        if not 1 <= threads <= 64:
            raise ConfigError(f"threads must be in [1, 64], got {threads}")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        log.info("command=%s threads=%d out=%s", args.command, threads, out)
        return _COMMANDS[args.command](cfg, out, threads)
    except ConfigError as exc:
        sys.stderr.write(f"nonext-bec: config error: {exc}\n")
        return EXIT_CONFIG
    except TruncationError as exc:
        sys.stderr.write(f"nonext-bec: certification error: {exc}\n")
        return EXIT_CERTIFICATION
    except SizingError as exc:
        sys.stderr.write(f"nonext-bec: resource error: {exc}\n")
        return EXIT_RESOURCE
    except DomainError as exc:
        sys.stderr.write(f"nonext-bec: config error: {exc}\n")
        return EXIT_CONFIG
    except NonextBecError as exc:
        sys.stderr.write(f"nonext-bec: error: {exc}\n")
        return EXIT_CONFIG
    except OSError as exc:
        sys.stderr.write(f"nonext-bec: resource error: {exc}\n")
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
