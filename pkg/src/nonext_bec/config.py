"""Run configuration: one JSON document, schema-versioned, strictly validated.

Unknown keys are rejected at every level so a typo fails loudly instead of
silently running defaults.  Blocks are optional; each command checks for the
blocks it needs and raises ConfigError when they are missing.
"""

import hashlib
import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .partition import Variant

SCHEMA_VERSION = 1

AUDIT_IDS = ("og", "in1", "in2", "in3", "lemma4", "lemma5",
             "p1-jensen", "pres-order")
AUDIT_HOOKS = ("negate_in2",)


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _section(raw: dict, name: str, allowed) -> dict:
    body = raw.get(name)
    if body is None:
        return None
    _require(isinstance(body, dict), f"section {name!r} must be an object")
    unknown = set(body) - set(allowed)
    _require(not unknown, f"unknown keys in {name!r}: {sorted(unknown)}")
    return body


def _floats(value, where: str):
    _require(isinstance(value, (list, tuple)) and len(value) > 0,
             f"{where} must be a nonempty list")
    out = []
    for x in value:
        _require(isinstance(x, (int, float)) and not isinstance(x, bool),
                 f"{where} entries must be numbers, got {x!r}")
        out.append(float(x))
    return tuple(out)


@dataclass(frozen=True)
class ModelBlock:
    variant: Variant
    beta: float
    lam: float = 0.0


@dataclass(frozen=True)
class BoxBlock:
    sides: tuple
    dimension: int = 3
    mode_cut: float = 1.5
    mass: float = 1.0


@dataclass(frozen=True)
class PressureBlock:
    mu_values: tuple


@dataclass(frozen=True)
class SweepBlock:
    rho: float
    deltas: tuple = (0.8, 1.2)
    band_mode: str = "k_norm"
    theta: float = 1e-3
    stable_slope: float = -0.05
    decay_slope: float = -0.2
    fit_window: int = 3


@dataclass(frozen=True)
class AuditBlock:
    delta: float = 0.8
    shell_budget: int = 8
    ids: tuple = AUDIT_IDS
    hooks: tuple = ()
    grid: tuple = None      # None = default fixture grid


@dataclass(frozen=True)
class OracleBlock:
    tolerance: float = 1e-10


@dataclass(frozen=True)
class LimitsBlock:
    alpha_values: tuple = ()
    mu_values: tuple = ()
    beta_c_density: float = None


@dataclass(frozen=True)
class TolerancesBlock:
    tail: float = 1e-12
    audit: float = 1e-9


@dataclass(frozen=True)
class RunConfig:
    schema_version: int
    threads: int = 1
    model: ModelBlock = None
    box: BoxBlock = None
    pressure: PressureBlock = None
    sweep: SweepBlock = None
    audit: AuditBlock = field(default_factory=AuditBlock)
    oracle: OracleBlock = field(default_factory=OracleBlock)
    limits: LimitsBlock = None
    tolerances: TolerancesBlock = field(default_factory=TolerancesBlock)
    sha256: str = ""

    def need(self, *names) -> "RunConfig":
        for name in names:
            _require(getattr(self, name) is not None,
                     f"this command needs a {name!r} config section")
        return self


_TOP_KEYS = ("schema_version", "threads", "model", "box", "pressure",
             "sweep", "audit", "oracle", "limits", "tolerances")


def parse_config(raw: dict, sha256: str = "") -> RunConfig:
    _require(isinstance(raw, dict), "config root must be a JSON object")
    unknown = set(raw) - set(_TOP_KEYS)
    _require(not unknown, f"unknown top-level keys: {sorted(unknown)}")
    _require("schema_version" in raw, "schema_version is mandatory")
    version = raw["schema_version"]
    _require(version == SCHEMA_VERSION,
             f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")

    threads = raw.get("threads", 1)
    _require(isinstance(threads, int) and 1 <= threads <= 64,
             f"threads must be an integer in [1, 64], got {threads!r}")

    model = None
    body = _section(raw, "model", ("variant", "beta", "lam"))
    if body is not None:
        _require("variant" in body and "beta" in body,
                 "model section needs 'variant' and 'beta'")
        try:
            variant = Variant.parse(body["variant"])
        except Exception as exc:
            raise ConfigError(str(exc)) from exc
        beta = float(body["beta"])
        lam = float(body.get("lam", 0.0))
        _require(beta > 0.0, f"beta must be positive, got {beta}")
        _require(lam >= 0.0, f"lam must be nonnegative, got {lam}")
        if variant is not Variant.FREE:
            _require(lam > 0.0, f"{variant.value} needs lam > 0")
        else:
            _require(lam == 0.0, "free model takes lam = 0")
        model = ModelBlock(variant=variant, beta=beta, lam=lam)

    box = None
    body = _section(raw, "box", ("sides", "dimension", "mode_cut", "mass"))
    if body is not None:
        _require("sides" in body, "box section needs 'sides'")
        sides = _floats(body["sides"], "box.sides")
        _require(all(s > 0.0 for s in sides), "box sides must be positive")
        dimension = body.get("dimension", 3)
        _require(isinstance(dimension, int) and 1 <= dimension <= 3,
                 f"dimension must be 1, 2 or 3, got {dimension!r}")
        mode_cut = float(body.get("mode_cut", 1.5))
        mass = float(body.get("mass", 1.0))
        _require(mode_cut > 0.0, "mode_cut must be positive")
        _require(mass > 0.0, "mass must be positive")
        box = BoxBlock(sides=sides, dimension=dimension,
                       mode_cut=mode_cut, mass=mass)

    pressure = None
    body = _section(raw, "pressure", ("mu_values",))
    if body is not None:
        _require("mu_values" in body, "pressure section needs 'mu_values'")
        pressure = PressureBlock(mu_values=_floats(body["mu_values"],
                                                   "pressure.mu_values"))

    sweep = None
    body = _section(raw, "sweep", ("rho", "deltas", "band_mode", "theta",
                                   "stable_slope", "decay_slope",
                                   "fit_window"))
    if body is not None:
        _require("rho" in body, "sweep section needs 'rho'")
        rho = float(body["rho"])
        _require(rho > 0.0, f"sweep rho must be positive, got {rho}")
        deltas = _floats(body.get("deltas", (0.8, 1.2)), "sweep.deltas")
        _require(all(d > 0.0 for d in deltas), "sweep deltas must be positive")
        band_mode = body.get("band_mode", "k_norm")
        _require(band_mode in ("k_norm", "energy"),
                 f"band_mode must be 'k_norm' or 'energy', got {band_mode!r}")
        theta = float(body.get("theta", 1e-3))
        _require(theta > 0.0, "theta must be positive")
        fit_window = body.get("fit_window", 3)
        _require(isinstance(fit_window, int) and fit_window >= 2,
                 "fit_window must be an integer >= 2")
        sweep = SweepBlock(rho=rho, deltas=deltas, band_mode=band_mode,
                           theta=theta,
                           stable_slope=float(body.get("stable_slope", -0.05)),
                           decay_slope=float(body.get("decay_slope", -0.2)),
                           fit_window=fit_window)

    audit = AuditBlock()
    body = _section(raw, "audit", ("delta", "shell_budget", "ids", "hooks",
                                   "grid"))
    if body is not None:
        delta = float(body.get("delta", 0.8))
        _require(delta > 0.0, "audit delta must be positive")
        shell_budget = body.get("shell_budget", 8)
        _require(isinstance(shell_budget, int) and shell_budget >= 2,
                 "shell_budget must be an integer >= 2")
        ids = tuple(body.get("ids", AUDIT_IDS))
        bad = set(ids) - set(AUDIT_IDS)
        _require(not bad, f"unknown audit ids: {sorted(bad)}")
        hooks = tuple(body.get("hooks", ()))
        bad = set(hooks) - set(AUDIT_HOOKS)
        _require(not bad, f"unknown audit hooks: {sorted(bad)}")
        grid = None
        if body.get("grid") is not None:
            pts = body["grid"]
            _require(isinstance(pts, list) and pts,
                     "audit.grid must be a nonempty list")
            parsed = []
            for pt in pts:
                _require(isinstance(pt, dict), "audit.grid entries must be objects")
                bad = set(pt) - {"variant", "beta", "rho", "lam", "side"}
                _require(not bad, f"unknown keys in audit.grid entry: {sorted(bad)}")
                for key in ("variant", "beta", "rho", "side"):
                    _require(key in pt, f"audit.grid entry missing {key!r}")
                try:
                    var = Variant.parse(pt["variant"])
                except Exception as exc:
                    raise ConfigError(str(exc)) from exc
                parsed.append({"variant": var, "beta": float(pt["beta"]),
                               "rho": float(pt["rho"]),
                               "lam": float(pt.get("lam", 0.0)),
                               "side": float(pt["side"])})
            grid = tuple(parsed)
        audit = AuditBlock(delta=delta, shell_budget=shell_budget, ids=ids,
                           hooks=hooks, grid=grid)

    oracle = OracleBlock()
    body = _section(raw, "oracle", ("tolerance",))
    if body is not None:
        tolerance = float(body.get("tolerance", 1e-10))
        _require(tolerance > 0.0, "oracle tolerance must be positive")
        oracle = OracleBlock(tolerance=tolerance)

    limits = None
    body = _section(raw, "limits", ("alpha_values", "mu_values",
                                    "beta_c_density"))
    if body is not None:
        alpha_values = ()
        if body.get("alpha_values") is not None:
            alpha_values = _floats(body["alpha_values"], "limits.alpha_values")
            _require(all(a <= 0.0 for a in alpha_values),
                     "limits alpha_values must be <= 0")
        mu_values = ()
        if body.get("mu_values") is not None:
            mu_values = _floats(body["mu_values"], "limits.mu_values")
        beta_c_density = body.get("beta_c_density")
        if beta_c_density is not None:
            beta_c_density = float(beta_c_density)
            _require(beta_c_density > 0.0, "beta_c_density must be positive")
        limits = LimitsBlock(alpha_values=alpha_values, mu_values=mu_values,
                             beta_c_density=beta_c_density)

    tolerances = TolerancesBlock()
    body = _section(raw, "tolerances", ("tail", "audit"))
    if body is not None:
        tail = float(body.get("tail", 1e-12))
        audit_tol = float(body.get("audit", 1e-9))
        _require(tail > 0.0, "tail tolerance must be positive")
        _require(audit_tol > 0.0, "audit tolerance must be positive")
        tolerances = TolerancesBlock(tail=tail, audit=audit_tol)

    return RunConfig(schema_version=version, threads=threads, model=model,
                     box=box, pressure=pressure, sweep=sweep, audit=audit,
                     oracle=oracle, limits=limits, tolerances=tolerances,
                     sha256=sha256)


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw, sha256=hashlib.sha256(blob).hexdigest())


def default_config() -> RunConfig:
    """Built-in minimal config for commands that run on package defaults."""
    return parse_config({"schema_version": SCHEMA_VERSION},
                        sha256=hashlib.sha256(b"{}").hexdigest())
