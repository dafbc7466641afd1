"""Brute-force reference ensembles for small mode systems.

Everything here is deliberately naive: enumerate every occupation
configuration below the caps (odometer order, last mode fastest), weight it
by e^{-beta(H - mu N)}, and sum.  No convolutions, no factorization, no
shared code paths with the production engine; this is the independent check
the engine is tested against at matching truncation, where the two must
agree to near machine precision.

Block sums use numpy pairwise reduction (relative error ~ log2(n) ulp) and
blocks are combined with math.fsum, so accumulated rounding stays orders of
magnitude below the comparison tolerances.
"""

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import SizingError
from .partition import ModelParams, PartitionEngine, Variant

CONFIG_BUDGET = 10_000_000
_BLOCK = 1 << 16


@dataclass(frozen=True)
class ToySystem:
    """A handful of modes with explicit occupation caps."""

    name: str
    energies: tuple
    caps: tuple
    volume: float
    params: ModelParams

    def __post_init__(self):
        if len(self.energies) != len(self.caps):
            raise SizingError("energies and caps must align")
        if self.config_count > CONFIG_BUDGET:
            raise SizingError(
                f"toy {self.name!r} has {self.config_count} configurations, "
                f"budget is {CONFIG_BUDGET}"
            )

    @property
    def config_count(self) -> int:
        n = 1
        for c in self.caps:
            n *= c + 1
        return n

    def shell_groups(self):
        """Group equal-energy modes: [(energy, [mode indices]), ...] by energy."""
        groups = {}
        for i, e in enumerate(self.energies):
            groups.setdefault(e, []).append(i)
        return sorted(groups.items())


@dataclass(frozen=True)
class OracleMoments:
    """Exact sums for one toy: totals, per-mode moments, all cross moments."""

    name: str
    log_z: float
    pressure: float
    mean_n: float
    mean_n2: float
    occ: tuple
    occ2: tuple
    pair: tuple          # m x m nested tuple, entry (i, j) = <n_i n_j>, diagonal = occ2
    cross_total: tuple   # <N n_i>
    n_configs: int


def _blocks(toy: ToySystem):
    ranges = [range(c + 1) for c in toy.caps]
    it = itertools.product(*ranges)
    while True:
        block = list(itertools.islice(it, _BLOCK))
        if not block:
            return
        yield np.array(block, dtype=float)


def _hamiltonian(occ: np.ndarray, toy: ToySystem) -> np.ndarray:
    """H - mu N on a block of configurations (rows)."""
    p = toy.params
    eps = np.array(toy.energies, dtype=float)
    total = occ.sum(axis=1)
    h = occ @ eps - p.mu * total
    a = p.pair_coupling
    c = p.square_coupling
    if a != 0.0:
        h += a / toy.volume * total * total
    if c != 0.0:
        h += c / toy.volume * np.sum(occ * occ, axis=1)
    return h


def enumerate_exact(toy: ToySystem) -> OracleMoments:
    beta = toy.params.beta
    m = len(toy.energies)

    h_min = math.inf
    for occ in _blocks(toy):
        h_min = min(h_min, float(np.min(_hamiltonian(occ, toy))))

    zp, np_, n2p, tp = [], [], [], []
    sp, s2p, m2p = [], [], []
    for occ in _blocks(toy):
        w = np.exp(-beta * (_hamiltonian(occ, toy) - h_min))
        total = occ.sum(axis=1)
        zp.append(float(np.sum(w)))
        np_.append(float(np.sum(w * total)))
        n2p.append(float(np.sum(w * total * total)))
        wocc = occ * w[:, None]
        sp.append(np.sum(wocc, axis=0))
        s2p.append(np.sum(occ * wocc, axis=0))
        # full second-moment matrix in one contraction; einsum keeps the
        # reduction order fixed regardless of BLAS threading
        m2p.append(np.einsum("ki,kj->ij", occ, wocc))
        tp.append(np.sum(wocc * total[:, None], axis=0))

    z = math.fsum(zp)
    mean_n = math.fsum(np_) / z
    mean_n2 = math.fsum(n2p) / z
    occ_v = [math.fsum(p[i] for p in sp) / z for i in range(m)]
    occ2_v = [math.fsum(p[i] for p in s2p) / z for i in range(m)]
    cross = [math.fsum(p[i] for p in tp) / z for i in range(m)]
    pair = [[math.fsum(p[i][j] for p in m2p) / z for j in range(m)] for i in range(m)]
    log_z = math.log(z) - beta * h_min
    return OracleMoments(
        name=toy.name,
        log_z=log_z,
        pressure=log_z / (beta * toy.volume),
        mean_n=mean_n,
        mean_n2=mean_n2,
        occ=tuple(occ_v),
        occ2=tuple(occ2_v),
        pair=tuple(tuple(row) for row in pair),
        cross_total=tuple(cross),
        n_configs=toy.config_count,
    )


def default_toy_suite():
    """Fixed toys spanning all three variants, sized for sub-second runs."""

    def mk(name, variant, eps, cap, beta, mu, lam, vol):
        params = ModelParams(Variant.parse(variant), beta, mu, lam)
        return ToySystem(name=name, energies=tuple(float(e) for e in eps),
                         caps=tuple(cap for _ in eps), volume=vol, params=params)

    return [
        # ten toys with <= 4 shells and caps <= 6, spanning all variants
        mk("free_two_mode", "free", (0.3, 0.9), 6, 1.1, -0.37, 0.0, 1.7),
        mk("free_shell", "free", (0.0, 0.5, 0.5, 0.5), 6, 0.8, -0.25, 0.0, 2.0),
        mk("free_cold", "free", (0.0, 1.0), 6, 2.0, -0.05, 0.0, 1.0),
        mk("mf_single", "mean_field", (0.0,), 6, 1.0, 0.5, 0.6, 1.5),
        mk("mf_pair", "mean_field", (0.0, 0.35), 6, 1.3, 0.2, 0.8, 1.0),
        mk("mf_shells", "mean_field", (0.0, 0.4, 0.4, 1.1), 6, 0.9, -0.1, 0.5, 2.3),
        mk("nonext_single", "non_extensive", (0.0,), 6, 1.2, 0.7, 1.0, 1.1),
        mk("nonext_pair", "non_extensive", (0.1, 0.6), 6, 0.7, 0.3, 0.9, 1.4),
        mk("nonext_shells", "non_extensive", (0.0, 0.45, 0.45, 0.45), 6, 1.0, 0.15, 0.75, 1.9),
        mk("nonext_wide", "non_extensive", (0.0, 0.2, 0.2, 0.7, 0.7, 1.5), 4, 1.1, 0.25, 0.6, 2.5),
        # two stress toys above that class: deeper caps, colder states
        mk("nonext_cold", "non_extensive", (0.0, 0.8), 26, 1.6, 0.4, 0.7, 1.2),
        # caps bind here on purpose: the grand weight has visible mass near
        # the truncation edge, exercising the tail_mass flag downstream
        mk("free_captail", "free", (0.0, 0.5), 12, 1.0, -1.0, 0.0, 1.0),
    ]


def engine_deviation(toy: ToySystem, reference: OracleMoments = None) -> dict:
    """Compare the convolution engine against enumeration on one toy.

    Returns per-field maximum relative deviations plus the engine's own
    tail-mass diagnostic.  Both sides sum exactly the capped configuration
    space, so agreement is expected at rounding level even when the caps
    visibly truncate the physical distribution.
    """
    caps = set(toy.caps)
    if len(caps) != 1:
        raise SizingError("engine comparison expects one shared cap per toy")
    cap = caps.pop()
    om = enumerate_exact(toy) if reference is None else reference
    groups = toy.shell_groups()
    shells = [(e, len(idx)) for e, idx in groups]
    mode_shell = {}
    for s, (_e, idx) in enumerate(groups):
        for i in idx:
            mode_shell[i] = s
    mu = toy.params.mu
    eng = PartitionEngine(shells, toy.params, toy.volume, sum(toy.caps),
                          n_cap=cap, explicit_caps=True)
    g = eng.grand(mu)

    def rel(a, b):
        return abs(a - b) / max(abs(b), 1e-12)

    log_z_dev = abs(g.log_z - om.log_z) / max(1.0, abs(om.log_z))
    m = len(toy.energies)
    shell_mom = [eng.shell_moments(s, mu) for s in range(len(shells))]
    shell_cross = [eng.shell_cross_total(s, mu) for s in range(len(shells))]
    moment_dev = rel(g.mean_n, om.mean_n)
    moment_dev = max(moment_dev, rel(g.var_n + g.mean_n ** 2, om.mean_n2))
    pair_cache = {}
    for i in range(m):
        si = mode_shell[i]
        moment_dev = max(moment_dev, rel(shell_mom[si][0], om.occ[i]),
                         rel(shell_mom[si][1], om.occ2[i]),
                         rel(shell_cross[si], om.cross_total[i]))
        for j in range(i + 1, m):
            sj = mode_shell[j]
            key = (min(si, sj), max(si, sj), si == sj)
            if key not in pair_cache:
                if si == sj:
                    pair_cache[key] = eng.same_shell_pair_moment(si, mu)
                else:
                    pair_cache[key] = eng.pair_moment(si, sj, mu)
            moment_dev = max(moment_dev, rel(pair_cache[key], om.pair[i][j]))
    return {
        "name": toy.name,
        "variant": toy.params.variant.value,
        "n_configs": om.n_configs,
        "log_z_dev": log_z_dev,
        "moment_dev": moment_dev,
        "max_rel_dev": max(log_z_dev, moment_dev),
        "tail_mass": g.tail_mass,
    }


def moments_to_dict(om: OracleMoments) -> dict:
    return {
        "name": om.name,
        "log_z": om.log_z,
        "pressure": om.pressure,
        "mean_n": om.mean_n,
        "mean_n2": om.mean_n2,
        "occ": list(om.occ),
        "occ2": list(om.occ2),
        "pair": [list(r) for r in om.pair],
        "cross_total": list(om.cross_total),
        "n_configs": om.n_configs,
    }


def moments_from_dict(d: dict) -> OracleMoments:
    return OracleMoments(
        name=d["name"],
        log_z=d["log_z"],
        pressure=d["pressure"],
        mean_n=d["mean_n"],
        mean_n2=d["mean_n2"],
        occ=tuple(d["occ"]),
        occ2=tuple(d["occ2"]),
        pair=tuple(tuple(r) for r in d["pair"]),
        cross_total=tuple(d["cross_total"]),
        n_configs=d["n_configs"],
    )


def write_fixtures(path, toys=None):
    toys = default_toy_suite() if toys is None else toys
    payload = {t.name: moments_to_dict(enumerate_exact(t)) for t in toys}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


def load_fixtures(path) -> dict:
    with open(path) as fh:
        raw = json.load(fh)
    return {k: moments_from_dict(v) for k, v in raw.items()}
