"""Exact grand-canonical statistics of diagonal Bose models on a finite box.

Models are diagonal in occupation numbers, so the grand partition function
factors through the restricted (fixed total N) partition function

    Z = sum_N Q(N) * G(N),     Q(N) = sum_{sum n_k = N} prod_k a_k(n_k),

where a_k(n) collects every term of e^{-beta H} that touches a single mode
and G(N) collects the terms that couple modes only through the total N:

    Free:          a_k(n) = e^{-beta eps_k n}                      G(N) = e^{beta mu N}
    MeanField:     a_k(n) = e^{-beta eps_k n}                      G(N) = e^{-beta(lam N^2/V - mu N)}
    NonExtensive:  a_k(n) = e^{-beta(eps_k n + lam n^2 / (2V))}    G(N) = e^{-beta(lam N^2/V - mu N)}

Q is assembled once per (mode set, beta, lambda) by convolving per-shell
occupation polynomials; every mu evaluation afterwards is a cheap weighted
sum, which is what makes bisection on mu affordable.  G(N) is never folded
into per-mode weights because the N^2 term couples modes.

Coefficients span hundreds of orders of magnitude across N, so polynomials
are stored as nonnegative float64 mantissas with one shared additive log
factor, renormalized after every convolution.  An optional exact linear
tilt mu_ref (weights gain e^{beta mu_ref n}, G loses the same factor)
compresses the represented dynamic range at large volume; it changes no
observable and defaults to off.

Per-mode moments come from leave-one-out polynomials (the product of every
other shell's polynomial, with the audited shell taken at degeneracy g-1),
never from dividing Q by a shell polynomial.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, SizingError, TruncationError
from .util import bisect_root, grow_bracket_monotone

logger = logging.getLogger(__name__)

# Per-shell support cap: weights below W_FLOOR * max contribute nothing at
# the tolerances this package certifies (kept stricter than the reported
# adequacy level so high-energy moment tails stay accurate in relative terms).
W_FLOOR = 1e-30
ADEQUACY_LEVEL = 1e-18
DEFAULT_TAIL_TOL = 1e-12
MAX_COEFF_LEN = 1 << 21


class Variant(Enum):
    FREE = "free"
    MEAN_FIELD = "mean_field"
    NON_EXTENSIVE = "non_extensive"

    @classmethod
    def parse(cls, name: str) -> "Variant":
        key = str(name).strip().lower().replace("-", "_")
        aliases = {
            "free": cls.FREE,
            "mean_field": cls.MEAN_FIELD,
            "meanfield": cls.MEAN_FIELD,
            "mf": cls.MEAN_FIELD,
            "non_extensive": cls.NON_EXTENSIVE,
            "nonextensive": cls.NON_EXTENSIVE,
        }
        if key not in aliases:
            raise DomainError(f"unknown model variant {name!r}")
        return aliases[key]


@dataclass(frozen=True)
class ModelParams:
    """Model selector plus thermodynamic knobs for one grand-canonical state."""

    variant: Variant
    beta: float
    mu: float
    lam: float = 0.0

    def __post_init__(self):
        if not isinstance(self.variant, Variant):
            # identity checks on the enum are used throughout; a raw string
            # would silently select the wrong couplings
            raise DomainError(f"variant must be a Variant, got {self.variant!r}")
        if not (self.beta > 0.0):
            raise DomainError(f"beta must be positive, got {self.beta}")
        if self.variant is Variant.FREE:
            if self.lam != 0.0:
                raise DomainError("Free variant has no interaction; set lam=0")
        else:
            if not (self.lam > 0.0):
                raise DomainError(f"{self.variant.value} needs lam > 0, got {self.lam}")

    def with_mu(self, mu: float) -> "ModelParams":
        return ModelParams(self.variant, self.beta, mu, self.lam)

    @property
    def pair_coupling(self) -> float:
        """Coefficient A of N^2 in H (per unit 1/V factor applied later)."""
        return 0.0 if self.variant is Variant.FREE else self.lam

    @property
    def square_coupling(self) -> float:
        """Coefficient C of sum_k N_k^2 (per unit 1/V factor applied later)."""
        return self.lam / 2.0 if self.variant is Variant.NON_EXTENSIVE else 0.0


def _level_list(shells):
    """Normalize shells to [(energy, degeneracy), ...]; accepts ModeShell or tuples."""
    levels = []
    for sh in shells:
        if hasattr(sh, "energy"):
            levels.append((float(sh.energy), int(sh.degeneracy)))
        else:
            e, g = sh
            levels.append((float(e), int(g)))
    for e, g in levels:
        if e < 0.0:
            raise DomainError(f"negative mode energy {e}")
        if g < 1:
            raise DomainError(f"degeneracy must be >= 1, got {g}")
    return levels


@dataclass
class RestrictedPartition:
    """Occupation-restricted partition coefficients Q(N) = coeff[N] * e^log_scale.

    coeff is nonnegative with its maximum renormalized into [1/2, 2] (it is
    exactly 1 right after renormalization); trailing zeros are trimmed so the
    array length tracks the effective support, never exceeding n_max + 1.
    """

    coeff: np.ndarray
    log_scale: float

    @classmethod
    def unit(cls) -> "RestrictedPartition":
        return cls(coeff=np.ones(1), log_scale=0.0)

    @classmethod
    def from_log_weights(cls, log_w: np.ndarray) -> "RestrictedPartition":
        m = float(np.max(log_w))
        return cls(coeff=np.exp(log_w - m), log_scale=m)

    @property
    def support(self) -> int:
        return len(self.coeff) - 1

    def log_coeff(self) -> np.ndarray:
        out = np.full(len(self.coeff), -np.inf)
        pos = self.coeff > 0.0
        out[pos] = np.log(self.coeff[pos])
        return out

    def value_log(self, n: int) -> float:
        if n >= len(self.coeff) or self.coeff[n] == 0.0:
            return -math.inf
        return math.log(self.coeff[n]) + self.log_scale

    def validate(self):
        if np.any(self.coeff < 0.0):
            raise DomainError("negative partition coefficient")
        if self.coeff[0] <= 0.0:
            raise DomainError("vacuum coefficient lost (scale overflow)")
        m = float(np.max(self.coeff))
        if not (0.5 <= m <= 2.0):
            raise DomainError(f"mantissa scale drifted: max={m}")


def _renormalized(raw: np.ndarray, log_scale: float) -> RestrictedPartition:
    if len(raw) > 1:
        nz = np.nonzero(raw)[0]
        if len(nz) == 0:
            raise DomainError("scale overflow: all coefficients underflowed")
        raw = raw[: nz[-1] + 1]
    m = float(np.max(raw))
    if not (m > 0.0) or not math.isfinite(m):
        raise DomainError(f"scale overflow in renormalization (max={m})")
    return RestrictedPartition(coeff=raw / m, log_scale=log_scale + math.log(m))


def convolve(p: RestrictedPartition, q: RestrictedPartition,
             n_max: int = None) -> RestrictedPartition:
    """Product of two restricted partitions, truncated to total N <= n_max.

    Direct convolution: truncation commutes with it exactly (coefficient N
    of the product only reads inputs at indices <= N), so truncated results
    are exact for every retained N.
    """
    raw = np.convolve(p.coeff, q.coeff)
    if n_max is not None and len(raw) > n_max + 1:
        raw = raw[: n_max + 1]
    return _renormalized(raw, p.log_scale + q.log_scale)


def shell_power(weights: "ModeWeights", degeneracy: int,
                n_max: int) -> RestrictedPartition:
    """g-fold convolution power of one mode's weight sequence.

    Exponentiation by squaring: O(log g) convolutions instead of g-1.
    """
    if degeneracy < 0:
        raise DomainError(f"negative power {degeneracy}")
    base = RestrictedPartition.from_log_weights(weights.log_values)
    result = RestrictedPartition.unit()
    g = degeneracy
    while g > 0:
        if g & 1:
            result = convolve(result, base, n_max)
        g >>= 1
        if g:
            base = convolve(base, base, n_max)
    return result


@dataclass(frozen=True)
class ModeWeights:
    """Single-mode occupation weights a(n), n = 0..n_cap, kept in log form.

    adequate means the sequence decayed below ADEQUACY_LEVEL relative to its
    maximum by the cap; a False flag signals the cap (not the decay) is the
    binding truncation, which is legitimate only when the cap already equals
    the global N_max.
    """

    log_values: np.ndarray
    adequate: bool

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)

    @property
    def n_cap(self) -> int:
        return len(self.log_values) - 1


def mode_weights(energy: float, params: ModelParams, volume: float,
                 n_cap: int, mu_ref: float = 0.0) -> ModeWeights:
    """Weights a(n) for one mode of the given energy.

    The optional tilt mu_ref multiplies a(n) by e^{beta mu_ref n}; grand
    sums compensate with e^{-beta mu_ref N}, so observables are unchanged.
    """
    if n_cap < 0:
        raise DomainError(f"n_cap must be >= 0, got {n_cap}")
    if volume <= 0.0:
        raise DomainError(f"volume must be positive, got {volume}")
    c2 = params.square_coupling
    if energy - mu_ref < 0.0 and c2 <= 0.0:
        # without a quadratic term nothing reins in an uphill tilt
        raise DomainError(f"tilted energy went negative: eps={energy}, mu_ref={mu_ref}")
    n = np.arange(n_cap + 1, dtype=float)
    log_a = -params.beta * (energy - mu_ref) * n
    if c2 > 0.0:
        log_a -= params.beta * c2 / volume * n * n
    adequate = bool(log_a[-1] - np.max(log_a) <= math.log(ADEQUACY_LEVEL))
    return ModeWeights(log_values=log_a, adequate=adequate)


def _decay_cap(energy: float, params: ModelParams, volume: float,
               cap_mu: float, floor: float = W_FLOOR) -> int:
    """Occupation beyond which a mode cannot matter, whatever the other modes do.

    Since lam >= 0, G(N) <= e^{beta mu N}, so a mode's relative weight at
    occupation n is bounded by e^{-beta[(eps - mu) n + c2 n^2]} regardless of
    the rest of the system.  Returns the smallest n where that bound drops
    below floor; a huge sentinel (meaning: cap at N_max, rely on the global
    tail certificate) when the bound never decays.
    """
    target = -math.log(floor)
    lin = params.beta * (energy - cap_mu)
    quad = params.beta * params.square_coupling / volume
    if quad > 0.0:
        # quad*n^2 + lin*n = target, take the positive root
        n = (-lin + math.sqrt(lin * lin + 4.0 * quad * target)) / (2.0 * quad)
        return int(math.ceil(n))
    if lin > 0.0:
        return int(math.ceil(target / lin))
    return 1 << 62


@dataclass(frozen=True)
class GrandSum:
    """One grand-canonical evaluation at fixed mu."""

    log_z: float
    pressure: float
    mean_n: float
    var_n: float
    tail_mass: float

    def certified(self, tol: float = DEFAULT_TAIL_TOL) -> bool:
        return self.tail_mass < tol


@dataclass(frozen=True)
class TruncationSpec:
    n_cap: int
    n_max: int
    tail_mass: float
    certified: bool


class PartitionEngine:
    """Assembled restricted partition of one model on one mode set.

    The assembly (shell polynomials, Q, leave-one-out chains) depends on
    (shells, variant, beta, lam, volume, caps, tilt) but not on mu, so one
    engine serves a whole mu sweep or bisection.
    """

    def __init__(self, shells, params: ModelParams, volume: float, n_max: int, *,
                 n_cap: int = None, explicit_caps: bool = False,
                 mu_ref: float = 0.0, cap_mu: float = None,
                 tail_tol: float = DEFAULT_TAIL_TOL,
                 reverse_order: bool = False):
        if n_max < 1:
            raise DomainError(f"n_max must be >= 1, got {n_max}")
        if n_max + 1 > MAX_COEFF_LEN:
            raise SizingError(f"n_max {n_max} exceeds coefficient budget {MAX_COEFF_LEN - 1}")
        if mu_ref > 0.0 and params.square_coupling <= 0.0:
            raise DomainError(f"tilt must be <= 0 without quadratic control, got {mu_ref}")
        self.levels = _level_list(shells)
        self.params = params
        self.volume = float(volume)
        self.n_max = int(n_max)
        self.mu_ref = float(mu_ref)
        self.cap_mu = params.mu if cap_mu is None else float(cap_mu)
        self.tail_tol = float(tail_tol)
        self.reverse_order = bool(reverse_order)
        self.n_cap = self.n_max if n_cap is None else min(int(n_cap), self.n_max)
        self.caps = []
        for e, _g in self.levels:
            if explicit_caps:
                cap = self.n_cap
            else:
                cap = min(self.n_cap, _decay_cap(e, params, self.volume, self.cap_mu))
            self.caps.append(min(cap, self.n_max))
        self._explicit = explicit_caps
        self._weights = {}
        self._pow = {}
        self._partition = None
        self._prefix = None
        self._suffix = None
        self._pos_of = None
        self._pair_chain_cache = {}

    # -- weights and shell polynomials -------------------------------------

    def shell_weights(self, i: int, cap: int = None) -> ModeWeights:
        cap = self.caps[i] if cap is None else cap
        key = (i, cap)
        if key not in self._weights:
            e, _ = self.levels[i]
            self._weights[key] = mode_weights(e, self.params, self.volume, cap,
                                              mu_ref=self.mu_ref)
        return self._weights[key]

    def _base_poly(self, i: int) -> RestrictedPartition:
        return RestrictedPartition.from_log_weights(self.shell_weights(i).log_values)

    def shell_polynomial(self, i: int, power: int = None) -> RestrictedPartition:
        """Convolution power of shell i's weights, cached by (shell, power)."""
        g = self.levels[i][1] if power is None else power
        if g < 0:
            raise DomainError(f"negative shell power {g}")
        key = (i, g)
        if key in self._pow:
            return self._pow[key]
        if g == 0:
            val = RestrictedPartition.unit()
        elif self._skippable(i):
            val = RestrictedPartition.unit()
        elif g == 1:
            val = self._base_poly(i)
        else:
            half = self.shell_polynomial(i, g // 2)
            val = convolve(half, half, self.n_max)
            if g & 1:
                val = convolve(val, self.shell_polynomial(i, 1), self.n_max)
        self._pow[key] = val
        return val

    def _log_a_eff(self, i: int, n: float) -> float:
        """log of the mu-inclusive weight bound for shell i at occupation n."""
        e, _ = self.levels[i]
        p = self.params
        return -p.beta * ((e - self.cap_mu) * n + p.square_coupling / self.volume * n * n)

    def _skippable(self, i: int) -> bool:
        # effectively [1, 0, ...] even after G; leaving it out of Q is exact
        # at W_FLOOR level
        if self._explicit:
            return False
        return self._log_a_eff(i, 1.0) < math.log(W_FLOOR)

    def _order(self):
        idx = list(range(len(self.levels)))
        return idx[::-1] if self.reverse_order else idx

    def partition(self) -> RestrictedPartition:
        """Q(N): the full restricted partition over all shells."""
        if self._partition is None:
            acc = RestrictedPartition.unit()
            for i in self._order():
                if self._skippable(i):
                    continue
                acc = convolve(acc, self.shell_polynomial(i), self.n_max)
            self._partition = acc
        return self._partition

    def _chains(self):
        """Prefix/suffix products over shells (assembly order), for leave-one-out."""
        if self._prefix is None:
            order = self._order()
            s = len(order)
            prefix = [RestrictedPartition.unit()] * (s + 1)
            for pos, i in enumerate(order):
                if self._skippable(i):
                    prefix[pos + 1] = prefix[pos]
                else:
                    prefix[pos + 1] = convolve(prefix[pos], self.shell_polynomial(i), self.n_max)
            suffix = [RestrictedPartition.unit()] * (s + 1)
            for pos in range(s - 1, -1, -1):
                i = order[pos]
                if self._skippable(i):
                    suffix[pos] = suffix[pos + 1]
                else:
                    suffix[pos] = convolve(self.shell_polynomial(i), suffix[pos + 1], self.n_max)
            self._prefix = prefix
            self._suffix = suffix
            self._pos_of = {i: pos for pos, i in enumerate(order)}
        return self._prefix, self._suffix

    def leave_one_out(self, i: int) -> RestrictedPartition:
        """Product of all shell polynomials with shell i at degeneracy g_i - 1."""
        prefix, suffix = self._chains()
        pos = self._pos_of[i]
        g = self.levels[i][1]
        rest = convolve(prefix[pos], suffix[pos + 1], self.n_max)
        if g - 1 == 0 or self._skippable(i):
            return rest
        return convolve(rest, self.shell_polynomial(i, g - 1), self.n_max)

    def _pair_chain(self, i0: int):
        """Prefix/suffix over the chain with shell i0 already reduced to g-1."""
        if i0 not in self._pair_chain_cache:
            order = self._order()
            polys = {}
            for i in order:
                if i == i0:
                    g = self.levels[i][1]
                    polys[i] = (RestrictedPartition.unit()
                                if (g - 1 == 0 or self._skippable(i))
                                else self.shell_polynomial(i, g - 1))
                else:
                    polys[i] = (RestrictedPartition.unit() if self._skippable(i)
                                else self.shell_polynomial(i))
            s = len(order)
            prefix = [RestrictedPartition.unit()] * (s + 1)
            for pos, i in enumerate(order):
                prefix[pos + 1] = (prefix[pos] if polys[i].support == 0 and polys[i].coeff[0] == 1.0
                                   else convolve(prefix[pos], polys[i], self.n_max))
            suffix = [RestrictedPartition.unit()] * (s + 1)
            for pos in range(s - 1, -1, -1):
                i = order[pos]
                suffix[pos] = (suffix[pos + 1] if polys[i].support == 0 and polys[i].coeff[0] == 1.0
                               else convolve(polys[i], suffix[pos + 1], self.n_max))
            self._pair_chain_cache[i0] = (prefix, suffix)
        return self._pair_chain_cache[i0]

    def leave_pair_out(self, i: int, j: int) -> RestrictedPartition:
        """All shells, with shells i and j each at degeneracy g - 1 (i != j)."""
        if i == j:
            raise DomainError("leave_pair_out needs two distinct shells")
        self._chains()
        prefix, suffix = self._pair_chain(i)
        pos = self._pos_of[j]
        rest = convolve(prefix[pos], suffix[pos + 1], self.n_max)
        g = self.levels[j][1]
        if g - 1 == 0 or self._skippable(j):
            return rest
        return convolve(rest, self.shell_polynomial(j, g - 1), self.n_max)

    # -- grand-canonical sums ----------------------------------------------

    def _log_g(self, mu: float, length: int) -> np.ndarray:
        n = np.arange(length, dtype=float)
        dmu = mu - self.mu_ref
        if self.params.variant is Variant.FREE:
            if mu >= 0.0:
                raise DomainError(f"free gas needs mu < 0, got {mu}")
            return self.params.beta * dmu * n
        lam = self.params.lam
        return -self.params.beta * (lam * n * n / self.volume - dmu * n)

    def grand(self, mu: float) -> GrandSum:
        """Grand sum, pressure, total-N moments and tail diagnostic at mu."""
        q = self.partition()
        t = q.log_coeff() + self._log_g(mu, len(q.coeff))
        m = float(np.max(t))
        w = np.exp(t - m)
        s0 = float(np.sum(w))
        n = np.arange(len(w), dtype=float)
        mean = float(np.sum(w * n)) / s0
        var = float(np.sum(w * (n - mean) ** 2)) / s0
        tail_start = int(math.floor(0.9 * self.n_max)) + 1
        tail = float(np.sum(w[tail_start:])) / s0 if tail_start < len(w) else 0.0
        log_z = q.log_scale + m + math.log(s0)
        return GrandSum(
            log_z=log_z,
            pressure=log_z / (self.params.beta * self.volume),
            mean_n=mean,
            var_n=var,
            tail_mass=tail,
        )

    def certify(self, mu: float) -> TruncationSpec:
        g = self.grand(mu)
        ok = g.tail_mass < self.tail_tol and self._caps_adequate()
        return TruncationSpec(n_cap=max(self.caps, default=0), n_max=self.n_max,
                              tail_mass=g.tail_mass, certified=ok)

    def _caps_adequate(self) -> bool:
        for i in range(len(self.levels)):
            if self.caps[i] >= self.n_max:
                continue  # the global truncation binds; tail_mass certifies it
            if self._log_a_eff(i, self.caps[i]) > math.log(ADEQUACY_LEVEL):
                return False
        return True

    def caps_valid_for(self, mu: float) -> bool:
        """Whether the baked caps stay adequate if the grand sum runs at mu.

        Caps are derived from cap_mu at construction; a later evaluation at
        larger mu weakens the weight-decay bound, so re-check before trusting
        moments there.
        """
        if self._explicit or mu <= self.cap_mu:
            return True
        shifted = ModelParams(self.params.variant, self.params.beta, mu,
                              self.params.lam)
        for i, (e, _g) in enumerate(self.levels):
            if self.caps[i] >= self.n_max:
                continue
            want = _decay_cap(e, shifted, self.volume, mu, floor=ADEQUACY_LEVEL)
            if self.caps[i] < min(want, self.n_max):
                return False
        return True

    # -- moments -------------------------------------------------------------

    def _log_z_abs(self, mu: float) -> float:
        return self.grand(mu).log_z

    def _windowed(self, rest: RestrictedPartition, mu: float, t_count: int,
                  want_m1: bool = False, chunk: int = 128):
        """Row-stable sums s0[t] (and s1[t] = sum_M M r_M G(M+t)) for t windows.

        Returns (m, s0, s1): per-row max exponents and scaled sums such that
        sum_M r[M] G(M+t) = e^{m[t]} * s0[t] (times e^{rest.log_scale}).
        """
        lr = rest.log_coeff()
        lg = self._log_g(mu, len(lr) + t_count)
        windows = np.lib.stride_tricks.sliding_window_view(lg, len(lr))[:t_count]
        marr = np.empty(t_count)
        s0 = np.empty(t_count)
        s1 = np.empty(t_count) if want_m1 else None
        m_idx = np.arange(len(lr), dtype=float)
        for lo in range(0, t_count, chunk):
            hi = min(lo + chunk, t_count)
            mat = lr[None, :] + windows[lo:hi]
            mm = np.max(mat, axis=1)
            ws = np.exp(mat - mm[:, None])
            marr[lo:hi] = mm
            s0[lo:hi] = np.sum(ws, axis=1)
            if want_m1:
                s1[lo:hi] = ws @ m_idx
        return marr, s0, s1

    def _moment_cap(self, i: int) -> int:
        return min(self.n_max, max(self.caps[i], 4))

    def shell_moments(self, i: int, mu: float, log_z: float = None):
        """(<N_i>, <N_i^2>) for one mode of shell i, via leave-one-out."""
        if log_z is None:
            log_z = self._log_z_abs(mu)
        rest = self.leave_one_out(i)
        cap = self._moment_cap(i)
        la = self.shell_weights(i, cap).log_values
        m, s0, _ = self._windowed(rest, mu, cap + 1)
        expo = la + rest.log_scale + m - log_z
        contrib = np.exp(expo) * s0
        n = np.arange(cap + 1, dtype=float)
        return float(np.sum(n * contrib)), float(np.sum(n * n * contrib))

    def shell_cross_total(self, i: int, mu: float, log_z: float = None) -> float:
        """<N * N_i> for one mode of shell i."""
        if log_z is None:
            log_z = self._log_z_abs(mu)
        rest = self.leave_one_out(i)
        cap = self._moment_cap(i)
        la = self.shell_weights(i, cap).log_values
        m, s0, s1 = self._windowed(rest, mu, cap + 1, want_m1=True)
        expo = la + rest.log_scale + m - log_z
        n = np.arange(cap + 1, dtype=float)
        return float(np.sum(n * np.exp(expo) * (s1 + n * s0)))

    def pair_moment(self, i: int, j: int, mu: float, log_z: float = None) -> float:
        """<N_i * N_j> for single modes of two distinct shells."""
        if log_z is None:
            log_z = self._log_z_abs(mu)
        rest = self.leave_pair_out(i, j)
        cap_i = self._moment_cap(i)
        cap_j = self._moment_cap(j)
        ai = self.shell_weights(i, cap_i)
        aj = self.shell_weights(j, cap_j)
        ni = np.arange(cap_i + 1, dtype=float)
        nj = np.arange(cap_j + 1, dtype=float)
        # u[t] = sum_{ni+nj=t} ni ai(ni) nj aj(nj); scale out the max exponents
        sa = float(np.max(ai.log_values))
        sb = float(np.max(aj.log_values))
        u = np.convolve(ni * np.exp(ai.log_values - sa), nj * np.exp(aj.log_values - sb))
        m, s0, _ = self._windowed(rest, mu, len(u))
        val = u * np.exp(sa + sb + rest.log_scale + m - log_z) * s0
        return float(np.sum(val))

    def same_shell_pair_moment(self, i: int, mu: float, log_z: float = None) -> float:
        """<N_i N_i'> for two distinct modes inside one shell (needs g_i >= 2)."""
        if self.levels[i][1] < 2:
            raise DomainError("same-shell pair needs degeneracy >= 2")
        if log_z is None:
            log_z = self._log_z_abs(mu)
        prefix, suffix = self._chains()
        pos = self._pos_of[i]
        rest = convolve(prefix[pos], suffix[pos + 1], self.n_max)
        g = self.levels[i][1]
        if g - 2 > 0 and not self._skippable(i):
            rest = convolve(rest, self.shell_polynomial(i, g - 2), self.n_max)
        cap = self._moment_cap(i)
        la = self.shell_weights(i, cap).log_values
        n = np.arange(cap + 1, dtype=float)
        sa = float(np.max(la))
        u = np.convolve(n * np.exp(la - sa), n * np.exp(la - sa))
        m, s0, _ = self._windowed(rest, mu, len(u))
        val = u * np.exp(2.0 * sa + rest.log_scale + m - log_z) * s0
        return float(np.sum(val))

    def occupations(self, mu: float):
        """Arrays (<N_k>, <N_k^2>) over all shells (one mode per shell)."""
        log_z = self._log_z_abs(mu)
        occ = np.empty(len(self.levels))
        occ2 = np.empty(len(self.levels))
        for i in range(len(self.levels)):
            occ[i], occ2[i] = self.shell_moments(i, mu, log_z)
        return occ, occ2

    def bridge_log_expectation(self, mu: float) -> float:
        """ln omega(e^{(beta lam / 2V) sum_k N_k^2}) for the NonExtensive model.

        The observable factorizes per mode, so it is the ratio of a reweighted
        assembly (weights stripped of their quadratic part, i.e. mean-field
        weights) to the model's own grand sum.  Assembled in reversed shell
        order to keep the floating-point path distinct from pressure runs.
        """
        if self.params.variant is not Variant.NON_EXTENSIVE:
            raise DomainError("bridge expectation defined for the NonExtensive model")
        mf = ModelParams(Variant.MEAN_FIELD, self.params.beta, mu, self.params.lam)
        other = PartitionEngine(self.levels, mf, self.volume, self.n_max,
                                n_cap=self.n_cap, explicit_caps=self._explicit,
                                tail_tol=self.tail_tol, reverse_order=True)
        return other.grand(mu).log_z - self.grand(mu).log_z


# -- closed forms for the free gas -------------------------------------------

def free_pressure_exact(shells, beta: float, mu: float, volume: float) -> float:
    """Finite-volume free-gas pressure from the product formula (mu < 0)."""
    if mu >= 0.0:
        raise DomainError(f"free gas needs mu < 0, got {mu}")
    total = 0.0
    for e, g in _level_list(shells):
        total -= g * math.log(-math.expm1(-beta * (e - mu)))
    return total / (beta * volume)


def free_occupation(energy: float, beta: float, mu: float) -> float:
    """Bose factor <N_k> = 1 / (e^{beta(eps - mu)} - 1) for mu < eps."""
    if mu >= energy:
        raise DomainError(f"free occupation diverges: mu={mu} >= eps={energy}")
    return 1.0 / math.expm1(beta * (energy - mu))


# -- published moment bundle ---------------------------------------------------

@dataclass
class EnsembleMoments:
    """Exact finite-volume moment table at one state point.

    occupations/squares are per-shell single-mode values (every mode in a
    shell shares them by symmetry). pair_moments holds requested cross
    moments keyed by shell-index pairs, cross_total the <N N_k> values.
    """

    pressure: float
    log_z: float
    mean_n: float
    var_n: float
    occupations: np.ndarray
    squares: np.ndarray
    pair_moments: dict
    cross_total: dict
    tail_mass: float
    certified: bool
    n_cap: int
    n_max: int

    def validate(self, degeneracies, rtol: float = 1e-10):
        if self.var_n < -rtol * max(1.0, self.mean_n ** 2):
            raise DomainError(f"negative total-N variance {self.var_n}")
        if np.any(self.squares + 1e-300 < self.occupations ** 2):
            raise DomainError("per-mode second moment below squared mean")
        total = float(np.dot(np.asarray(degeneracies, dtype=float), self.occupations))
        if abs(total - self.mean_n) > rtol * max(1.0, abs(self.mean_n)):
            raise DomainError(
                f"occupancy sum {total} disagrees with mean N {self.mean_n}"
            )


def moments(shells, params: ModelParams, volume: float, *,
            n_max: int, n_cap: int = None, explicit_caps: bool = False,
            mu_ref: float = 0.0, pairs=(), with_total=(),
            tail_tol: float = DEFAULT_TAIL_TOL) -> EnsembleMoments:
    """Full moment table for one state point (builds a fresh engine)."""
    eng = PartitionEngine(shells, params, volume, n_max, n_cap=n_cap,
                          explicit_caps=explicit_caps, mu_ref=mu_ref,
                          tail_tol=tail_tol)
    return engine_moments(eng, params.mu, pairs=pairs, with_total=with_total)


def engine_moments(eng: PartitionEngine, mu: float, *, pairs=(),
                   with_total=()) -> EnsembleMoments:
    g = eng.grand(mu)
    occ, occ2 = eng.occupations(mu)
    pair_vals = {}
    for (i, j) in pairs:
        if i == j:
            pair_vals[(i, j)] = eng.same_shell_pair_moment(i, mu, g.log_z)
        else:
            pair_vals[(i, j)] = eng.pair_moment(i, j, mu, g.log_z)
    cross = {i: eng.shell_cross_total(i, mu, g.log_z) for i in with_total}
    return EnsembleMoments(
        pressure=g.pressure,
        log_z=g.log_z,
        mean_n=g.mean_n,
        var_n=g.var_n,
        occupations=occ,
        squares=occ2,
        pair_moments=pair_vals,
        cross_total=cross,
        tail_mass=g.tail_mass,
        certified=g.tail_mass < eng.tail_tol and eng._caps_adequate(),
        n_cap=max(eng.caps, default=0),
        n_max=eng.n_max,
    )


def grand_sum(q: RestrictedPartition, params: ModelParams, volume: float,
              mu_ref: float = 0.0, tail_frac: float = 0.9) -> GrandSum:
    """Grand sum over a prebuilt restricted partition (standalone entry point)."""
    n = np.arange(len(q.coeff), dtype=float)
    dmu = params.mu - mu_ref
    if params.variant is Variant.FREE:
        if params.mu >= 0.0:
            raise DomainError(f"free gas needs mu < 0, got {params.mu}")
        lg = params.beta * dmu * n
    else:
        lg = -params.beta * (params.lam * n * n / volume - dmu * n)
    t = q.log_coeff() + lg
    m = float(np.max(t))
    w = np.exp(t - m)
    s0 = float(np.sum(w))
    mean = float(np.sum(w * n)) / s0
    var = float(np.sum(w * (n - mean) ** 2)) / s0
    tail_start = int(math.floor(tail_frac * (len(q.coeff) - 1))) + 1
    tail = float(np.sum(w[tail_start:])) / s0 if tail_start < len(w) else 0.0
    log_z = q.log_scale + m + math.log(s0)
    return GrandSum(log_z=log_z, pressure=log_z / (params.beta * volume),
                    mean_n=mean, var_n=var, tail_mass=tail)


def auto_tilt(shells, params: ModelParams, volume: float, n_max: int,
              target_mean: float, *, cap_mu: float = None) -> float:
    """Reference tilt centering the assembled coefficients on target_mean.

    Coefficients share one log scale, so Q(N) is representable only within
    roughly 700 log units of its peak.  With per-mode quadratic suppression
    the plain Q peaks far below a condensed state's occupation window and the
    window's coefficients underflow; solving sum_shells g <n>_tilt =
    target_mean parks the peak where the grand sums look (the tilt acts as an
    effective single-mode chemical potential).  Models whose per-mode weights
    lack the quadratic term keep a flat ground shell, which holds Q up at
    every N, so they return 0.0 and use the untilted formulas verbatim.
    """
    if params.square_coupling <= 0.0:
        return 0.0
    if target_mean <= 0.0:
        raise DomainError(f"target_mean must be positive, got {target_mean}")
    levels = _level_list(shells)
    cap_mu = params.mu if cap_mu is None else cap_mu
    beta = params.beta
    c2 = params.square_coupling / volume
    caps = [min(n_max, _decay_cap(e, params, volume, cap_mu))
            for e, _g in levels]
    reach = sum(g * c for (_e, g), c in zip(levels, caps))
    if reach <= target_mean:
        raise SizingError(
            f"mode caps reach only {reach} total occupation, below the "
            f"tilt target {target_mean}")

    def mean_excess(t):
        total = 0.0
        for (e, g), cap in zip(levels, caps):
            n = np.arange(cap + 1, dtype=float)
            log_w = -beta * ((e - t) * n + c2 * n * n)
            w = np.exp(log_w - np.max(log_w))
            total += g * float(np.dot(w, n) / np.sum(w))
        return total - target_mean

    lo, hi = grow_bracket_monotone(mean_excess, 0.0, 0.25)
    return bisect_root(mean_excess, lo, hi, xtol=1e-4)


def adaptive_truncation(shells, params: ModelParams, volume: float, *,
                        tol: float = DEFAULT_TAIL_TOL, mu: float = None,
                        start_n_cap: int = 16, start_n_max: int = 64,
                        max_n_max: int = MAX_COEFF_LEN - 1,
                        mu_ref: float = 0.0) -> TruncationSpec:
    """Double (n_cap, N_max) until the tail and every mode cap certify.

    Deterministic: the doubling path depends only on the inputs.  Raises
    TruncationError when the budget is exhausted before certification.
    """
    mu = params.mu if mu is None else mu
    n_cap = start_n_cap
    n_max = start_n_max
    while True:
        eng = PartitionEngine(shells, params, volume, n_max, n_cap=n_cap,
                              mu_ref=mu_ref, tail_tol=tol)
        spec = eng.certify(mu)
        cap_bound = any(
            eng.caps[i] >= n_cap and n_cap < n_max
            and eng._log_a_eff(i, eng.caps[i]) > math.log(ADEQUACY_LEVEL)
            for i in range(len(eng.levels))
        )
        if spec.certified and not cap_bound:
            return spec
        grew = False
        if cap_bound:
            n_cap = min(2 * n_cap, n_max)
            grew = True
        if spec.tail_mass >= tol:
            if 2 * n_max <= max_n_max:
                n_max = 2 * n_max
                n_cap = min(n_cap * 2, n_max)
                grew = True
        if not grew:
            raise TruncationError(
                f"certification failed at n_max={n_max} (tail={spec.tail_mass:.3e})"
            )
