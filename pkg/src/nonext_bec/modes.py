"""Periodic-box momentum modes grouped into energy shells.

A cubic box of side L with periodic boundaries has allowed momenta
k = (2*pi/L) * n for integer vectors n.  The single-particle energy
eps_k = |k|^2 / (2m) depends only on s = |n|^2, so modes are enumerated
as shells (s, degeneracy) instead of one record per vector.  Degeneracies
are exact lattice point counts, computed by an integer convolution over
coordinates rather than by listing vectors.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, SizingError

DEFAULT_MAX_MODES = 5_000_000


@dataclass(frozen=True)
class BoxSpec:
    """Finite periodic box and its momentum cutoff.

    n_max is the Chebyshev cutoff on integer mode vectors: every component
    of n lies in [-n_max, n_max], so the box holds (2*n_max+1)^d modes.
    """

    dimension: int
    side_length: float
    n_max: int
    mass: float = 1.0

    def __post_init__(self):
        if self.dimension < 1:
            raise DomainError(f"dimension must be >= 1, got {self.dimension}")
        if not (self.side_length > 0.0):
            raise DomainError(f"side_length must be positive, got {self.side_length}")
        if self.n_max < 0:
            raise DomainError(f"n_max must be >= 0, got {self.n_max}")
        if not (self.mass > 0.0):
            raise DomainError(f"mass must be positive, got {self.mass}")

    @property
    def volume(self) -> float:
        return self.side_length ** self.dimension

    @property
    def mode_count(self) -> int:
        return (2 * self.n_max + 1) ** self.dimension

    @property
    def k_spacing(self) -> float:
        return 2.0 * math.pi / self.side_length

    @property
    def below_critical_dimension(self) -> bool:
        # d <= 2 has no finite critical density; finite-volume runs still work
        return self.dimension < 3

    def energy_of_norm2(self, s: int) -> float:
        return self.k_spacing ** 2 * s / (2.0 * self.mass)

    def k_norm_of_norm2(self, s: int) -> float:
        return self.k_spacing * math.sqrt(s)


@dataclass(frozen=True)
class ModeShell:
    """One energy shell: all modes sharing |n|^2 = norm2."""

    norm2: int
    energy: float
    degeneracy: int
    k_norm: float
    rep_vector: tuple

    def __post_init__(self):
        if self.degeneracy < 1:
            raise DomainError("empty shell")


@lru_cache(maxsize=64)
def _norm2_counts(dimension: int, n_max: int):
    """Exact count of integer vectors in [-n_max, n_max]^d per |n|^2 value.

    One axis contributes a histogram over j^2; d axes convolve.  Counts fit
    in int64 because mode totals are capped well below 2^63.
    """
    axis = np.zeros(n_max * n_max + 1, dtype=np.int64)
    for j in range(-n_max, n_max + 1):
        axis[j * j] += 1
    counts = axis
    for _ in range(dimension - 1):
        counts = np.convolve(counts, axis)
    return counts


def _lex_smallest_rep(dimension, n_max, s):
    """Lexicographically smallest integer vector with |n|^2 = s.

    Greedy per coordinate: take the most negative value whose residual is
    still representable by the remaining coordinates.
    """
    rep = []
    remaining = s
    for pos in range(dimension):
        dims_left = dimension - pos - 1
        chosen = None
        for v in range(-n_max, n_max + 1):
            resid = remaining - v * v
            if resid < 0:
                continue
            if dims_left == 0:
                ok = resid == 0
            else:
                tail = _norm2_counts(dims_left, n_max)
                ok = resid < len(tail) and tail[resid] > 0
            if ok:
                chosen = v
                break
        if chosen is None:
            raise DomainError(f"norm2 {s} not representable in d={dimension}, n_max={n_max}")
        rep.append(chosen)
        remaining -= chosen * chosen
    return tuple(rep)


def enumerate_shells(box: BoxSpec, *, max_modes: int = DEFAULT_MAX_MODES):
    """All energy shells of the box, sorted by norm2 (hence by energy).

    Raises SizingError when the cutoff implies more modes than max_modes.
    Degeneracies sum exactly to (2*n_max+1)^d.
    """
    if box.mode_count > max_modes:
        raise SizingError(
            f"mode count {box.mode_count} exceeds cap {max_modes}; lower n_max"
        )
    counts = _norm2_counts(box.dimension, box.n_max)
    shells = []
    for s, g in enumerate(counts):
        if g == 0:
            continue
        shells.append(
            ModeShell(
                norm2=s,
                energy=box.energy_of_norm2(s),
                degeneracy=int(g),
                k_norm=box.k_norm_of_norm2(s),
                rep_vector=_lex_smallest_rep(box.dimension, box.n_max, s),
            )
        )
    return shells


def band_shells(shells, delta: float, *, mode: str = "k_norm"):
    """Shells inside the low-momentum (or low-energy) band.

    mode="k_norm" selects |k| < delta; mode="energy" selects eps_k < delta.
    The zero mode belongs to every band by definition.
    """
    if delta <= 0.0:
        raise DomainError(f"band width must be positive, got {delta}")
    if mode == "k_norm":
        picked = [sh for sh in shells if sh.k_norm < delta or sh.norm2 == 0]
    elif mode == "energy":
        picked = [sh for sh in shells if sh.energy < delta or sh.norm2 == 0]
    else:
        raise DomainError(f"unknown band mode {mode!r}")
    return picked
