"""Shared numeric helpers: bracketed bisection and compensated summation."""

import math

from .errors import DomainError


def bisect_root(f, lo, hi, *, xtol=1e-12, rtol=0.0, ftol=None, max_iter=200):
    """Root of f on [lo, hi] by plain bisection.

    Requires a sign change on the bracket.  Bisection is preferred over
    faster root finders everywhere in this package: every solved equation
    here is monotone, so robustness and determinism win over iteration count.
    """
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise DomainError(f"no sign change on bracket [{lo}, {hi}]: f={flo}, {fhi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if flo * fmid < 0.0:
            hi = mid
        else:
            lo, flo = mid, fmid
        if hi - lo <= xtol + rtol * abs(mid):
            break
        if ftol is not None and abs(fmid) <= ftol:
            return mid
    return 0.5 * (lo + hi)


def grow_bracket_monotone(f, center, step, *, lower_bound=None, upper_bound=None,
                          max_grow=200):
    """Bracket a root of a monotone increasing f by geometric expansion.

    Returns (lo, hi) with f(lo) <= 0 <= f(hi).  Bounds, when given, clamp the
    search (used for constraints like mu < 0 in the free gas).
    """
    fc = f(center)
    if fc == 0.0:
        return center, center
    x = center
    fx = fc
    for _ in range(max_grow):
        if fx > 0.0:
            nxt = x - step
            if lower_bound is not None:
                nxt = max(nxt, lower_bound)
        else:
            nxt = x + step
            if upper_bound is not None:
                nxt = min(nxt, upper_bound)
        fn = f(nxt)
        if fn == 0.0:
            return nxt, nxt
        if fn * fx < 0.0:
            return (nxt, x) if nxt < x else (x, nxt)
        if nxt == x:
            raise DomainError("bracket pinned at bound without sign change")
        x, fx = nxt, fn
        step *= 2.0
    raise DomainError("bracket growth failed: no sign change found")


class KahanSum:
    """Neumaier-compensated running sum (deterministic, order-fixed)."""

    __slots__ = ("s", "c")

    def __init__(self):
        self.s = 0.0
        self.c = 0.0

    def add(self, x):
        t = self.s + x
        if abs(self.s) >= abs(x):
            self.c += (self.s - t) + x
        else:
            self.c += (x - t) + self.s
        self.s = t

    @property
    def value(self):
        return self.s + self.c


def fmt17(x) -> str:
    """Serialize a float with 17 significant digits (round-trip exact)."""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return format(float(x), ".17g")
