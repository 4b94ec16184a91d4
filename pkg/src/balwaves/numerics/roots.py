"""Bracketed scalar root finding."""

from __future__ import annotations

import math
from typing import Callable

from scipy.optimize import brentq


class NoSignChange(ValueError):
    pass


def find_root_bracketed(fn: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Root of ``fn`` in [lo, hi] by Brent's method.

    Requires a strict sign change between the endpoints (an exact zero at
    an endpoint is returned directly).
    """
    f_lo, f_hi = fn(lo), fn(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)) or (f_lo > 0) == (f_hi > 0):
        raise NoSignChange(f"no sign change on [{lo}, {hi}]: f={f_lo!r}, {f_hi!r}")
    xtol = tol * (1.0 + max(abs(lo), abs(hi)))
    return brentq(fn, lo, hi, xtol=xtol, rtol=4 * 2.220446049250313e-16, maxiter=200)


def scan_brackets(fn: Callable[[float], float], grid) -> list[tuple[float, float]]:
    """Adjacent grid pairs on which ``fn`` changes sign (non-finite values skipped)."""
    vals = [fn(x) for x in grid]
    out = []
    for (a, fa), (b, fb) in zip(zip(grid, vals), zip(grid[1:], vals[1:])):
        if math.isfinite(fa) and math.isfinite(fb) and (fa > 0) != (fb > 0):
            out.append((a, b))
    return out
