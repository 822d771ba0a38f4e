"""Sturm-sequence (inertia) counting for symmetric tridiagonal matrices and pencils.

``count_below(d, e, lam)`` returns the number of eigenvalues of the symmetric
tridiagonal matrix ``T = tridiag(e, d, e)`` strictly below ``lam``; it equals the
number of negative pivots in the LDL^T factorisation of ``T - lam I``
(Sylvester's law of inertia).  The pencil version counts eigenvalues of
``K v = lam B v`` with ``B`` positive definite, using the same recurrence on
``K - lam B``.
"""

from __future__ import annotations

import math

import numpy as np

_TINY = 1e-300


def _negative_pivots(diag, off) -> int:
    # LDL^T pivots of a symmetric tridiagonal; exact zeros nudged off the axis
    count = 0
    q = 1.0
    prev_off2 = 0.0
    for k in range(len(diag)):
        q = diag[k] - (prev_off2 / q if k else 0.0)
        if q == 0.0:
            q = -_TINY
        if q < 0.0:
            count += 1
        if k < len(off):
            prev_off2 = off[k] * off[k]
    return count


def count_below(d, e, lam: float) -> int:
    d = np.asarray(d, dtype=float)
    return _negative_pivots((d - lam).tolist(), np.asarray(e, dtype=float).tolist())


def pencil_count_below(kd, ke, bd, be, lam: float) -> int:
    kd, ke = np.asarray(kd, dtype=float), np.asarray(ke, dtype=float)
    bd, be = np.asarray(bd, dtype=float), np.asarray(be, dtype=float)
    return _negative_pivots((kd - lam * bd).tolist(), (ke - lam * be).tolist())


def gershgorin(d, e) -> tuple[float, float]:
    d = np.asarray(d, dtype=float)
    a = np.abs(np.asarray(e, dtype=float))
    rad = np.zeros_like(d)
    rad[:-1] += a
    rad[1:] += a
    return float(np.min(d - rad)), float(np.max(d + rad))


def bisect_lowest(count, lo: float, hi: float, rtol: float = 1e-12, atol: float = 0.0, maxit: int = 200) -> float:
    """Smallest eigenvalue by bisection given an inertia counter ``count(lam)``.

    Requires ``count(lo) == 0`` and ``count(hi) >= 1``.
    """
    if count(lo) != 0:
        raise ValueError("lower bracket already has eigenvalues below it")
    if count(hi) < 1:
        raise ValueError("upper bracket has no eigenvalue below it")
    for _ in range(maxit):
        mid = 0.5 * (lo + hi)
        if count(mid) >= 1:
            hi = mid
        else:
            lo = mid
        if hi - lo <= max(atol, rtol * max(abs(lo), abs(hi))):
            break
    return 0.5 * (lo + hi)


def smallest_eigenvalue(d, e, rtol: float = 1e-13) -> float:
    lo, hi = gershgorin(d, e)
    span = max(hi - lo, 1.0)
    lo -= 1e-9 * span
    hi += 1e-9 * span
    return bisect_lowest(lambda lam: count_below(d, e, lam), lo, hi, rtol=rtol, atol=math.ulp(span) * 8)
