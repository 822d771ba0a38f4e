"""The multiplier weight g and the change of variables x(rho).

The production weight is the arctan family

    g(rho) = int_0^rho dtau / (1 + b tau^2) = arctan(sqrt(b) rho) / sqrt(b),

for which ``1/g' = 1 + b rho^2`` and so ``x(rho) = rho + b rho^3 / 3`` in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .report import ConditionReport, UsageError


@dataclass(frozen=True)
class MultiplierG:
    b: float = 0.1

    def __post_init__(self):
        if not self.b > 0:
            raise UsageError(f"width parameter b must be positive, got {self.b}")

    @property
    def bound(self) -> float:
        """sup |g| = pi / (2 sqrt(b))."""
        return math.pi / (2 * math.sqrt(self.b))

    def derivatives(self, rho):
        rho = np.asarray(rho, dtype=float)
        b, sb = self.b, math.sqrt(self.b)
        # written in y = sqrt(b) rho so that nothing overflows for huge |rho|
        y = sb * rho
        with np.errstate(over="ignore"):
            g1 = 1.0 / (1.0 + y * y)
        big = np.abs(y) > 1.0
        y_over_q = np.where(big, 1.0 / (1.0 / np.where(big, y, 1.0) + y), y * g1)
        g = np.arctan(y) / sb
        g2 = -2.0 * sb * y_over_q * g1
        g3 = 2.0 * b * (3.0 - 4.0 * g1) * g1 * g1
        return g, g1, g2, g3


@dataclass(frozen=True)
class CustomMultiplier:
    """A smooth weight given as ``func(rho) -> (g, g', g'', g''')``.

    Used for toy problems (e.g. a linear g) and for negative tests of the
    condition checker.  ``bound`` is an optional known value of sup|g|.
    """

    func: Callable
    bound: float | None = None
    name: str = "custom"

    def derivatives(self, rho):
        rho = np.asarray(rho, dtype=float)
        return tuple(np.broadcast_to(np.asarray(a, dtype=float), rho.shape).copy() for a in self.func(rho))


def linear_multiplier(slope: float = 1.0) -> CustomMultiplier:
    return CustomMultiplier(lambda r: (slope * r, slope + 0 * r, 0 * r, 0 * r), name="linear")


@dataclass
class GSample:
    rho: np.ndarray
    g: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    g3: np.ndarray


def eval_g(mult, rho) -> GSample:
    rho = np.asarray(rho, dtype=float)
    g, g1, g2, g3 = mult.derivatives(rho)
    if np.ndim(rho) == 0:
        return GSample(float(rho), float(g), float(g1), float(g2), float(g3))
    return GSample(rho, g, g1, g2, g3)


def _require_arctan(mult):
    if not isinstance(mult, MultiplierG):
        raise UsageError("x(rho) has a closed form only for the arctan family MultiplierG")


def x_of_rho(mult: MultiplierG, rho):
    """x(rho) = int_0^rho dtau / g'(tau) = rho + b rho^3 / 3."""
    _require_arctan(mult)
    rho_a = np.asarray(rho, dtype=float)
    x = rho_a + mult.b * rho_a**3 / 3.0
    return float(x) if np.ndim(rho) == 0 else x


def rho_of_x(mult: MultiplierG, x, maxit: int = 100):
    """Invert ``x_of_rho`` by safeguarded Newton iteration.

    For x > 0 the map is convex, and the initial guess
    ``min(x, cbrt(3x/b))`` bounds the root from above, so the iterates decrease
    monotonically.  A bisection bracket ``[0, guess]`` is kept anyway and any
    step leaving it is replaced by the midpoint.  Negative x uses oddness.
    """
    _require_arctan(mult)
    b = mult.b
    x_a = np.asarray(x, dtype=float)
    ax = np.abs(x_a)
    hi = np.minimum(ax, np.cbrt(3.0 * ax / b))
    lo = np.zeros_like(ax)
    r = hi.copy()
    for _ in range(maxit):
        F = r + b * r**3 / 3.0 - ax
        lo = np.where(F < 0, r, lo)
        hi = np.where(F > 0, r, hi)
        new = r - F / (1.0 + b * r * r)
        outside = (new < lo) | (new > hi)
        new = np.where(outside, 0.5 * (lo + hi), new)
        done = np.abs(new - r) <= 1e-16 * (1.0 + np.abs(r))
        r = new
        if np.all(done):
            break
    out = np.sign(x_a) * r
    return float(out) if np.ndim(x) == 0 else out


def check_g_conditions(
    mult,
    grid,
    alpha: float = -2.0,
    rho_asym: float = 100.0,
    max_ratio: float = 10.0,
    slope_tol: float = 0.25,
) -> ConditionReport:
    """Check the increasing / centered / bounded / inverse-polynomial conditions on g.

    The envelope condition is checked on the far region ``|rho| >= rho_asym``
    separately for each side: ``q_i = |g^{(i)}| |rho|^{-(alpha+1-i)}`` must keep a
    fixed sign pattern with ``max q_i / min q_i <= max_ratio``, and the
    least-squares slope of ``log|g^{(i)}|`` against ``log|rho|`` must be within
    ``slope_tol`` of ``alpha + 1 - i``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise UsageError("empty grid")
    g, g1, g2, g3 = mult.derivatives(grid)
    rep = ConditionReport()

    bad = np.flatnonzero(g1 <= 0)
    rep.add("g_increasing", bad.size == 0, min_g1=float(g1.min()),
            witness_rho=[float(grid[i]) for i in bad[:10]])

    g0 = float(eval_g(mult, 0.0).g)
    rep.add("g_centered", g0 == 0.0, g_at_0=g0)

    sup_g = float(np.max(np.abs(g)))
    bound = getattr(mult, "bound", None)
    # a bounded g must have flattened out over the outer half of the grid
    R = float(np.max(np.abs(grid)))
    g_half = np.abs(np.asarray(mult.derivatives(np.array([-R / 2, R / 2, -R, R]))[0]))
    tail = float(max(abs(g_half[2] - g_half[0]), abs(g_half[3] - g_half[1])))
    ok = tail <= 0.05 * max(sup_g, np.finfo(float).tiny)
    if bound is not None:
        ok = ok and sup_g <= bound * (1 + 1e-12)
    rep.add("g_bounded", ok, sup_abs_g=sup_g, known_bound=bound, tail_increment=tail)

    derivs = {1: g1, 2: g2, 3: g3}
    envelope = {}
    env_ok = True
    flagged = False
    for side, mask in (("right", grid >= rho_asym), ("left", grid <= -rho_asym)):
        if np.count_nonzero(mask) < 3:
            env_ok = False
            flagged = True
            envelope[side] = {"error": "fewer than 3 grid points beyond rho_asym"}
            continue
        ar = np.abs(grid[mask])
        side_info = {}
        for i, d in derivs.items():
            power = alpha + 1 - i
            vals = d[mask]
            signs = np.sign(vals)
            sign_ok = bool(np.all(signs == signs[0]) and signs[0] != 0)
            q = np.abs(vals) / ar**power
            c_i, C_i = float(q.min()), float(q.max())
            ratio = C_i / c_i if c_i > 0 else math.inf
            with np.errstate(divide="ignore"):
                slope = float(np.polyfit(np.log(ar), np.log(np.abs(vals)), 1)[0]) if sign_ok else math.nan
            slope_ok = sign_ok and abs(slope - power) <= slope_tol
            passed = sign_ok and ratio <= max_ratio and slope_ok
            env_ok &= passed
            flagged |= not slope_ok
            sgn = float(signs[0]) if sign_ok else 1.0
            lo_q, hi_q = sorted((sgn * c_i, sgn * C_i))
            side_info[f"g{i}"] = {
                "c": lo_q,
                "C": hi_q,
                "ratio": ratio,
                "fitted_exponent": slope,
                "expected_exponent": power,
                "passed": bool(passed),
            }
        envelope[side] = side_info
    rep.add("g_inverse_polynomial", env_ok, alpha=alpha, rho_asym=rho_asym,
            rho_asym_too_small=bool(flagged), envelope=envelope)
    return rep
