"""Background geometries and the potentials of the mode-reduced wave equation.

Two families are supported:

* :class:`Schwarzschild` -- exterior Schwarzschild written in the shifted tortoise
  coordinate ``rho`` with ``rho(3M) = 0`` (photon sphere at the origin).
* :class:`WarpedProduct` -- ``ds^2 = drho^2 + r(rho)^2 domega^2`` with a user supplied
  analytic radius profile.

For both, ``V``, ``V_L`` and ``f = V_L**((p-1)/2)`` and their ``rho``-derivatives are
evaluated in closed form.  Arrays are accepted everywhere; scalar in, scalar out.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .report import ConditionReport, UsageError

_NEWTON_MAXIT = 200


class DomainError(ValueError):
    """Raised for points outside the exterior region (r <= 2M)."""


@dataclass(frozen=True)
class Schwarzschild:
    mass: float = 1.0
    p: float = 3.0

    def __post_init__(self):
        if not self.mass > 0:
            raise UsageError(f"mass must be positive, got {self.mass}")
        _check_p(self.p)


@dataclass(frozen=True)
class WarpedProduct:
    """Warped product with radius profile ``profile(rho) -> (r, r', r'', r''')``.

    The third derivative is needed for ``dV/drho`` with ``V = r''/r``.
    """

    profile: Callable
    p: float = 3.0
    name: str = "custom"

    def __post_init__(self):
        _check_p(self.p)


BackgroundModel = Union[Schwarzschild, WarpedProduct]


def _check_p(p):
    if not (1.0 < p <= 3.0):
        raise UsageError(f"semilinear exponent p must lie in (1, 3], got {p}")


# Stock radius profiles --------------------------------------------------------

def quadratic_profile(rho):
    """r = 1 + rho^2 (closed geodesic surface at rho = 0)."""
    rho = np.asarray(rho, dtype=float)
    return 1.0 + rho**2, 2.0 * rho, np.full_like(rho, 2.0), np.zeros_like(rho)


def cosine_profile(rho):
    """r = 2 + cos(rho); periodic, so V_L has infinitely many critical points."""
    rho = np.asarray(rho, dtype=float)
    return 2.0 + np.cos(rho), -np.sin(rho), -np.cos(rho), np.sin(rho)


def constant_profile(radius=1.0):
    """r = const, giving V = 0 and V_L = 1/radius^2."""

    def profile(rho):
        rho = np.asarray(rho, dtype=float)
        z = np.zeros_like(rho)
        return z + radius, z, z, z

    return profile


def cosh_profile(k):
    """r = cosh(k rho), for which V = r''/r = k^2 exactly."""

    def profile(rho):
        rho = np.asarray(rho, dtype=float)
        c, s = np.cosh(k * rho), np.sinh(k * rho)
        return c, k * s, k * k * c, k**3 * s

    return profile


PROFILES = {
    "quadratic": lambda: quadratic_profile,
    "cosine": lambda: cosine_profile,
    "constant": lambda: constant_profile(1.0),
}


def warped(name: str, p: float = 3.0) -> WarpedProduct:
    try:
        return WarpedProduct(PROFILES[name](), p=p, name=name)
    except KeyError:
        raise UsageError(f"unknown radius profile {name!r}; choose from {sorted(PROFILES)}") from None


# Tortoise map -------------------------------------------------------------------

def _require_schwarzschild(model):
    if not isinstance(model, Schwarzschild):
        raise UsageError("the tortoise map is defined for the Schwarzschild model only")


def _scalarize(x, like):
    return float(x) if np.ndim(like) == 0 else x


def rho_of_r(model: Schwarzschild, r):
    """Closed-form tortoise coordinate ``r - 3M + 2M log((r - 2M)/M)``."""
    _require_schwarzschild(model)
    M = model.mass
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 2 * M):
        raise DomainError(f"r must exceed the horizon radius 2M = {2 * M}")
    return _scalarize(rho_of_horizon_distance(model, r_arr - 2 * M), r)


def rho_of_horizon_distance(model: Schwarzschild, s):
    """Tortoise coordinate as a function of ``s = r - 2M`` (exact near the horizon)."""
    _require_schwarzschild(model)
    M = model.mass
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0):
        raise DomainError("horizon distance s = r - 2M must be positive")
    out = s_arr - M + 2 * M * np.log(s_arr / M)
    return _scalarize(out, s)


def _log_horizon_distance(M, rho):
    """Solve ``M (e^t + 2t - 1) = rho`` for ``t = log(s/M)``.

    The left side is increasing and convex in t, and both starting guesses lie
    to the right of the root, so plain Newton decreases monotonically onto it.
    """
    rho = np.asarray(rho, dtype=float)
    t = np.where(rho >= 0, np.log1p(np.maximum(rho, 0.0) / M), (rho + M) / (2 * M))
    for _ in range(_NEWTON_MAXIT):
        et = np.exp(t)
        step = (M * (et + 2 * t - 1) - rho) / (M * (et + 2))
        t = t - step
        if np.all(np.abs(step) <= 4e-16 * (1 + np.abs(t))):
            break
    return t


def horizon_distance(model: Schwarzschild, rho):
    """``s = r(rho) - 2M``, computed without cancellation for rho << 0."""
    _require_schwarzschild(model)
    M = model.mass
    s = M * np.exp(_log_horizon_distance(M, rho))
    return _scalarize(s, rho)


def areal_radius(model: Schwarzschild, rho):
    """Areal radius r(rho) > 2M; strictly increasing in rho."""
    s = horizon_distance(model, rho)
    return 2 * model.mass + s


# Potentials ---------------------------------------------------------------------

@dataclass
class PotentialSample:
    rho: np.ndarray
    r: np.ndarray
    V: np.ndarray
    dV: np.ndarray
    V_L: np.ndarray
    dV_L: np.ndarray
    f: np.ndarray
    df: np.ndarray


def sample_potentials(model: BackgroundModel, rho) -> PotentialSample:
    """Evaluate V, V_L, f and their rho-derivatives analytically."""
    rho = np.asarray(rho, dtype=float)
    p = model.p
    if isinstance(model, Schwarzschild):
        M = model.mass
        s = M * np.exp(_log_horizon_distance(M, rho))
        r = 2 * M + s
        lapse = s / r  # 1 - 2M/r without cancellation
        V = 2 * M * lapse / r**3
        V_L = lapse / r**2
        # d/dr then chain rule with dr/drho = lapse; 3M - r = M - s and 8M - 3r = 2M - 3s
        dV = lapse * 2 * M * (2 * M - 3 * s) / r**5
        dV_L = lapse * 2 * (M - s) / r**4
        f = V_L ** ((p - 1) / 2)
        # dV_L / V_L = 2 (M - s) / r^2 is finite even where V_L underflows
        df = (p - 1) * f * (M - s) / r**2
    elif isinstance(model, WarpedProduct):
        r, r1, r2, r3 = (np.asarray(a, dtype=float) for a in model.profile(rho))
        if np.any(r <= 0):
            raise DomainError("radius profile must be positive")
        V = r2 / r
        dV = (r3 * r - r2 * r1) / r**2
        V_L = r**-2.0
        dV_L = -2 * r1 / r**3
        f = V_L ** ((p - 1) / 2)
        df = -(p - 1) * f * r1 / r
    else:
        raise UsageError(f"unsupported background model {type(model).__name__}")
    return PotentialSample(rho, r, V, dV, V_L, dV_L, f, df)


# Condition checks ----------------------------------------------------------------

def check_potential_conditions(model: BackgroundModel, grid, decay_fraction: float = 1e-3) -> ConditionReport:
    """Check radial/positivity/trapping/decay/compatibility conditions on a sorted grid.

    The unique trapping peak is checked through the sign pattern of
    ``dV_L``: positive on the left, negative on the right, one sign change and it
    must sit within one grid cell of rho = 0.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise UsageError("empty grid")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise UsageError("grid must be strictly increasing")
    ps = sample_potentials(model, grid)
    rep = ConditionReport()

    finite = all(np.all(np.isfinite(a)) for a in (ps.V, ps.dV, ps.V_L, ps.dV_L, ps.f))
    rep.add("radial", finite, note="potentials are functions of rho only; all samples finite")

    # exact zeros are tolerated only where the horizon factor underflows
    if isinstance(model, Schwarzschild):
        representable = horizon_distance(model, grid) > 0
    else:
        representable = np.ones_like(grid, dtype=bool)
    bad_V = np.flatnonzero((ps.V < 0) | ((ps.V == 0) & representable))
    bad_VL = np.flatnonzero((ps.V_L < 0) | ((ps.V_L == 0) & representable))
    rep.add(
        "positive_energy",
        bad_V.size == 0 and bad_VL.size == 0,
        min_V=float(ps.V.min()),
        min_V_L=float(ps.V_L.min()),
        witness_rho=[float(grid[i]) for i in np.union1d(bad_V, bad_VL)[:10]],
    )

    ok, detail = _trapping_verdict(grid, ps.dV_L)
    rep.add("unique_trapping_peak", ok, **detail)

    sup_dV = float(np.max(np.abs(ps.dV)))
    ends = [float(abs(ps.dV[0])), float(abs(ps.dV[-1]))]
    rep.add(
        "dV_well_behaved",
        np.isfinite(sup_dV) and max(ends) <= decay_fraction * sup_dV,
        sup_abs_dV=sup_dV,
        abs_dV_at_ends=ends,
    )

    rep.add("semilinearity", 1.0 < model.p <= 3.0, p=model.p)

    target = ps.V_L ** ((model.p - 1) / 2)
    rel = np.abs(ps.f - target) / np.maximum(np.abs(target), np.finfo(float).tiny)
    rel = np.where((ps.f == 0) & (target == 0), 0.0, rel)
    rep.add("compatible_nonlinearity", float(rel.max()) <= 1e-12, max_rel_err=float(rel.max()))
    return rep


def _trapping_verdict(grid, dV_L):
    scale = float(np.max(np.abs(dV_L))) if dV_L.size else 0.0
    cell = float(np.max(np.diff(grid))) if grid.size > 1 else 0.0
    # roundoff-level values next to rho = 0 carry no sign information
    zero = (np.abs(dV_L) <= 1e-13 * scale) & (np.abs(grid) <= cell)
    sign = np.where(zero, 0, np.sign(dV_L)).astype(int)
    idx = np.flatnonzero(sign != 0)
    s = sign[idx]
    changes = np.flatnonzero(s[1:] != s[:-1])
    crit = [0.5 * (grid[idx[c]] + grid[idx[c + 1]]) for c in changes]
    detail = {"critical_points": [float(c) for c in crit[:20]], "n_critical_points": len(crit)}
    if len(crit) != 1:
        return False, detail
    c = changes[0]
    is_max = s[c] > 0 and s[c + 1] < 0
    left, right = grid[idx[c]], grid[idx[c + 1]]
    near_origin = left - cell <= 0.0 <= right + cell
    detail.update(is_maximum=bool(is_max), bracket=[float(left), float(right)])
    return bool(is_max and near_origin), detail
