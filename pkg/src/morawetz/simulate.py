"""Leapfrog evolution of one spherical-harmonic mode with multiplier bookkeeping.

Each mode ``u_ell(t, rho)`` obeys

    u_tt = u_rhorho - V u - ell(ell+1) V_L u - f |u|^(p-1) u,

with the nonlinear force only for ell = 0.  Along the run the energy, the
multiplier pairing ``2 <u_t, g u_rho + g'/2 u>`` and the four bulk integrands are
recorded on frames, so that the multiplier identity

    d/dt pairing = -(I + II + III + IV)

and the weighted space-time bound can be checked numerically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .geometry import BackgroundModel, Schwarzschild, sample_potentials
from .multiplier import MultiplierG
from .report import UsageError

BOUNDARIES = ("dirichlet", "sponge", "periodic")


class NumericalFault(RuntimeError):
    pass


@dataclass
class Gaussian:
    """amplitude * exp(-((rho - center)/width)^2)."""

    center: float = 0.0
    width: float = 2.0
    amplitude: float = 1.0

    def __call__(self, rho):
        return self.amplitude * np.exp(-(((np.asarray(rho) - self.center) / self.width) ** 2))


@dataclass
class InitialData:
    u: Callable = field(default_factory=Gaussian)
    ut: Optional[Callable] = None


@dataclass
class SimConfig:
    model: BackgroundModel = field(default_factory=Schwarzschild)
    mult: object = field(default_factory=MultiplierG)
    ell: int = 0
    nonlinear: bool = False
    p: Optional[float] = None
    L: float = 60.0
    h: float = 0.05
    dt: float = 0.025
    t_end: float = 30.0
    boundary: str = "dirichlet"
    initial_data: InitialData = field(default_factory=InitialData)
    frame_every: int = 10
    sponge_strength: float = 2.0

    def __post_init__(self):
        if self.p is None:
            self.p = self.model.p
        self.validate()

    def validate(self):
        if self.ell < 0 or int(self.ell) != self.ell:
            raise UsageError("ell must be a non-negative integer")
        if self.nonlinear and self.ell != 0:
            raise UsageError("nonlinear runs are restricted to ell = 0 (modes couple otherwise)")
        if abs(self.p - self.model.p) > 1e-15:
            raise UsageError("p must match the background model's p (f = V_L^((p-1)/2))")
        if not (self.L > 0 and self.h > 0 and self.dt > 0 and self.t_end >= 0):
            raise UsageError("L, h, dt must be positive and t_end non-negative")
        if self.dt / self.h > 0.9:
            raise UsageError(f"CFL violated: dt/h = {self.dt / self.h:.3g} > 0.9")
        if self.boundary not in BOUNDARIES:
            raise UsageError(f"boundary must be one of {BOUNDARIES}")
        if self.frame_every < 1:
            raise UsageError("frame_every must be >= 1")


@dataclass
class ModeField:
    ell: int
    grid: np.ndarray
    u: np.ndarray
    ut: np.ndarray
    time: float = 0.0

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])


def make_grid(cfg: SimConfig) -> np.ndarray:
    n = max(int(round(2 * cfg.L / cfg.h)), 2)
    if cfg.boundary == "periodic":
        return -cfg.L + 2 * cfg.L * np.arange(n) / n
    return np.linspace(-cfg.L, cfg.L, n + 1)


class _Coefficients:
    """Background quantities sampled once on the grid."""

    def __init__(self, cfg: SimConfig, grid: np.ndarray):
        ps = sample_potentials(cfg.model, grid)
        g, g1, g2, g3 = cfg.mult.derivatives(grid)
        lam = cfg.ell * (cfg.ell + 1)
        self.grid = grid
        self.h = float(grid[1] - grid[0])
        self.p = cfg.p
        self.lam = lam
        self.V, self.dV = ps.V, ps.dV
        self.VL, self.dVL = ps.V_L, ps.dV_L
        self.f, self.df = ps.f, ps.df
        self.g, self.g1, self.g3 = g, g1, g3
        self.linear_pot = ps.V + lam * ps.V_L
        self.nonlinear = cfg.nonlinear
        self.periodic = cfg.boundary == "periodic"
        self.weight = (1.0 + grid**2) ** -2
        if cfg.boundary == "sponge":
            width = 0.1 * cfg.L
            depth = np.clip((np.abs(grid) - (cfg.L - width)) / width, 0.0, None)
            self.damping = cfg.sponge_strength * depth**2
        else:
            self.damping = None

    def integrate(self, y):
        if self.periodic:
            return float(np.sum(y) * self.h)
        return float(trapezoid(y, dx=self.h))

    def d_rho(self, u):
        if self.periodic:
            return (np.roll(u, -1) - np.roll(u, 1)) / (2 * self.h)
        return np.gradient(u, self.h, edge_order=2)

    def accel(self, u):
        if self.periodic:
            lap = (np.roll(u, -1) - 2 * u + np.roll(u, 1)) / self.h**2
        else:
            lap = np.zeros_like(u)
            lap[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / self.h**2
        a = lap - self.linear_pot * u
        if self.nonlinear:
            a -= self.f * np.abs(u) ** (self.p - 1) * u
        if not self.periodic:
            a[0] = a[-1] = 0.0
        return a


def initial_field(cfg: SimConfig) -> ModeField:
    grid = make_grid(cfg)
    u = np.asarray(cfg.initial_data.u(grid), dtype=float).copy()
    ut = np.zeros_like(grid) if cfg.initial_data.ut is None else np.asarray(cfg.initial_data.ut(grid), dtype=float).copy()
    if cfg.boundary != "periodic":
        u[0] = u[-1] = ut[0] = ut[-1] = 0.0
    return ModeField(cfg.ell, grid, u, ut, 0.0)


def _verlet(u, ut, a, co: _Coefficients, dt):
    damp = None if co.damping is None else np.exp(-0.5 * co.damping * dt)
    if damp is not None:
        ut = ut * damp
    v_half = ut + 0.5 * dt * a
    u_new = u + dt * v_half
    a_new = co.accel(u_new)
    ut_new = v_half + 0.5 * dt * a_new
    if damp is not None:
        ut_new = ut_new * damp
    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(ut_new))):
        raise NumericalFault("non-finite values in the field (numerical blow-up)")
    return u_new, ut_new, a_new


def step(fld: ModeField, cfg: SimConfig, _co: _Coefficients | None = None) -> ModeField:
    """One velocity-Verlet (leapfrog) step; returns a new ModeField."""
    co = _co or _Coefficients(cfg, fld.grid)
    u, ut, _ = _verlet(fld.u, fld.ut, co.accel(fld.u), co, cfg.dt)
    return ModeField(fld.ell, fld.grid, u, ut, fld.time + cfg.dt)


# Diagnostics --------------------------------------------------------------------

def _energy(u, ut, co: _Coefficients):
    # gradient term from centred differences at cell midpoints: this is the
    # discrete energy the semi-discrete scheme conserves exactly
    du = (np.roll(u, -1) - u) if co.periodic else np.diff(u)
    grad2 = float(np.sum(du**2) / co.h)
    dens = ut**2 + co.linear_pot * u**2
    if co.nonlinear:
        dens = dens + 2.0 / (co.p + 1) * co.f * np.abs(u) ** (co.p + 1)
    return co.integrate(dens) + grad2


def energy(fld: ModeField, cfg: SimConfig) -> float:
    """int u_t^2 + u_rho^2 + (V + ell(ell+1) V_L) u^2 + 2 f |u|^(p+1)/(p+1) drho."""
    return _energy(fld.u, fld.ut, _Coefficients(cfg, fld.grid))


def _pairing(u, ut, co):
    return 2.0 * co.integrate(ut * (co.g * co.d_rho(u) + 0.5 * co.g1 * u))


def multiplier_pairing(fld: ModeField, cfg: SimConfig) -> float:
    """2 int u_t (g u_rho + g'/2 u) drho."""
    return _pairing(fld.u, fld.ut, _Coefficients(cfg, fld.grid))


def _bulk(u, co):
    ur = co.d_rho(u)
    I = co.integrate(2.0 * co.g1 * ur**2)
    II = co.integrate((-0.5 * co.g3 - co.g * co.dV) * u**2)
    III = co.integrate(-co.g * co.dVL * co.lam * u**2)
    if co.nonlinear:
        # (p-1)(f g' - 2/(p-1) g f') F(u), with F = |u|^(p+1)/(p+1)
        bracket = (co.p - 1) * co.f * co.g1 - 2.0 * co.g * co.df
        IV = co.integrate(bracket * np.abs(u) ** (co.p + 1) / (co.p + 1))
    else:
        IV = 0.0
    return I, II, III, IV


def bulk_terms(fld: ModeField, cfg: SimConfig):
    """(I, II, III, IV) integrated over rho at one instant."""
    return _bulk(fld.u, _Coefficients(cfg, fld.grid))


def pairing_constant(cfg: SimConfig, grid=None, n_max: int = 20_000) -> float:
    """C with |pairing| <= C E.

    C = sup|g| + sqrt(sup(g'^2 (1+rho^2)) / C_H), where C_H is the discrete Hardy
    constant (alpha = 0) with localiser V + ell(ell+1) V_L on the simulation
    domain, so that E >= C_H int u^2/(1+rho^2).
    """
    from .hardy import HardyConfig, best_constant

    grid = make_grid(cfg) if grid is None else grid
    g, g1, _, _ = cfg.mult.derivatives(grid)
    lam = cfg.ell * (cfg.ell + 1)

    def chi(r):
        ps = sample_potentials(cfg.model, r)
        return ps.V + lam * ps.V_L

    n = int(min(n_max, max(200, grid.size - 1)))
    with warnings.catch_warnings():
        # a vanishing localiser (free case, ell = 0) only makes C large, which is still valid
        warnings.simplefilter("ignore", UserWarning)
        c_h = best_constant(HardyConfig(alpha=0.0, chi=chi, domain=(float(grid[0]), float(grid[-1])), n=n))
    K = float(np.max(g1**2 * (1 + grid**2)))
    return float(np.max(np.abs(g)) + math.sqrt(K / c_h))


def bulk_coercivity(cfg: SimConfig, grid=None, n_max: int = 20_000) -> float:
    """c_B with I + II + III >= c_B int u^2 / (1+rho^2)^2 on the Dirichlet domain.

    Lowest eigenvalue of the P1 pencil for the quadratic form
    ``int 2 g1 u_rho^2 + (-g3/2 - g V' - ell(ell+1) g V_L') u^2``.
    """
    from .hardy import lowest_form_eigenvalue

    grid = make_grid(cfg) if grid is None else grid
    lam = cfg.ell * (cfg.ell + 1)

    def dweight(r):
        return 2.0 * cfg.mult.derivatives(r)[1]

    def pot(r):
        ps = sample_potentials(cfg.model, r)
        g, _, _, g3 = cfg.mult.derivatives(r)
        return -0.5 * g3 - g * ps.dV - lam * g * ps.dV_L

    n = int(min(n_max, max(200, grid.size - 1)))
    return lowest_form_eigenvalue(dweight, pot, lambda r: (1.0 + np.asarray(r) ** 2) ** -2,
                                  (float(grid[0]), float(grid[-1])), n)


def main_bound_constant(cfg: SimConfig, grid=None) -> tuple[float, float, float]:
    """(C_main, C_pair, c_B) with int_0^T int u^2/(1+rho^2)^2 <= C_main E.

    Integrating the identity in time and dropping III, IV >= 0 gives
    ``c_B * weighted_l2(T) <= pairing(0) - pairing(T) <= 2 C_pair E``.
    C_main is infinite when the form is not coercive (c_B <= 0).
    """
    c_pair = pairing_constant(cfg, grid)
    c_b = bulk_coercivity(cfg, grid)
    c_main = 2.0 * c_pair / c_b if c_b > 0 else math.inf
    return c_main, c_pair, c_b


MAIN_BOUND_SAFETY = 10.0


@dataclass
class MorawetzReport:
    times: np.ndarray
    energy: np.ndarray
    pairing: np.ndarray
    bulk_I: np.ndarray
    bulk_II: np.ndarray
    bulk_III: np.ndarray
    bulk_IV: np.ndarray
    weighted_l2: np.ndarray
    identity_residual: float
    energy_drift: float
    boundary_contact_time: Optional[float]
    sup_u: float
    sup_u0: float
    pairing_constant: Optional[float] = None
    main_bound_constant: Optional[float] = None
    invariants: dict = field(default_factory=dict)

    @property
    def E0(self) -> float:
        return float(self.energy[0])

    def weighted_ratio(self):
        return self.weighted_l2 / self.E0

    def weighted_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.weighted_l2))

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.invariants.values())

    def to_dict(self):
        return {
            "E0": self.E0,
            "identity_residual": self.identity_residual,
            "energy_drift": self.energy_drift,
            "boundary_contact_time": self.boundary_contact_time,
            "sup_u": self.sup_u,
            "sup_u0": self.sup_u0,
            "pairing_constant": self.pairing_constant,
            "main_bound_constant": self.main_bound_constant,
            "weighted_l2_final": float(self.weighted_l2[-1]),
            "weighted_l2_over_E": float(self.weighted_l2[-1] / self.E0) if self.E0 > 0 else math.nan,
            "time_integrated_I_plus_II": float(_cumtrapz(self.bulk_I + self.bulk_II, self.times)[-1]),
            "invariants": self.invariants,
            "passed": self.passed,
            "n_frames": int(self.times.size),
        }

    def series(self):
        header = ["t", "E", "pairing", "I", "II", "III", "IV", "weighted_l2"]
        cols = [self.times, self.energy, self.pairing, self.bulk_I, self.bulk_II,
                self.bulk_III, self.bulk_IV, self.weighted_l2]
        return header, cols


def _cumtrapz(y, t):
    if len(t) < 2:
        return np.zeros_like(np.asarray(y, dtype=float))
    return cumulative_trapezoid(y, t, initial=0.0)


def run(
    cfg: SimConfig,
    energy_tol: float = 1e-6,
    identity_tol: float = 1e-3,
    check_pairing_bound: bool = True,
) -> MorawetzReport:
    """Evolve to t_end, recording frames every ``cfg.frame_every`` steps.

    The energy drift and the identity residual are evaluated only on frames
    before any signal reaches the outer 5% of the domain, where the walls (or
    sponge) add boundary terms absent from the identity.
    """
    fld = initial_field(cfg)
    co = _Coefficients(cfg, fld.grid)
    n_steps = int(math.ceil(cfg.t_end / cfg.dt - 1e-9))
    u, ut = fld.u, fld.ut
    a = co.accel(u)
    sup_u0 = float(np.max(np.abs(u)))
    scale0 = max(sup_u0, float(np.max(np.abs(ut))), 1e-300)
    edge = np.abs(fld.grid) >= 0.95 * cfg.L if cfg.boundary != "periodic" else np.zeros_like(fld.grid, dtype=bool)

    rows = []
    contact = None
    sup_u = sup_u0

    def record(t):
        rows.append((t, _energy(u, ut, co), _pairing(u, ut, co), *_bulk(u, co),
                     co.integrate(co.weight * u**2)))

    record(0.0)
    for k in range(1, n_steps + 1):
        u, ut, a = _verlet(u, ut, a, co, cfg.dt)
        t = k * cfg.dt
        if k % cfg.frame_every == 0 or k == n_steps:
            record(t)
            sup_u = max(sup_u, float(np.max(np.abs(u))))
            if contact is None and np.any(edge):
                if max(np.max(np.abs(u[edge])), np.max(np.abs(ut[edge]))) > 1e-8 * scale0:
                    contact = t

    data = np.array(rows, dtype=float)
    times, E, P, I, II, III, IV, winst = data.T
    weighted = _cumtrapz(winst, times)
    bulk_int = _cumtrapz(I + II + III + IV, times)
    pre = times < contact if contact is not None else np.ones_like(times, dtype=bool)
    pre[0] = True
    E0 = E[0]
    residual = float(np.max(np.abs(P - P[0] + bulk_int)[pre]) / (1.0 + E0))
    drift = float(np.max(np.abs(E - E0)[pre]) / E0) if E0 > 0 else 0.0

    rep = MorawetzReport(times, E, P, I, II, III, IV, weighted, residual, drift, contact,
                         sup_u, sup_u0)

    inv = {}
    if cfg.boundary == "dirichlet":
        inv["energy_conservation"] = {"passed": drift <= energy_tol, "drift": drift, "tol": energy_tol}
    inv["identity_residual"] = {"passed": residual <= identity_tol, "residual": residual, "tol": identity_tol}
    inv["weighted_l2_nondecreasing"] = {"passed": bool(np.all(np.diff(weighted) >= 0))}
    inv["term_III_nonnegative"] = {"passed": bool(np.all(III >= 0)), "min": float(III.min())}
    inv["term_IV_nonnegative"] = {"passed": bool(np.all(IV >= 0)), "min": float(IV.min())}
    if cfg.nonlinear:
        inv["no_blowup"] = {"passed": sup_u <= 10 * sup_u0, "sup_u": sup_u, "sup_u0": sup_u0}
    if check_pairing_bound and cfg.boundary != "periodic" and E0 > 0:
        c_main, c_pair, c_b = main_bound_constant(cfg, fld.grid)
        rep.pairing_constant = c_pair
        rep.main_bound_constant = c_main
        worst = float(np.max(np.abs(P) / E))
        inv["pairing_bounded_by_energy"] = {"passed": worst <= c_pair, "max_pairing_over_E": worst, "C": c_pair}
        ratio = float(weighted[-1] / E0)
        inv["weighted_l2_main_bound"] = {
            "passed": bool(ratio <= MAIN_BOUND_SAFETY * c_main),
            "weighted_l2_over_E": ratio,
            "C_main": c_main,
            "coercivity": c_b,
            "safety": MAIN_BOUND_SAFETY,
        }
    rep.invariants = inv
    return rep


# Presets ---------------------------------------------------------------------------

def preset(name: str, refinement: int = 0) -> SimConfig:
    """Named configurations; ``refinement`` halves h and dt that many times."""
    from .geometry import constant_profile, WarpedProduct

    scale = 0.5**refinement
    # dt/h is kept at 1/16 or below: the O(dt^2) Verlet energy offset then stays below 1e-6
    if name == "free":
        cfg = dict(model=WarpedProduct(constant_profile(1.0), name="constant"), ell=0,
                   L=45.0, h=0.04, dt=0.0025, t_end=20.0, frame_every=20,
                   initial_data=InitialData(Gaussian(0.0, 3.0, 1.0)))
    elif name == "schwarzschild_l2":
        cfg = dict(model=Schwarzschild(1.0), ell=2, L=45.0, h=0.04, dt=0.0025, t_end=20.0,
                   frame_every=20, initial_data=InitialData(Gaussian(0.0, 3.0, 1.0)))
    elif name == "nonlinear_l0":
        cfg = dict(model=Schwarzschild(1.0), ell=0, nonlinear=True, L=400.0, h=0.08, dt=0.0025,
                   t_end=200.0, initial_data=InitialData(Gaussian(0.0, 3.0, 2.0)), frame_every=40)
    elif name == "trapping_l10":
        cfg = dict(model=Schwarzschild(1.0), ell=10, L=100.0, h=0.02, dt=0.000625, t_end=60.0,
                   frame_every=160, initial_data=InitialData(Gaussian(0.0, 1.5, 1.0)))
    else:
        raise UsageError(f"unknown simulation preset {name!r}")
    cfg["h"] *= scale
    cfg["dt"] *= scale
    return SimConfig(**cfg)


PRESETS = ("free", "schwarzschild_l2", "nonlinear_l0", "trapping_l10")
