"""Discrete smooth-Hardy inequality.

For a weight exponent ``alpha >= 0`` and a localiser ``chi >= 0`` the inequality
reads

    int |u'|^2 (1+rho^2)^(-alpha/2) + chi |u|^2  >=  C int (1+rho^2)^(-(alpha+2)/2) |u|^2.

Only the radial reduction is implemented: for functions of rho the angular
integral factors out of both sides.  The best constant on a truncated domain is
the lowest eigenvalue of the P1 finite-element pencil ``(K + X) v = lam W v``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import solve_banded

from . import tridiag
from .report import UsageError
from .spectral import bump

_GAUSS_PTS = np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
_GAUSS_WTS = np.array([5.0, 8.0, 5.0]) / 9.0


@dataclass
class HardyConfig:
    alpha: float = 0.0
    chi: Callable = field(default_factory=lambda: bump(-1.0, 1.0))
    domain: tuple[float, float] = (-100.0, 100.0)
    n: int = 10_000

    def __post_init__(self):
        if self.alpha < 0:
            raise UsageError("alpha must be non-negative")
        a, b = self.domain
        if not b > a:
            raise UsageError("domain must be a nonempty interval")

    def derivative_weight(self, rho):
        return (1.0 + np.asarray(rho) ** 2) ** (-self.alpha / 2)

    def mass_weight(self, rho):
        return (1.0 + np.asarray(rho) ** 2) ** (-(self.alpha + 2) / 2)


def hardy_sides(cfg: HardyConfig, u: Callable, du: Callable, n_quad: int | None = None):
    """(lhs, rhs_unweighted) of the Hardy inequality by composite Simpson."""
    a, b = cfg.domain
    n_quad = n_quad or max(20_001, 4 * cfg.n + 1)
    x = np.linspace(a, b, n_quad)
    uu, dd = np.asarray(u(x), dtype=float), np.asarray(du(x), dtype=float)
    chi = np.asarray(cfg.chi(x), dtype=float)
    lhs = simpson(dd**2 * cfg.derivative_weight(x) + chi * uu**2, x=x)
    rhs = simpson(cfg.mass_weight(x) * uu**2, x=x)
    return float(lhs), float(rhs)


# Finite elements -----------------------------------------------------------------

def _element_forms(weight, nodes):
    """Per-element integrals over the Gauss points: (stiffness, mass_00, mass_01, mass_11)."""
    h = np.diff(nodes)
    t = 0.5 * (1 + _GAUSS_PTS)  # reference coordinate of each Gauss point in [0, 1]
    pts = nodes[:-1, None] + h[:, None] * t[None, :]
    w = 0.5 * h[:, None] * _GAUSS_WTS[None, :] * weight(pts)
    N0, N1 = 1 - t, t
    return w.sum(axis=1), (w * N0 * N0).sum(axis=1), (w * N0 * N1).sum(axis=1), (w * N1 * N1).sum(axis=1)


def assemble_forms(derivative_weight, potential, mass_weight, domain, n: int, neumann_left: bool = False):
    """Tridiagonal P1 forms of ``int w u'^2 + q u^2`` and ``int m u^2`` on interior nodes.

    Returns (a_diag, a_off, b_diag, b_off, nodes); Dirichlet ends unless ``neumann_left``.
    """
    a, b = domain
    nodes = np.linspace(a, b, n + 1)
    h = np.diff(nodes)
    kw, _, _, _ = _element_forms(derivative_weight, nodes)
    _, x00, x01, x11 = _element_forms(lambda r: np.asarray(potential(r), dtype=float), nodes)
    _, w00, w01, w11 = _element_forms(mass_weight, nodes)
    k_el = kw / h**2

    def glue(e00, e01, e11):
        d = np.zeros(n + 1)
        d[:-1] += e00
        d[1:] += e11
        return d, e01.copy()

    kd, ke = glue(k_el, -k_el, k_el)
    xd, xe = glue(x00, x01, x11)
    wd, we = glue(w00, w01, w11)
    lo = 0 if neumann_left else 1
    sl = slice(lo, n)
    so = slice(lo, n - 1)
    return (kd + xd)[sl], (ke + xe)[so], wd[sl], we[so], nodes[sl]


def assemble(cfg: HardyConfig, neumann_left: bool = False):
    """Tridiagonal (K + X) and W on interior nodes; Dirichlet ends unless ``neumann_left``."""
    return assemble_forms(cfg.derivative_weight, cfg.chi, cfg.mass_weight, cfg.domain, cfg.n, neumann_left)


@dataclass
class HardyConstant:
    value: float
    vector: np.ndarray
    nodes: np.ndarray
    domain: tuple[float, float]


def _lowest_pencil(ad, ae, bd, be, rtol=1e-10):
    def count(lam):
        return tridiag.pencil_count_below(ad, ae, bd, be, lam)

    ones = np.ones_like(ad)
    quot = (ad.sum() + 2 * ae.sum()) / (bd.sum() + 2 * be.sum())
    hi = quot * (1 + 1e-9) + 1e-300
    lo = 0.0
    while count(lo) != 0:
        lo = -2 * max(abs(lo), abs(hi))
    lam = tridiag.bisect_lowest(count, lo, hi, rtol=rtol)

    # inverse iteration for the minimiser, shifted just below lam
    sigma = lam * (1 - 1e-6) if lam > 0 else lam - 1e-9
    band = np.zeros((3, ad.size))
    band[0, 1:] = ae - sigma * be
    band[1] = ad - sigma * bd
    band[2, :-1] = ae - sigma * be
    v = ones / math.sqrt(ad.size)
    for _ in range(8):
        rhs = bd * v
        rhs[:-1] += be * v[1:]
        rhs[1:] += be * v[:-1]
        v = solve_banded((1, 1), band, rhs)
        v /= np.linalg.norm(v)
    return lam, v * np.sign(v[np.argmax(np.abs(v))])


def lowest_form_eigenvalue(derivative_weight, potential, mass_weight, domain, n: int) -> float:
    """Smallest value of (int w u'^2 + q u^2) / int m u^2 over the Dirichlet P1 space."""
    ad, ae, bd, be, _ = assemble_forms(derivative_weight, potential, mass_weight, domain, n)
    return float(_lowest_pencil(ad, ae, bd, be)[0])


def best_constant(cfg: HardyConfig, neumann_left: bool = False, return_minimizer: bool = False):
    """Smallest discrete Rayleigh quotient lhs/rhs (lowest pencil eigenvalue)."""
    if cfg.n < 100:
        raise UsageError("n must be at least 100")
    nodes_all = np.linspace(*cfg.domain, cfg.n + 1)
    if not np.any(np.asarray(cfg.chi(nodes_all)) > 0):
        warnings.warn("chi vanishes on the grid; the constant may degenerate to 0 as the domain grows")
    ad, ae, bd, be, nodes = assemble(cfg, neumann_left)
    lam, v = _lowest_pencil(ad, ae, bd, be)
    if return_minimizer:
        return HardyConstant(lam, v, nodes, tuple(cfg.domain))
    return lam


def pencil_quotient(cfg: HardyConfig, v, neumann_left: bool = False) -> float:
    """Rayleigh quotient v^T (K + X) v / v^T W v of a nodal vector."""
    ad, ae, bd, be, _ = assemble(cfg, neumann_left)
    num = ad @ (v * v) + 2 * ae @ (v[:-1] * v[1:])
    den = bd @ (v * v) + 2 * be @ (v[:-1] * v[1:])
    return float(num / den)


# Randomised verification ----------------------------------------------------------

def random_test_function(rng: np.random.Generator, domain, max_modes: int = 50,
                         center=None, half_width=None):
    """Band-limited sine series under a smooth compactly supported envelope.

    Returns (u, du).
    """
    a, b = domain
    span = 0.5 * (b - a)
    w = half_width if half_width is not None else rng.uniform(0.02, 0.5) * span
    c = center if center is not None else rng.uniform(a + w, b - w)
    n_modes = int(rng.integers(1, min(max_modes, 12) + 1))
    k = np.arange(1, n_modes + 1)
    coef = rng.normal(size=n_modes) / k

    def parts(rho):
        s = (np.asarray(rho, dtype=float) - c) / w
        inside = np.abs(s) < 1
        env = np.zeros_like(s)
        denv = np.zeros_like(s)
        si = s[inside]
        e = np.exp(1.0 - 1.0 / (1.0 - si**2))
        env[inside] = e
        denv[inside] = e * (-2 * si / (1 - si**2) ** 2)
        phase = np.pi * (s[..., None] + 1) / 2 * k
        S = np.sin(phase) @ coef
        dS = (np.cos(phase) * (np.pi / 2 * k)) @ coef
        return env, denv, S, dS

    def u(rho):
        env, _, S, _ = parts(rho)
        return env * S

    def du(rho):
        env, denv, S, dS = parts(rho)
        return (denv * S + env * dS) / w

    return u, du


@dataclass
class HardyReport:
    constant: float
    factor: float
    trials: int
    passed: int
    worst_ratio: float
    minimizer_ratio: float | None
    seed: int

    @property
    def all_passed(self) -> bool:
        ok = self.passed == self.trials
        if self.minimizer_ratio is not None:
            ok = ok and self.minimizer_ratio >= 1.0
        return ok

    def to_dict(self):
        return {
            "constant": self.constant,
            "factor": self.factor,
            "trials": self.trials,
            "passed": self.passed,
            "worst_ratio": self.worst_ratio,
            "minimizer_ratio": self.minimizer_ratio,
            "seed": self.seed,
            "all_passed": self.all_passed,
        }


def verify_hardy(cfg: HardyConfig, trials: int = 100, seed: int = 0, factor: float = 0.99,
                 include_minimizer: bool = True, constant: float | None = None) -> HardyReport:
    """Check lhs >= factor * C * rhs on seeded random test functions.

    ``ratio = lhs / (factor * C * rhs)``; a trial passes when ratio >= 1.  The
    discrete minimiser itself is checked as an extra trial through the FEM forms.
    """
    if trials < 1:
        raise UsageError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    if constant is None:
        res = best_constant(cfg, return_minimizer=True)
        constant, vec = res.value, res.vector
    else:
        vec = None
    target = factor * constant
    ratios = []
    for _ in range(trials):
        u, du = random_test_function(rng, cfg.domain)
        lhs, rhs = hardy_sides(cfg, u, du)
        ratios.append(lhs / (target * rhs) if rhs > 0 else math.inf)
    ratios = np.array(ratios)
    m_ratio = None
    if include_minimizer:
        if vec is None:
            vec = best_constant(cfg, return_minimizer=True).vector
        m_ratio = pencil_quotient(cfg, vec) / target
    return HardyReport(
        constant=float(constant),
        factor=factor,
        trials=trials,
        passed=int(np.count_nonzero(ratios >= 1.0)),
        worst_ratio=float(ratios.min()),
        minimizer_ratio=None if m_ratio is None else float(m_ratio),
        seed=seed,
    )
