"""Positivity of the operator A = -(2-eps1) d g' d - g'''/2 - g V' - eps1 chi1.

The positive spectral condition is reduced to the existence of an everywhere
positive solution of ``A psi = 0``.  This module

* integrates that ODE from ``rho0`` down to ``-rho0`` (shooting),
* checks the power-law matching conditions at both truncation points,
* rewrites A as a Schroedinger operator ``B = -(2-eps1) d_x^2 + W`` in the
  variable ``x(rho)`` and checks the ground-state transform identity,
* provides an independent finite-difference eigenvalue oracle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad, simpson, solve_ivp
from scipy.linalg import eigh_tridiagonal

from . import tridiag
from .geometry import BackgroundModel, Schwarzschild, sample_potentials
from .multiplier import MultiplierG, rho_of_x, x_of_rho
from .report import UsageError

RENORM_THRESHOLD = 1e150


class ConfigurationError(UsageError):
    pass


class IntegrationError(RuntimeError):
    def __init__(self, message: str, last_rho: float):
        super().__init__(f"{message} (last good rho = {last_rho!r})")
        self.last_rho = last_rho


class PositivityError(ValueError):
    """A precondition requiring a positive solution was violated."""


def bump(a: float, b: float, height: float = 1.0) -> Callable:
    """Smooth bump supported on [a, b] with maximum ``height`` at the midpoint."""
    if not b > a:
        raise UsageError("bump needs a < b")
    c, w = 0.5 * (a + b), 0.5 * (b - a)

    def chi(rho):
        s = (np.asarray(rho, dtype=float) - c) / w
        inside = np.abs(s) < 1
        out = np.zeros_like(s)
        out[inside] = height * np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
        return out if out.ndim else float(out)

    return chi


@dataclass(frozen=True)
class SpectralProblem:
    model: BackgroundModel = field(default_factory=Schwarzschild)
    mult: object = field(default_factory=MultiplierG)
    eps1: float = 1e-3
    chi1: Optional[Callable] = None
    rho0: float = 1000.0

    def __post_init__(self):
        # the ODE only needs a positive kinetic coefficient 2 - eps1
        if not (0.0 < self.eps1 < 2.0):
            raise ConfigurationError(f"eps1 must lie in (0, 2), got {self.eps1}")
        if not self.rho0 > 0:
            raise ConfigurationError(f"rho0 must be positive, got {self.rho0}")

    @property
    def kinetic(self) -> float:
        return 2.0 - self.eps1

    @property
    def asym_eps(self) -> float:
        """Relative error of the asymptotic approximations at rho0: 2/(1 + b rho0^2)."""
        if isinstance(self.mult, MultiplierG):
            return 2.0 / (1.0 + self.mult.b * self.rho0**2)
        return 0.0

    def check_asymptotic_regime(self) -> None:
        if 3.0 * self.asym_eps >= 0.01:
            raise ConfigurationError(
                f"eps' = 3 * 2/(1 + b rho0^2) = {3 * self.asym_eps:.3g} is not below 1/100; increase rho0 or b"
            )

    def chi(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.chi1 is None:
            return np.zeros_like(rho)
        c = np.asarray(self.chi1(rho), dtype=float)
        if np.any(c < 0):
            raise ConfigurationError("chi1 must be non-negative")
        return np.broadcast_to(c, rho.shape)

    def coefficients(self, rho):
        """(g, g', g'', g''', V', chi1) at rho."""
        g, g1, g2, g3 = self.mult.derivatives(rho)
        dV = sample_potentials(self.model, rho).dV
        return g, g1, g2, g3, dV, self.chi(rho)

    def potential(self, rho):
        """The zeroth-order coefficient -g'''/2 - g V' - eps1 chi1 of A."""
        g, g1, g2, g3, dV, chi = self.coefficients(rho)
        return -0.5 * g3 - g * dV - self.eps1 * chi


def ode_rhs(prob: SpectralProblem, rho, psi, dpsi):
    """psi'' from A psi = 0 written in second-order form."""
    g, g1, g2, g3, dV, chi = prob.coefficients(rho)
    if np.any(g1 <= 0):
        raise PositivityError("g' must be positive (g increasing)")
    k = prob.kinetic
    out = (-k * g2 * dpsi - (0.5 * g3 + g * dV + prob.eps1 * chi) * psi) / (k * g1)
    return float(out) if np.ndim(out) == 0 else out


def asymptotic_exponents(eps_prime: float = 0.0) -> tuple[float, float]:
    """Exponents of x^alpha solutions of -2 phi'' - (1+eps')/(3 x^2) phi = 0.

    They are the roots of 2 alpha^2 - 2 alpha + (1+eps')/3 = 0.
    """
    if eps_prime < 0:
        raise ConfigurationError("eps' must be non-negative")
    disc = (4.0 - 8.0 * eps_prime) / 3.0
    if disc < 0:
        raise ConfigurationError(f"eps' = {eps_prime} too large: complex exponents")
    half_gap = math.sqrt(disc) / 4.0
    return 0.5 + half_gap, 0.5 - half_gap


# Shooting ------------------------------------------------------------------------

@dataclass
class _Segment:
    start: float
    end: float
    sol: object
    log_scale: float


@dataclass
class Trajectory:
    """Shooting solution sampled on an ascending rho grid.

    ``psi`` and ``dpsi`` are stored renormalised; the true solution is
    ``psi * exp(scale_log)``.  Renormalisation never changes signs.
    """

    rho: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    scale_log: np.ndarray
    margin: float = 2.0
    segments: list = field(default_factory=list, repr=False)

    @property
    def samples(self):
        return list(zip(self.rho.tolist(), self.psi.tolist(), self.dpsi.tolist()))

    def true_values(self):
        with np.errstate(over="ignore"):
            s = np.exp(self.scale_log)
        return self.psi * s, self.dpsi * s

    def evaluate_scaled(self, rho):
        """(psi, dpsi, log_scale) at arbitrary rho inside the integration range."""
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        psi = np.full_like(rho, np.nan)
        dpsi = np.full_like(rho, np.nan)
        logs = np.zeros_like(rho)
        lo_all = min(s.end for s in self.segments)
        hi_all = max(s.start for s in self.segments)
        if np.any((rho < lo_all - 1e-9) | (rho > hi_all + 1e-9)):
            raise UsageError("evaluation point outside the integration range")
        for seg in self.segments:
            m = (rho <= seg.start) & (rho >= seg.end) & np.isnan(psi)
            if np.any(m):
                y = seg.sol(np.clip(rho[m], seg.end, seg.start))
                psi[m], dpsi[m], logs[m] = y[0], y[1], seg.log_scale
        return psi, dpsi, logs

    def evaluate(self, rho):
        psi, dpsi, logs = self.evaluate_scaled(rho)
        s = np.exp(logs)
        return psi * s, dpsi * s

    def to_dict(self):
        return {
            "margin": self.margin,
            "n_samples": int(self.rho.size),
            "n_renormalizations": len(self.segments) - 1,
            "rho": self.rho,
            "psi": self.psi,
            "dpsi": self.dpsi,
            "scale_log": self.scale_log,
        }


def shoot(
    prob: SpectralProblem,
    margin: float = 2.0,
    n_samples: int = 20001,
    rtol: float = 1e-10,
    atol: float = 1e-14,
    method: str = "DOP853",
    initial: tuple[float, float] | None = None,
) -> Trajectory:
    """Integrate A psi = 0 from rho0 down to -rho0.

    Initial data ``psi(rho0) = 1``, ``psi'(rho0) = margin * alpha_2 * 3 / rho0``
    unless ``initial`` overrides them.  The state is rescaled whenever its
    norm exceeds 1e150.
    """
    if margin < 0:
        raise ConfigurationError("margin must be non-negative")
    rho0 = prob.rho0
    _, alpha2 = asymptotic_exponents(0.0)
    y = np.array(initial if initial is not None else (1.0, margin * alpha2 * 3.0 / rho0), dtype=float)
    k = prob.kinetic

    def fun(rho, state):
        g, g1, g2, g3, dV, chi = prob.coefficients(rho)
        psi, dpsi = state
        return [dpsi, (-k * g2 * dpsi - (0.5 * g3 + g * dV + prob.eps1 * chi) * psi) / (k * g1)]

    def overflow(rho, state):
        return math.hypot(state[0], state[1]) - RENORM_THRESHOLD

    overflow.terminal = True
    overflow.direction = 1

    segments: list[_Segment] = []
    steps: list[np.ndarray] = []
    start, log_scale = rho0, 0.0
    while True:
        sol = solve_ivp(fun, (start, -rho0), y, method=method, rtol=rtol, atol=atol,
                        dense_output=True, events=overflow)
        if sol.status == -1:
            raise IntegrationError(sol.message, float(sol.t[-1]))
        end = float(sol.t[-1])
        segments.append(_Segment(start, end, sol.sol, log_scale))
        steps.append(sol.t)
        if sol.status == 1 and end > -rho0:
            y_end = sol.y[:, -1]
            nrm = math.hypot(*y_end)
            y = y_end / nrm
            log_scale += math.log(nrm)
            start = end
            continue
        break

    grid = np.union1d(np.linspace(-rho0, rho0, n_samples), np.concatenate(steps))
    traj = Trajectory(grid, grid, grid, grid, margin=margin, segments=segments)
    psi, dpsi, logs = traj.evaluate_scaled(grid)
    traj.psi, traj.dpsi, traj.scale_log = psi, dpsi, logs
    return traj


def matching_threshold(side: str, psi_end: float, rho0: float, eps: float = 0.0, margin: float = 2.0) -> float:
    """Slope threshold guaranteeing a positive continuation past the truncation point.

    Right end: the test is ``psi'(rho0) >= threshold``.  Left end: the test is
    ``psi'(-rho0) <= threshold`` (mirror image, slope must be negative enough).
    """
    if psi_end <= 0:
        raise PositivityError("psi must be positive at the matching point")
    if not (0.0 <= eps < 1.0):
        raise ConfigurationError("eps must lie in [0, 1)")
    if rho0 <= 0:
        raise ConfigurationError("rho0 must be positive")
    _, alpha2 = asymptotic_exponents(0.0)
    mag = margin / (1.0 - eps) * alpha2 * psi_end * 3.0 / rho0
    if side == "right":
        return mag
    if side == "left":
        return -mag
    raise UsageError(f"side must be 'left' or 'right', got {side!r}")


@dataclass
class PositivityCertificate:
    positive_everywhere: bool
    min_psi: float
    psi_left: float
    dpsi_left: float
    threshold_left: float
    matching_left_ok: bool
    matching_right_ok: bool
    oracle_min_eigenvalue: Optional[float] = None
    psi_right: float = 1.0
    dpsi_right: float = 0.0
    threshold_right: float = 0.0
    threshold_left_margin1: float = math.nan
    eps: float = 0.0
    margin: float = 2.0
    first_sign_change: Optional[float] = None

    @property
    def verified(self) -> bool:
        return self.positive_everywhere and self.matching_left_ok and self.matching_right_ok

    def to_dict(self):
        d = asdict(self)
        d["verified"] = self.verified
        return d


def verify_condition11(
    prob: SpectralProblem,
    margin: float = 2.0,
    oracle: bool = False,
    oracle_n: int = 200_000,
    trajectory: Trajectory | None = None,
    **shoot_kwargs,
) -> PositivityCertificate:
    """Shoot, check positivity and both matching inequalities, optionally run the oracle.

    The right end is imposed with slope ``margin * alpha_2 * 3/rho0``; it is then
    checked against the bare matching requirement (margin 1 with the 1/(1-eps)
    correction), capped at ``margin`` so that margin 0 checks a zero slope.
    """
    traj = trajectory if trajectory is not None else shoot(prob, margin=margin, **shoot_kwargs)
    eps = prob.asym_eps
    rho0 = prob.rho0

    positive = bool(np.all(traj.psi > 0))
    true_psi, _ = traj.true_values()
    min_psi = float(np.min(true_psi))
    first_change = None
    if not positive:
        bad = np.flatnonzero(traj.psi <= 0)
        first_change = float(traj.rho[bad[-1]])  # nearest to rho0, where shooting starts

    psi_l, dpsi_l, log_l = (float(a[0]) for a in traj.evaluate_scaled(-rho0))
    psi_r, dpsi_r, log_r = (float(a[0]) for a in traj.evaluate_scaled(rho0))

    if psi_r > 0:
        thr_r = matching_threshold("right", psi_r, rho0, eps, min(margin, 1.0))
        right_ok = dpsi_r >= thr_r
    else:
        thr_r, right_ok = math.nan, False

    if positive and psi_l > 0:
        thr_l = matching_threshold("left", psi_l, rho0, eps, margin)
        thr_l1 = matching_threshold("left", psi_l, rho0, eps, 1.0)
        left_ok = dpsi_l <= thr_l
        scale = math.exp(log_l)
        thr_l, thr_l1 = thr_l * scale, thr_l1 * scale
    else:
        thr_l = thr_l1 = math.nan
        left_ok = False

    cert = PositivityCertificate(
        positive_everywhere=positive and min_psi > 0,
        min_psi=min_psi,
        psi_left=psi_l * math.exp(log_l),
        dpsi_left=dpsi_l * math.exp(log_l),
        threshold_left=thr_l,
        matching_left_ok=bool(left_ok),
        matching_right_ok=bool(right_ok),
        psi_right=psi_r * math.exp(log_r),
        dpsi_right=dpsi_r * math.exp(log_r),
        threshold_right=thr_r * math.exp(log_r),
        threshold_left_margin1=thr_l1,
        eps=eps,
        margin=margin,
        first_sign_change=first_change,
    )
    if oracle:
        cert.oracle_min_eigenvalue = discretized_min_eigenvalue(prob, n=oracle_n)
    return cert


# Schroedinger form -----------------------------------------------------------------

def potential_W(prob: SpectralProblem, x):
    """W(x) = g'(rho(x)) * (-g'''/2 - g V' - eps1 chi1)(rho(x))."""
    rho = rho_of_x(prob.mult, x)
    g, g1, g2, g3, dV, chi = prob.coefficients(rho)
    out = g1 * (-0.5 * g3 - g * dV - prob.eps1 * chi)
    return float(out) if np.ndim(out) == 0 else out


def quadratic_form_value(prob: SpectralProblem, test: Callable, support: tuple[float, float],
                         dtest: Callable | None = None, deg: int = 256) -> float:
    """<psi, A psi> = int (2-eps1) g' psi'^2 + (-g'''/2 - g V' - eps1 chi1) psi^2 drho.

    Without ``dtest`` the derivative comes from Chebyshev interpolation of ``test``
    on the support.
    """
    a, b = map(float, support)
    if a < -prob.rho0 or b > prob.rho0:
        warnings.warn("support extends beyond [-rho0, rho0]; the asymptotic tail is not certified")
    if dtest is None:
        cheb = np.polynomial.Chebyshev.interpolate(lambda r: np.asarray(test(r), dtype=float), deg, domain=[a, b])
        dtest = cheb.deriv()
    k = prob.kinetic

    def integrand(rho):
        g, g1, g2, g3, dV, chi = prob.coefficients(rho)
        u, du = float(test(rho)), float(dtest(rho))
        return float(k * g1 * du * du + (-0.5 * g3 - g * dV - prob.eps1 * chi) * u * u)

    # split at the midpoint of a few subintervals so narrow features are not missed
    edges = np.linspace(a, b, 9)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = quad(integrand, lo, hi, limit=200, epsabs=1e-15, epsrel=1e-12)
        total += val
    return total


# Eigenvalue oracle ---------------------------------------------------------------

def assemble_operator(prob: SpectralProblem, n: int, domain: tuple[float, float] | None = None):
    """Symmetric tridiagonal finite-difference matrix of A with Dirichlet ends.

    ``n`` cells on a uniform grid; the kinetic term is assembled in flux form with
    g' at cell midpoints.  Returns (diag, offdiag, interior nodes).
    """
    if n < 2:
        raise UsageError("need at least two cells")
    a, b = domain if domain is not None else (-prob.rho0, prob.rho0)
    nodes = np.linspace(a, b, n + 1)
    h = (b - a) / n
    mid = 0.5 * (nodes[1:] + nodes[:-1])
    g1_mid = prob.mult.derivatives(mid)[1]
    interior = nodes[1:-1]
    k = prob.kinetic
    diag = k * (g1_mid[:-1] + g1_mid[1:]) / h**2 + prob.potential(interior)
    off = -k * g1_mid[1:-1] / h**2
    return diag, off, interior


def discretized_min_eigenvalue(prob: SpectralProblem, n: int = 200_000,
                               domain: tuple[float, float] | None = None,
                               method: str = "lapack") -> float:
    """Smallest eigenvalue of the Dirichlet discretisation of A by Sturm bisection.

    ``method='lapack'`` uses LAPACK's bisection driver (stebz); ``'sturm'`` uses
    the pure-Python inertia count in :mod:`morawetz.tridiag`.
    """
    if n < 100:
        raise UsageError("n must be at least 100")
    a, b = domain if domain is not None else (-prob.rho0, prob.rho0)
    if a < -prob.rho0 - 1e-12 or b > prob.rho0 + 1e-12 or not b > a:
        raise UsageError("domain must be a nonempty subinterval of [-rho0, rho0]")
    h = (b - a) / n
    if h > 0.1:
        warnings.warn(f"grid spacing {h:.3g} > 0.1 may not resolve the central potential well")
    diag, off, _ = assemble_operator(prob, n, (a, b))
    if method == "lapack":
        w = eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, 0),
                             lapack_driver="stebz")
        return float(w[0])
    if method == "sturm":
        return tridiag.smallest_eigenvalue(diag, off)
    raise UsageError(f"unknown method {method!r}")


# Ground-state transform --------------------------------------------------------------

def ground_state_sides(prob: SpectralProblem, phi0: Trajectory, u: Callable, support: tuple[float, float],
                       du: Callable | None = None, d2u: Callable | None = None, n: int = 4001):
    """Both sides of <phi, B phi> = (2-eps1) int phi0^2 |u_x|^2 dx with phi = phi0 u.

    The left side is computed literally from B applied to phi = phi0 * u, using
    phi0(x) = psi(rho(x)) with x-derivatives from the chain rule
    (d/dx = g' d/drho).  Composite Simpson on ``n`` uniform x-nodes.
    """
    xa, xb = map(float, support)
    if du is None or d2u is None:
        cheb = np.polynomial.Chebyshev.interpolate(lambda t: np.asarray(u(t), dtype=float), 200, domain=[xa, xb])
        du = du or cheb.deriv()
        d2u = d2u or cheb.deriv(2)
    x = np.linspace(xa, xb, n)
    rho = rho_of_x(prob.mult, x)
    psi, dpsi, logs = phi0.evaluate_scaled(rho)
    if np.any(psi <= 0):
        raise PositivityError("phi0 must be strictly positive on the support")
    # common scale so that both sides stay representable
    psi = psi * np.exp(logs - logs.max())
    dpsi = dpsi * np.exp(logs - logs.max())
    g, g1, g2, g3, dV, chi = prob.coefficients(rho)
    d2psi = ode_rhs(prob, rho, psi, dpsi)

    p0 = psi
    p0_x = g1 * dpsi
    p0_xx = g1 * (g2 * dpsi + g1 * d2psi)
    uu, ux, uxx = (np.asarray(fn(x), dtype=float) for fn in (u, du, d2u))
    phi = p0 * uu
    phi_xx = p0_xx * uu + 2 * p0_x * ux + p0 * uxx
    W = potential_W(prob, x)
    k = prob.kinetic
    lhs = simpson(phi * (-k * phi_xx + W * phi), x=x)
    rhs = k * simpson(p0**2 * ux**2, x=x)
    return float(lhs), float(rhs)


def ground_state_identity_check(prob: SpectralProblem, phi0: Trajectory, u: Callable,
                                support: tuple[float, float], du: Callable | None = None,
                                d2u: Callable | None = None, n: int = 4001) -> float:
    """Relative residual |LHS - RHS| / (|RHS| + 1e-300) of the ground-state identity."""
    lhs, rhs = ground_state_sides(prob, phi0, u, support, du, d2u, n)
    return abs(lhs - rhs) / (abs(rhs) + 1e-300)


def gaussian_in_x(center: float, width: float):
    """Gaussian u(x) = exp(-((x-c)/w)^2) with analytic first and second derivatives."""

    def u(x):
        return np.exp(-(((np.asarray(x) - center) / width) ** 2))

    def du(x):
        s = (np.asarray(x) - center) / width
        return -2 * s / width * np.exp(-s * s)

    def d2u(x):
        s = (np.asarray(x) - center) / width
        return (4 * s * s - 2) / width**2 * np.exp(-s * s)

    return u, du, d2u


def reference_problem() -> SpectralProblem:
    """M = 1, b = 0.1, eps1 = 1/1000, rho0 = 1000, chi1 = 0."""
    return SpectralProblem(Schwarzschild(1.0), MultiplierG(0.1), eps1=1e-3, chi1=None, rho0=1000.0)


__all__ = [
    "SpectralProblem",
    "Trajectory",
    "PositivityCertificate",
    "ode_rhs",
    "asymptotic_exponents",
    "shoot",
    "matching_threshold",
    "verify_condition11",
    "potential_W",
    "quadratic_form_value",
    "discretized_min_eigenvalue",
    "assemble_operator",
    "ground_state_identity_check",
    "ground_state_sides",
    "bump",
    "gaussian_in_x",
    "reference_problem",
    "x_of_rho",
]
