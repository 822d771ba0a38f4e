"""Command-line entry point.

    morawetz check-conditions | verify-spectral | shoot | simulate | hardy | emit-plots

A YAML config file may carry one section per concern (``background``,
``multiplier``, ``spectral``, ``conditions``, ``hardy``, ``simulate``, ``plots``).
A ``background`` section replaces the ``--preset`` background wholesale, so one
of kind ``schwarzschild`` must state its mass; in the other sections each key
given overrides its default.  Defaults reproduce the Schwarzschild run with
M = 1, b = 0.1, eps1 = 1/1000, rho0 = 1000.

Exit codes: 0 ok, 2 configuration error, 3 condition failure, 4 certificate
failure, 5 runtime or I/O fault, 6 simulation invariant failure.
"""

from __future__ import annotations

import argparse
import copy
import math
import sys
import warnings
from pathlib import Path

import numpy as np
import yaml

from . import hardy as hardy_mod
from . import simulate as sim
from .geometry import (
    PROFILES,
    DomainError,
    Schwarzschild,
    WarpedProduct,
    check_potential_conditions,
    constant_profile,
    cosh_profile,
)
from .multiplier import MultiplierG, check_g_conditions
from .report import UsageError, read_csv, write_csv, write_json
from .spectral import (
    ConfigurationError,
    IntegrationError,
    SpectralProblem,
    bump,
    shoot,
    verify_condition11,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONDITION = 3
EXIT_CERTIFICATE = 4
EXIT_RUNTIME = 5
EXIT_INVARIANT = 6

PRESETS = {
    "paper": {"background": {"kind": "schwarzschild", "mass": 1.0, "p": 3.0}},
    "riemannian": {"background": {"kind": "warped", "profile": "quadratic", "p": 3.0}},
}

DEFAULTS = {
    "multiplier": {"b": 0.1},
    "spectral": {"eps1": 1e-3, "rho0": 1000.0, "margin": 2.0, "n_samples": 20001,
                 "rtol": 1e-10, "atol": 1e-14, "oracle_n": 200_000},
    "conditions": {"rho_min": -1000.0, "rho_max": 1000.0, "n": 20001, "rho_asym": 100.0,
                   "alpha": -2.0},
    "hardy": {"alpha": 0.0, "chi": {"kind": "bump", "a": -1.0, "b": 1.0, "height": 1.0},
              "domain": [-100.0, 100.0], "n": 10000, "trials": 100, "factor": 0.99},
    "simulate": {"preset": "schwarzschild_l2", "refinement": 0},
    "plots": {"points": 4000, "trajectory": None},
}

SECTION_KEYS = {
    "background": {"kind", "mass", "p", "profile", "radius", "k"},
    "multiplier": {"b"},
    "spectral": set(DEFAULTS["spectral"]) | {"chi1"},
    "conditions": set(DEFAULTS["conditions"]),
    "hardy": set(DEFAULTS["hardy"]),
    "simulate": {"preset", "refinement", "ell", "nonlinear", "L", "h", "dt", "t_end", "boundary",
                 "frame_every", "sponge_strength", "initial", "initial_ut", "energy_tol",
                 "identity_tol"},
    "plots": set(DEFAULTS["plots"]),
}


class RuntimeFault(RuntimeError):
    pass


# Configuration -----------------------------------------------------------------------

def load_config(path: str | None, preset: str = "paper") -> tuple[dict, set]:
    """(config, names of the sections given in the file)."""
    cfg = copy.deepcopy(DEFAULTS)
    cfg.update(copy.deepcopy(PRESETS[preset]))
    if path is None:
        return cfg, set()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        user = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise UsageError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(user, dict):
        raise UsageError("config must be a mapping of sections")
    for name, section in user.items():
        if name not in SECTION_KEYS:
            raise UsageError(f"unknown config section {name!r}")
        if not isinstance(section, dict):
            raise UsageError(f"section {name!r} must be a mapping")
        unknown = set(section) - SECTION_KEYS[name]
        if unknown:
            raise UsageError(f"unknown keys in section {name!r}: {sorted(unknown)}")
        if name in DEFAULTS:
            # nested values (e.g. hardy.chi) are replaced whole, not merged
            merged = copy.deepcopy(DEFAULTS[name])
            merged.update(section)
            section = merged
        cfg[name] = section
    return cfg, set(user)


def _number(section: dict, key: str, where: str) -> float:
    if key not in section:
        raise UsageError(f"section {where!r} is missing required field {key!r}")
    val = section[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise UsageError(f"{where}.{key} must be a number, got {val!r}")
    if not math.isfinite(val):
        raise UsageError(f"{where}.{key} must be finite")
    return float(val)


def build_model(cfg: dict):
    bg = cfg["background"]
    kind = bg.get("kind")
    p = _number(bg, "p", "background") if "p" in bg else 3.0
    if kind == "schwarzschild":
        return Schwarzschild(mass=_number(bg, "mass", "background"), p=p)
    if kind == "warped":
        name = bg.get("profile")
        if name == "constant":
            radius = _number(bg, "radius", "background") if "radius" in bg else 1.0
            return WarpedProduct(constant_profile(radius), p=p, name="constant")
        if name == "cosh":
            return WarpedProduct(cosh_profile(_number(bg, "k", "background")), p=p, name="cosh")
        if name not in PROFILES:
            raise UsageError(f"unknown profile {name!r}; choose from {sorted(PROFILES) + ['cosh']}")
        return WarpedProduct(PROFILES[name](), p=p, name=name)
    raise UsageError(f"background.kind must be 'schwarzschild' or 'warped', got {kind!r}")


def build_multiplier(cfg: dict) -> MultiplierG:
    return MultiplierG(b=_number(cfg["multiplier"], "b", "multiplier"))


def _bump_from(spec, where: str):
    if spec is None:
        return None
    if not isinstance(spec, dict) or spec.get("kind") != "bump":
        raise UsageError(f"{where} must be a mapping with kind: bump")
    return bump(_number(spec, "a", where), _number(spec, "b", where),
                _number(spec, "height", where) if "height" in spec else 1.0)


def build_problem(cfg: dict) -> SpectralProblem:
    sp = cfg["spectral"]
    return SpectralProblem(
        model=build_model(cfg),
        mult=build_multiplier(cfg),
        eps1=_number(sp, "eps1", "spectral"),
        chi1=_bump_from(sp.get("chi1"), "spectral.chi1"),
        rho0=_number(sp, "rho0", "spectral"),
    )


def build_sim_config(cfg: dict, explicit_background: bool) -> sim.SimConfig:
    s = cfg["simulate"]
    name = s.get("preset", "schwarzschild_l2")
    refinement = int(s.get("refinement", 0))
    if refinement < 0:
        raise UsageError("simulate.refinement must be non-negative")
    base = sim.preset(name, refinement)
    fields = {k: getattr(base, k) for k in ("model", "mult", "ell", "nonlinear", "L", "h", "dt", "t_end",
                                           "boundary", "initial_data", "frame_every", "sponge_strength")}
    if explicit_background:
        fields["model"] = build_model(cfg)
    fields["mult"] = build_multiplier(cfg)
    for key in ("ell", "frame_every"):
        if key in s:
            fields[key] = int(_number(s, key, "simulate"))
    for key in ("L", "h", "dt", "t_end", "sponge_strength"):
        if key in s:
            fields[key] = _number(s, key, "simulate")
    if "nonlinear" in s:
        fields["nonlinear"] = bool(s["nonlinear"])
    if "boundary" in s:
        fields["boundary"] = str(s["boundary"])
    if "initial" in s or "initial_ut" in s:
        u = _gaussian_from(s["initial"], "simulate.initial") if "initial" in s else fields["initial_data"].u
        ut = _gaussian_from(s["initial_ut"], "simulate.initial_ut") if "initial_ut" in s else None
        fields["initial_data"] = sim.InitialData(u, ut)
    return sim.SimConfig(p=fields["model"].p, **fields)


def _gaussian_from(spec, where: str):
    if not isinstance(spec, dict):
        raise UsageError(f"{where} must be a mapping with center, width, amplitude")
    width = _number(spec, "width", where)
    if width <= 0:
        raise UsageError(f"{where}.width must be positive")
    return sim.Gaussian(_number(spec, "center", where), width, _number(spec, "amplitude", where))


# Commands --------------------------------------------------------------------------

def _out_dir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RuntimeFault(f"cannot create output directory {out}: {exc}") from exc
    return out


def cmd_check_conditions(cfg: dict, args) -> int:
    model = build_model(cfg)
    mult = build_multiplier(cfg)
    c = cfg["conditions"]
    n = int(_number(c, "n", "conditions"))
    lo, hi = _number(c, "rho_min", "conditions"), _number(c, "rho_max", "conditions")
    if n < 3 or not hi > lo:
        raise UsageError("conditions grid needs n >= 3 and rho_max > rho_min")
    grid = np.linspace(lo, hi, n)
    out = _out_dir(args.out)
    pot = check_potential_conditions(model, grid)
    gch = check_g_conditions(mult, grid, alpha=_number(c, "alpha", "conditions"),
                             rho_asym=_number(c, "rho_asym", "conditions"))
    rep = pot.merge(gch)
    payload = rep.to_dict()
    payload["grid"] = {"rho_min": lo, "rho_max": hi, "n": n}
    write_json(out / "conditions.json", payload)
    _say(args, f"conditions: {'all pass' if rep.passed else 'FAILED ' + ', '.join(rep.failures())}")
    return EXIT_OK if rep.passed else EXIT_CONDITION


def _shoot_kwargs(cfg):
    sp = cfg["spectral"]
    return dict(n_samples=int(_number(sp, "n_samples", "spectral")),
                rtol=_number(sp, "rtol", "spectral"), atol=_number(sp, "atol", "spectral"))


def _margin(cfg, args) -> float:
    margin = args.margin if args.margin is not None else _number(cfg["spectral"], "margin", "spectral")
    if margin < 0:
        raise UsageError("margin must be non-negative")
    return float(margin)


def _trajectory_csv(path: Path, traj) -> None:
    write_csv(path, ["rho", "psi", "dpsi", "scale_log"], [traj.rho, traj.psi, traj.dpsi, traj.scale_log])


def cmd_verify_spectral(cfg: dict, args) -> int:
    prob = build_problem(cfg)
    margin = _margin(cfg, args)
    out = _out_dir(args.out)
    regime_ok = True
    regime_msg = None
    try:
        prob.check_asymptotic_regime()
    except ConfigurationError as exc:
        regime_ok, regime_msg = False, str(exc)
    traj = shoot(prob, margin=margin, **_shoot_kwargs(cfg))
    cert = verify_condition11(prob, margin=margin, oracle=args.oracle,
                              oracle_n=int(_number(cfg["spectral"], "oracle_n", "spectral")),
                              trajectory=traj)
    payload = cert.to_dict()
    payload["asymptotic_regime_ok"] = regime_ok
    payload["asymptotic_regime_message"] = regime_msg
    payload["verified"] = bool(cert.verified and regime_ok)
    payload["problem"] = {"eps1": prob.eps1, "rho0": prob.rho0, "b": prob.mult.b,
                          "model": _model_label(prob.model)}
    write_json(out / "certificate.json", payload)
    _trajectory_csv(out / "trajectory.csv", traj)
    _say(args, f"psi(-rho0) = {cert.psi_left:.6g}, psi'(-rho0) = {cert.dpsi_left:.6g}, "
               f"threshold = {cert.threshold_left:.6g}, verified = {payload['verified']}")
    return EXIT_OK if payload["verified"] else EXIT_CERTIFICATE


def cmd_shoot(cfg: dict, args) -> int:
    prob = build_problem(cfg)
    margin = _margin(cfg, args)
    out = _out_dir(args.out)
    traj = shoot(prob, margin=margin, **_shoot_kwargs(cfg))
    psi, dpsi = traj.true_values()
    summary = {
        "margin": margin,
        "rho0": prob.rho0,
        "psi_left": float(psi[0]),
        "dpsi_left": float(dpsi[0]),
        "psi_right": float(psi[-1]),
        "dpsi_right": float(dpsi[-1]),
        "min_psi": float(np.min(psi)),
        "n_samples": int(traj.rho.size),
        "n_renormalizations": len(traj.segments) - 1,
    }
    write_json(out / "shoot.json", summary)
    _trajectory_csv(out / "trajectory.csv", traj)
    _say(args, f"psi(-rho0) = {summary['psi_left']:.6g}, psi'(-rho0) = {summary['dpsi_left']:.6g}")
    return EXIT_OK


def cmd_simulate(cfg: dict, args, explicit_background: bool) -> int:
    scfg = build_sim_config(cfg, explicit_background)
    s = cfg["simulate"]
    out = _out_dir(args.out)
    kw = {}
    if "energy_tol" in s:
        kw["energy_tol"] = _number(s, "energy_tol", "simulate")
    if "identity_tol" in s:
        kw["identity_tol"] = _number(s, "identity_tol", "simulate")
    rep = sim.run(scfg, **kw)
    payload = rep.to_dict()
    payload["config"] = {"preset": s.get("preset"), "refinement": int(s.get("refinement", 0)),
                         "model": _model_label(scfg.model), "ell": scfg.ell, "nonlinear": scfg.nonlinear,
                         "L": scfg.L, "h": scfg.h, "dt": scfg.dt, "t_end": scfg.t_end,
                         "boundary": scfg.boundary, "b": scfg.mult.b}
    write_json(out / "report.json", payload)
    header, cols = rep.series()
    write_csv(out / "series.csv", header, cols)
    failed = [k for k, v in rep.invariants.items() if not v["passed"]]
    _say(args, f"simulation: {'all invariants hold' if not failed else 'FAILED ' + ', '.join(failed)}")
    return EXIT_OK if not failed else EXIT_INVARIANT


def cmd_hardy(cfg: dict, args) -> int:
    h = cfg["hardy"]
    domain = h.get("domain")
    if not (isinstance(domain, (list, tuple)) and len(domain) == 2):
        raise UsageError("hardy.domain must be a pair [a, b]")
    chi = _bump_from(h.get("chi"), "hardy.chi")
    hc = hardy_mod.HardyConfig(alpha=_number(h, "alpha", "hardy"), chi=chi,
                               domain=(float(domain[0]), float(domain[1])),
                               n=int(_number(h, "n", "hardy")))
    out = _out_dir(args.out)
    rep = hardy_mod.verify_hardy(hc, trials=int(_number(h, "trials", "hardy")), seed=args.seed,
                                 factor=_number(h, "factor", "hardy"))
    a, b = hc.domain
    c = 0.5 * (a + b)
    doubled = hardy_mod.HardyConfig(alpha=hc.alpha, chi=chi, domain=(c + 2 * (a - c), c + 2 * (b - c)),
                                    n=2 * hc.n)
    c2 = hardy_mod.best_constant(doubled)
    payload = rep.to_dict()
    payload["domain"] = list(hc.domain)
    payload["alpha"] = hc.alpha
    payload["n"] = hc.n
    payload["constant_doubled_domain"] = c2
    payload["relative_change_on_doubling"] = abs(c2 - rep.constant) / rep.constant
    write_json(out / "hardy.json", payload)
    _say(args, f"hardy: C = {rep.constant:.6g}, {rep.passed}/{rep.trials} trials pass, "
               f"doubled-domain C = {c2:.6g}")
    return EXIT_OK if rep.all_passed else EXIT_CONDITION


PLOT_FILES = {
    "potential": ("figure_potential.csv", (-1000.0, 1000.0)),
    "left": ("figure_psi_left.csv", (-1000.0, 0.0)),
    "middle": ("figure_psi_middle.csv", (-10.0, 15.0)),
    "right": ("figure_psi_right.csv", (0.0, 1000.0)),
}


def _trajectory_from_csv(path: Path):
    if not path.is_file():
        raise UsageError(f"trajectory file {path} does not exist")
    try:
        cols = read_csv(path)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read trajectory {path}: {exc}") from exc
    missing = {"rho", "psi", "scale_log"} - set(cols)
    if missing:
        raise UsageError(f"trajectory {path} lacks columns {sorted(missing)}")
    rho = cols["rho"]
    true_psi = cols["psi"] * np.exp(cols["scale_log"])
    order = np.argsort(rho)
    rho, true_psi = rho[order], true_psi[order]
    return lambda r: np.interp(r, rho, true_psi)


def cmd_emit_plots(cfg: dict, args) -> int:
    prob = build_problem(cfg)
    pl = cfg["plots"]
    npts = int(_number(pl, "points", "plots"))
    if npts < 2:
        raise UsageError("plots.points must be at least 2")
    traj_path = args.trajectory or pl.get("trajectory")
    if traj_path:
        psi_at = _trajectory_from_csv(Path(traj_path))
    else:
        traj = shoot(prob, margin=_margin(cfg, args), **_shoot_kwargs(cfg))

        def psi_at(r):
            psi, _, logs = traj.evaluate_scaled(r)
            return psi * np.exp(logs)

    out = _out_dir(args.out)
    rho0 = prob.rho0
    for key, (fname, (lo, hi)) in PLOT_FILES.items():
        lo, hi = max(lo, -rho0), min(hi, rho0)
        rho = np.linspace(lo, hi, npts)
        val = prob.potential(rho) if key == "potential" else psi_at(rho)
        write_csv(out / fname, ["rho", "value"], [rho, np.asarray(val, dtype=float)])
    _say(args, f"wrote {len(PLOT_FILES)} figure files to {out}")
    return EXIT_OK


def _model_label(model) -> str:
    if isinstance(model, Schwarzschild):
        return f"schwarzschild(M={model.mass!r}, p={model.p!r})"
    return f"warped({model.name}, p={model.p!r})"


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


# Entry point -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morawetz", description="Morawetz-estimate verification toolkit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--out", default="out", help="output directory (default: ./out)")
    common.add_argument("--seed", type=int, default=0, help="random seed (hardy trials)")
    common.add_argument("--oracle", action="store_true", help="attach the eigenvalue oracle to the certificate")
    common.add_argument("--margin", type=float, default=None, help="matching margin (default 2)")
    common.add_argument("--preset", choices=sorted(PRESETS), default="paper",
                        help="background preset: Schwarzschild M=1 or the warped product r = 1 + rho^2")
    common.add_argument("--quiet", action="store_true", help="suppress the summary line")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("check-conditions", parents=[common], help="check the potential and weight conditions")
    sub.add_parser("verify-spectral", parents=[common], help="shoot and certify positivity")
    sub.add_parser("shoot", parents=[common], help="shoot only and write the trajectory")
    sub.add_parser("simulate", parents=[common], help="run a mode simulation with multiplier bookkeeping")
    sub.add_parser("hardy", parents=[common], help="best Hardy constant and randomized verification")
    p = sub.add_parser("emit-plots", parents=[common], help="write the four figure CSV files")
    p.add_argument("--trajectory", help="trajectory.csv from a previous run (default: shoot afresh)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if not hasattr(args, "trajectory"):
        args.trajectory = None
    try:
        cfg, given = load_config(args.config, args.preset)
        explicit_bg = "background" in given or args.preset != "paper"
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if args.command == "check-conditions":
                return cmd_check_conditions(cfg, args)
            if args.command == "verify-spectral":
                return cmd_verify_spectral(cfg, args)
            if args.command == "shoot":
                return cmd_shoot(cfg, args)
            if args.command == "simulate":
                return cmd_simulate(cfg, args, explicit_bg)
            if args.command == "hardy":
                return cmd_hardy(cfg, args)
            if args.command == "emit-plots":
                return cmd_emit_plots(cfg, args)
    except (UsageError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, sim.NumericalFault, RuntimeFault, OSError, FloatingPointError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_CONFIG  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
