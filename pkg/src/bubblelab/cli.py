"""Command line front end: equilibrium, simulate, spectrum, audit, sweep.

Exit codes: 0 success, 2 validation error, 3 numerical failure. Errors are
also written to stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import energy as en
from .core import (NumericalError, PARAM_KEYS, PhysicalParams, MassVolumePair,
                   ValidationError, ValidityError)
from .dynamics import (GalerkinSystem, SimOptions, fd_oracle, make_initial, simulate)
from .equilibrium import small_volume_equilibrium, solve_radius
from .modal import ModalBasis
from .spectrum import Window, decay_bounds, eigs_in_window, find_roots, spectrum_report

log = logging.getLogger("bubblelab")

TRAJ_HEADER = ["t", "rho2", "delta_R", "dR", "mass_drift", "energy", "dissipation",
               "znorm"] + [f"theta_{k}" for k in range(1, 9)]
AUDIT_HEADER = ["t", "E", "D", "dEdt", "residual", "gap", "quad_form"]
SWEEP_HEADER = ["axis_value", "R_star", "rho_star", "kappa_bar", "abscissa", "varpi"]

SOLVER_DEFAULTS = {"N": 64, "rtol": 1e-9, "atol": 1e-13, "t_end": None,
                   "output_dt": None, "backend": "galerkin", "grid": 512,
                   "closure": "mass"}
IC_DEFAULTS = {"eps": 1e-3, "delta": 0.0, "dR0": 0.0, "shape": "parabolic"}
TOP_KEYS = {"params", "problem", "solver", "ic", "spectrum", "sweep", "seed",
            "M", "V", "N", "eps", "delta", "dR0", "shape", "t_end", "rtol", "atol",
            "output_dt", "grid", "closure"} | set(PARAM_KEYS)


@dataclass
class RunConfig:
    params: PhysicalParams
    problem: MassVolumePair
    solver: dict = field(default_factory=dict)
    ic: dict = field(default_factory=dict)
    spectrum: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    seed: int = 0


def _num(d, k, kind=float):
    v = d[k]
    try:
        if kind is int:
            if isinstance(v, bool) or int(v) != v:
                raise ValueError
            return int(v)
        return float(v)
    except (TypeError, ValueError):
        raise ValidationError(f"'{k}' must be a {kind.__name__}", k)


def parse_config(d) -> RunConfig:
    """Accepts the flat parameter block or the nested run layout."""
    if not isinstance(d, dict):
        raise ValidationError("config must be a JSON object")
    for k in d:
        if k not in TOP_KEYS:
            raise ValidationError(f"unknown config key '{k}'", k)
    pblock = dict(d.get("params", {}))
    if not isinstance(d.get("params", {}), dict):
        raise ValidationError("'params' must be an object", "params")
    for k in PARAM_KEYS:
        if k in d:
            pblock[k] = d[k]
    for k in pblock:
        if k not in PARAM_KEYS and k not in ("M", "V"):
            raise ValidationError(f"unknown parameter key '{k}'", k)
    for k in PARAM_KEYS[:-1]:
        if k not in pblock:
            raise ValidationError(f"missing parameter key '{k}'", k)
    prob = dict(d.get("problem", {}))
    for k in ("M", "V"):
        if k in pblock:
            prob[k] = pblock.pop(k)
        if k in d:
            prob[k] = d[k]
        if k not in prob:
            raise ValidationError(f"missing parameter key '{k}'", k)
    V = prob["V"]
    if isinstance(V, str) and V.lower() in ("inf", "infinity"):
        V = math.inf
    try:
        params = PhysicalParams(**{k: pblock[k] for k in PARAM_KEYS if k in pblock})
    except TypeError as exc:
        raise ValidationError(str(exc))
    problem = MassVolumePair(_num(prob, "M"), V if V == math.inf else _num(prob, "V"))

    solver = dict(SOLVER_DEFAULTS)
    solver.update(d.get("solver", {}))
    for k in ("N", "rtol", "atol", "t_end", "output_dt", "grid", "closure"):
        if k in d:
            solver[k] = d[k]
    if "solver" in d and isinstance(d["solver"], str):
        solver["backend"] = d["solver"]
    for k in solver:
        if k not in SOLVER_DEFAULTS:
            raise ValidationError(f"unknown solver key '{k}'", k)
    solver["N"] = _num(solver, "N", int)
    solver["grid"] = _num(solver, "grid", int)
    for k in ("rtol", "atol"):
        solver[k] = _num(solver, k)
        if not solver[k] > 0:
            raise ValidationError(f"'{k}' must be positive", k)
    for k in ("t_end", "output_dt"):
        if solver[k] is not None:
            solver[k] = _num(solver, k)
            if not solver[k] > 0:
                raise ValidationError(f"'{k}' must be positive", k)
    if solver["N"] < 1:
        raise ValidationError("'N' must be >= 1", "N")
    if solver["backend"] not in ("galerkin", "fd"):
        raise ValidationError("solver must be 'galerkin' or 'fd'", "solver")

    ic = dict(IC_DEFAULTS)
    ic.update(d.get("ic", {}))
    for k in ("eps", "delta", "dR0", "shape"):
        if k in d:
            ic[k] = d[k]
    for k in ic:
        if k not in IC_DEFAULTS:
            raise ValidationError(f"unknown ic key '{k}'", k)
    for k in ("eps", "delta", "dR0"):
        ic[k] = _num(ic, k)

    spec = dict(d.get("spectrum", {}))
    sweep = dict(d.get("sweep", {}))
    seed = d.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ValidationError("'seed' must be an integer", "seed")
    return RunConfig(params, problem, solver, ic, spec, sweep, seed)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}", "config")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}", "config")
    return parse_config(d)


def _fmt(x):
    return repr(float(x))


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


# ---------------------------------------------------------------------------
# commands

def equilibrium_report(cfg: RunConfig):
    eq = solve_radius(cfg.problem.M, cfg.problem.V, cfg.params)
    return {"R_star": eq.R_star, "rho_star": eq.rho_star,
            "Rbar_star": None if eq.infinite else eq.Rbar_star,
            "kappa_bar": eq.kappa_bar, "residual": eq.residual,
            "bracket": list(eq.bracket), "I": eq.I, "beta": eq.beta,
            "R_tilde": eq.R_tilde}


def cmd_equilibrium(cfg: RunConfig, out: Path):
    rep = equilibrium_report(cfg)
    _write_json(out / "equilibrium.json", rep)
    return rep


def _spectrum_window(cfg, eq):
    w = cfg.spectrum.get("window")
    if w is None:
        return Window.default(eq)
    if not (isinstance(w, (list, tuple)) and len(w) == 3):
        raise ValidationError("spectrum.window must be [re_lo, re_hi, im_hi] "
                              "in units of pi^2 kappa_bar", "window")
    return Window(float(w[0]), float(w[1]), float(w[2]))


def cmd_spectrum(cfg: RunConfig, out: Path):
    eq = solve_radius(cfg.problem.M, cfg.problem.V, cfg.params)
    w = _spectrum_window(cfg, eq)
    N = int(cfg.spectrum.get("N", 128))
    rep = spectrum_report(eq, w, N=N, max_subdiv=int(cfg.spectrum.get("max_subdiv", 40)))
    js = rep.to_json(eigs_in_window(rep.matrix_eigs, eq, w))
    _write_json(out / "spectrum.json", js)
    return js


def _build_sim(cfg: RunConfig):
    eq = solve_radius(cfg.problem.M, cfg.problem.V, cfg.params)
    basis = ModalBasis.build(cfg.solver["N"], eq)
    unit = math.pi ** 2 * eq.kappa_bar
    t_end = cfg.solver["t_end"] or 5.0 / unit
    return eq, basis, t_end


def cmd_simulate(cfg: RunConfig, out: Path):
    eq, basis, t_end = _build_sim(cfg)
    s = cfg.solver
    ic = make_initial(cfg.ic, eq, basis)
    opts = SimOptions(rtol=s["rtol"], atol=s["atol"], output_dt=s["output_dt"],
                      closure=s["closure"])
    if s["backend"] == "fd":
        opts.method = "BDF"
        traj = fd_oracle(ic, t_end, opts, eq=eq, basis=basis, grid=s["grid"])
    else:
        traj = simulate(ic, t_end, opts, eq=eq, basis=basis)
    if traj.status != "ok":
        raise NumericalError(f"simulation {traj.status}")
    Z = traj.Z
    th = np.zeros((len(Z), 8))
    k = min(8, basis.N)
    th[:, :k] = Z[:, 3:3 + k]
    rows = np.column_stack([traj.times, Z[:, 0], Z[:, 1], Z[:, 2], traj.mass_drift,
                            traj.energy, traj.dissipation, traj.znorm, th])
    _write_csv(out / "trajectory.csv", TRAJ_HEADER, rows)
    np.savez(out / "states.npz", t=traj.times, Z=Z)
    summary = {
        "config": _config_json(cfg), "t_end": t_end, "samples": len(traj.times),
        "E_star": float(sum(en.equilibrium_energy(eq))),
        "final_znorm": float(traj.znorm[-1]),
        "max_mass_drift": float(np.max(np.abs(traj.mass_drift))),
        "status": traj.status, "backend": s["backend"],
    }
    _write_json(out / "summary.json", summary)
    return summary


def _config_json(cfg: RunConfig):
    return {"params": cfg.params.to_dict(),
            "problem": {"M": cfg.problem.M,
                        "V": "inf" if cfg.problem.infinite else cfg.problem.V},
            "solver": cfg.solver, "ic": cfg.ic, "seed": cfg.seed}


def audit_trajectory(t, E, D, Z=None, eq=None, basis=None, rtol=1e-9, closure="mass",
                     seed=0, n_random=50):
    """Energy-law audit. Returns (rows, verdict)."""
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    D = np.asarray(D, dtype=float)
    if len(t) < 2 or np.any(np.diff(t) <= 0):
        raise ValidationError("trajectory times must be strictly increasing", "t")
    gap = np.full(len(t), np.nan)
    qf = np.full(len(t), np.nan)
    coercive = None
    skipped = 0
    if Z is not None:
        sysm = GalerkinSystem(eq, basis, closure)
        coercive = True
        for i, z in enumerate(Z):
            rep = en.total_energy(z, eq, basis)
            gap[i] = rep.gap
            E[i] = rep.E
            D[i] = rep.D
            zd = sysm.rhs(z)
            rdot = (4 * math.pi / 3) * zd[0] + basis.b @ zd[3:]
            if en.certification_measure(z, eq, basis) <= en.DELTA0:
                qf[i] = en.quadratic_form(z, eq, basis, rdot)
                coercive &= bool(gap[i] >= qf[i] >= 0)
            else:
                skipped += 1
        rng = np.random.default_rng(seed)
        for _ in range(n_random):
            z = en.random_static_perturbation(rng, eq, basis)
            lhs, rhs = en.minimizer_gap(z, eq, basis, check=False)
            coercive &= bool(lhs >= rhs >= 0)
    base = gap if Z is not None else E
    dEdt = en.fd_derivative(t, base)
    resid = np.abs(dEdt + D)
    tol = 10.0 * rtol * np.abs(E)
    monotone = bool(np.all(np.diff(E) <= tol[1:]))
    if Z is not None:
        monotone = bool(np.all(np.diff(gap) <= tol[1:]))
    rows = np.column_stack([t, E, D, dEdt, resid, gap, qf])
    verdict = {"monotone": monotone, "max_residual": float(np.max(resid)),
               "coercivity_ok": coercive, "samples": int(len(t)),
               "uncertified_samples": skipped}
    return rows, verdict


def cmd_audit(path, out: Path, seed=None):
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"trajectory file not found: {path}", "trajectory")
    with open(path) as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header != TRAJ_HEADER:
            raise ValidationError("trajectory CSV header does not match the schema", "trajectory")
        data = np.array([[float(x) for x in r] for r in rd])
    if data.ndim != 2 or len(data) < 2:
        raise ValidationError("trajectory CSV has too few rows", "trajectory")
    t, E, D = data[:, 0], data[:, 5].copy(), data[:, 6].copy()
    summ_path = path.parent / "summary.json"
    states = path.parent / "states.npz"
    Z = eq = basis = None
    rtol = 1e-9
    closure = "mass"
    cseed = 0
    if summ_path.exists() and states.exists():
        with open(summ_path) as fh:
            summ = json.load(fh)
        cfg = parse_config(summ["config"])
        eq, basis, _ = _build_sim(cfg)
        rtol = cfg.solver["rtol"]
        closure = cfg.solver["closure"]
        cseed = cfg.seed
        Z = np.load(states)["Z"]
        if len(Z) != len(t):
            raise ValidationError("states.npz does not match the trajectory CSV", "trajectory")
    rows, verdict = audit_trajectory(t, E, D, Z, eq, basis, rtol, closure,
                                     seed=cseed if seed is None else seed)
    _write_csv(out / "audit.csv", AUDIT_HEADER, rows)
    _write_json(out / "verdict.json", verdict)
    return verdict


def _sweep_point(args):
    cfg_dict, axis, value, ratio, window = args
    cfg = parse_config(cfg_dict)
    pd_ = cfg.params.to_dict()
    M, V = cfg.problem.M, cfg.problem.V
    if axis == "M":
        M = value
    elif axis == "V":
        V = value
    else:
        pd_["T_inf"] = value
        pd_["gamma"] = None
    params = PhysicalParams(**pd_)
    if ratio is not None:
        eq = small_volume_equilibrium(M, params, ratio)
    else:
        eq = solve_radius(M, V, params)
    w = Window(*window) if window is not None else Window.default(eq)
    rs = find_roots(eq, w)
    if not rs.roots:
        raise NumericalError(f"no roots found at {axis}={value}")
    return [value, eq.R_star, eq.rho_star, eq.kappa_bar,
            max(z.real for z in rs.roots), decay_bounds(eq).varpi]


def cmd_sweep(cfg: RunConfig, out: Path, axis=None, grid=None, workers=1):
    axis = axis or cfg.sweep.get("axis")
    grid = grid if grid is not None else cfg.sweep.get("grid")
    if axis not in ("M", "V", "T_inf"):
        raise ValidationError("sweep axis must be 'M', 'V' or 'T_inf'", "axis")
    if not grid:
        raise ValidationError("sweep grid is empty", "grid")
    grid = [float(g) for g in grid]
    ratio = cfg.sweep.get("small_volume_ratio")
    if ratio is not None and axis == "V":
        raise ValidationError("small_volume_ratio fixes V; cannot sweep V", "axis")
    window = cfg.spectrum.get("window")
    cfg_dict = _config_json(cfg)
    jobs = [(cfg_dict, axis, g, ratio, window) for g in grid]
    pts = out / "points"
    pts.mkdir(parents=True, exist_ok=True)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    for i, r in enumerate(results):
        _write_json(pts / f"point_{i:04d}.json", dict(zip(SWEEP_HEADER, r)))
    merged = [json.load(open(pts / f"point_{i:04d}.json")) for i in range(len(grid))]
    rows = sorted(([m[h] for h in SWEEP_HEADER] for m in merged), key=lambda r: r[0])
    _write_csv(out / "sweep.csv", SWEEP_HEADER, rows)
    return rows


# ---------------------------------------------------------------------------

def _setup_logging():
    lvl = os.environ.get("BUBBLELAB_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(lvl, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser():
    ap = argparse.ArgumentParser(prog="bubblelab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("equilibrium", "simulate", "spectrum", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=".")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--seed", type=int, default=None)
        if name == "sweep":
            sp.add_argument("--axis", choices=["M", "V", "T_inf"])
            sp.add_argument("--grid", type=float, nargs="+")
    sp = sub.add_parser("audit")
    sp.add_argument("trajectory", nargs="?")
    sp.add_argument("--config", help="trajectory CSV (alternative to the positional path)")
    sp.add_argument("--out", default=None)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--seed", type=int, default=None)
    return ap


def main(argv=None):
    _setup_logging()
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.workers < 1:
            raise ValidationError("--workers must be >= 1", "workers")
        if args.command == "audit":
            path = args.trajectory or args.config
            if not path:
                raise ValidationError("audit needs a trajectory CSV path", "trajectory")
            out = Path(args.out) if args.out else Path(path).parent
            out.mkdir(parents=True, exist_ok=True)
            res = cmd_audit(path, out, args.seed)
        else:
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg.seed = args.seed
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            if args.command == "equilibrium":
                res = cmd_equilibrium(cfg, out)
            elif args.command == "simulate":
                res = cmd_simulate(cfg, out)
            elif args.command == "spectrum":
                res = cmd_spectrum(cfg, out)
            else:
                rows = cmd_sweep(cfg, out, args.axis, args.grid, args.workers)
                res = {"points": len(rows), "csv": str(out / "sweep.csv")}
        json.dump(res, sys.stdout, indent=2, sort_keys=True, default=str)
        sys.stdout.write("\n")
        return 0
    except ValidationError as exc:
        json.dump({"error": "validation", "message": str(exc), "field": exc.field},
                  sys.stderr)
        sys.stderr.write("\n")
        return 2
    except (NumericalError, ValidityError, FloatingPointError, np.linalg.LinAlgError) as exc:
        json.dump({"error": "numerical", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
