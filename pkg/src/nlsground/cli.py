"""Command-line driver.

Every run writes ``summary.json`` (schema 1) into its output directory,
plus CSV series and binary field dumps where they apply.  Exit status is
0 on success, 1 on invalid input and 2 on numerical failure; failed runs
still leave a summary with the diagnostics.

Options may also come from ``--config FILE``, a ``key = value`` text file
whose keys are the long flag names; flags given on the command line win.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.fft as sfft

from . import bifurcation as bif
from .energy import Params, el_residual, energy
from .evolve import (
    EvolutionError,
    EvolveConfig,
    split_step,
    stability_experiment,
    strichartz_norms,
)
from .grid import Field, GridSpec, read_field, write_field
from .minimize import (
    FlowDivergence,
    Init,
    MinimizeConfig,
    UpperBoundViolation,
    minimize_J,
    minimize_K,
)
from .profiles import (
    mass_curve,
    omega_of_mass,
    ode_residual,
    pohozaev_report,
    scaling_check,
    soliton,
    soliton_mass,
)

SCHEMA = 1
COMMANDS = ("soliton", "verify", "minimize", "critical-mass", "evolve", "stability", "report")
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2

log = logging.getLogger("nlsground")


class ValidationError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


# output formatting -------------------------------------------------------

def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float at 17 significant digits; non-finite floats become null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{to_json(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + to_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path: Path, obj) -> None:
    path.write_text(to_json(obj) + "\n")


def write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path: Path) -> tuple:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    return rows[0], rows[1:]


# run configuration -------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    grid: GridSpec
    params: Optional[Params]
    options: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: Optional[Path] = None

    def echo(self) -> dict:
        g = self.grid
        out = {
            "command": self.command,
            "grid": {"n": g.n, "Nx": g.Nx, "Ny": g.Ny, "L": g.L, "ell": g.ell},
            "seed": self.seed,
            "options": {k: v for k, v in self.options.items() if not isinstance(v, Path)},
        }
        if self.params is not None:
            out["params"] = {"alpha": self.params.alpha, "lambda": self.params.lam,
                             "n": self.params.n, "k": self.params.k}
        return out


def parse_pair(text: str, flag: str) -> tuple:
    try:
        parts = [float(v) for v in str(text).split(",")]
    except ValueError:
        raise ValidationError(f"{flag}: expected lo,hi, got {text!r}") from None
    if len(parts) != 2:
        raise ValidationError(f"{flag}: expected two comma-separated numbers, got {text!r}")
    return tuple(parts)


def parse_grid(text: Optional[str], n: int) -> GridSpec:
    if text is None:
        return GridSpec(n=n)
    parts = str(text).split(",")
    if len(parts) != 4:
        raise ValidationError(f"--grid: expected Nx,Ny,L,ell, got {text!r}")
    try:
        Nx, Ny = int(parts[0]), int(parts[1])
        L, ell = float(parts[2]), float(parts[3])
    except ValueError:
        raise ValidationError(f"--grid: could not parse {text!r}") from None
    try:
        return GridSpec(n=n, Nx=Nx, Ny=Ny, L=L, ell=ell)
    except ValueError as exc:
        raise ValidationError(f"--grid: {exc}") from None


def parse_init(text: str, seed: int) -> Init:
    """``y_constant``, ``perturbed[:eps]``, ``random[:seed]`` or ``file:PATH``."""
    kind, _, arg = str(text).partition(":")
    try:
        if kind == "y_constant":
            return Init.y_constant()
        if kind == "perturbed":
            return Init.perturbed(float(arg) if arg else 0.1)
        if kind == "random":
            return Init.random(int(arg) if arg else seed)
        if kind == "file":
            return Init.supplied(read_field(arg))
    except (ValueError, OSError) as exc:
        raise ValidationError(f"--init: {exc}") from None
    raise ValidationError(f"--init: unknown kind {kind!r}")


# argument parser ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """argparse with exit status 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


# built-in defaults; flags default to None so config-file values can fill gaps
DEFAULTS = {
    "alpha": 1.0, "n": 1, "seed": 0, "grid": None, "out": None,
    "omega": None, "rho": None,
    "lambda": None, "init": "y_constant", "tol": 1e-8, "max_iter": 50000, "tau": 0.5,
    "parameter": "rho", "bracket": None, "threshold": bif.DEFAULT_THRESHOLD,
    "lambda_bracket": None, "lambda_tol": None, "bisection_tol": 0.1,
    "dt": 1e-3, "T": 1.0, "snapshot_every": 100, "energy_every": 1,
    "perturb": 0.0, "input": None,
    "delta": 1e-2, "factor": 5.0, "omegas": "0.25,1,4", "limit": 1e-6,
}


def _common(p: argparse.ArgumentParser, grid: bool = True, out: bool = True):
    p.add_argument("--config", type=Path, help="key = value file with defaults for any flag")
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int, choices=(1, 2))
    p.add_argument("--seed", type=int)
    if grid:
        p.add_argument("--grid", help="Nx,Ny,L,ell")
    if out:
        p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nlsground", description="Ground states and dynamics of NLS on R^n x T.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("soliton", help="Euclidean ground-state profile and its identities")
    _common(p, grid=False)
    p.add_argument("--omega", type=float)
    p.add_argument("--rho", type=float, help="select omega by L2 norm instead")

    p = sub.add_parser("verify", help="profile and energy identity suite")
    _common(p)
    p.add_argument("--omegas", help="comma-separated frequencies")
    p.add_argument("--limit", type=float, help="pass threshold for every residual")

    p = sub.add_parser("minimize", help="constrained ground state by normalized gradient flow")
    _common(p)
    p.add_argument("--rho", type=float, help="mass for K^rho (lambda = 1)")
    p.add_argument("--lambda", dest="lambda", type=float, help="coupling for J_lambda (mass 1)")
    p.add_argument("--init", help="y_constant | perturbed[:eps] | random[:seed] | file:PATH")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--tau", type=float)

    p = sub.add_parser("critical-mass", help="bisection for the symmetry-breaking threshold")
    _common(p)
    p.add_argument("--parameter", choices=("rho", "lambda"))
    p.add_argument("--bracket", help="lo,hi")
    p.add_argument("--tol", dest="bisection_tol", type=float, help="final bracket width")
    p.add_argument("--threshold", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--lambda-bracket", dest="lambda_bracket",
                   help="also bisect in lambda and check overlap with the mapped rho bracket")
    p.add_argument("--lambda-tol", dest="lambda_tol", type=float)

    for name, helptext in (("evolve", "time evolution by Strang splitting"),
                           ("stability", "perturbed ground-state evolution")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--dt", type=float)
        p.add_argument("--T", dest="T", type=float)
        p.add_argument("--snapshot-every", dest="snapshot_every", type=int)
        p.add_argument("--energy-every", dest="energy_every", type=int)
        p.add_argument("--rho", type=float)
        if name == "evolve":
            p.add_argument("--omega", type=float)
            p.add_argument("--perturb", type=float, help="amplitude of a cos(2 pi y/ell) modulation")
            p.add_argument("--input", type=Path, help="initial field dump")
        else:
            p.add_argument("--delta", type=float)
            p.add_argument("--factor", type=float, help="stability factor for the BOUNDED verdict")
            p.add_argument("--tol", type=float)
            p.add_argument("--max-iter", dest="max_iter", type=int)

    p = sub.add_parser("report", help="merge run directories")
    p.add_argument("dirs", nargs="*", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def read_config_file(path: Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"--config: {exc}") from None
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ValidationError(f"--config: {exc}") from None
    return {k.replace("-", "_"): v for k, v in cp["run"].items()}


def resolve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
    """Merge command-line flags, config-file values and built-in defaults."""
    file_vals = read_config_file(args.config) if getattr(args, "config", None) else {}
    sub = parser._subparsers._group_actions[0].choices[args.command]
    types = {a.dest: a.type for a in sub._actions if a.dest != "help"}
    aliases = {opt.lstrip("-").replace("-", "_"): a.dest
               for a in sub._actions for opt in a.option_strings}
    file_vals = {aliases.get(k, k): v for k, v in file_vals.items()}
    out = {}
    for dest, typ in types.items():
        if dest in ("config", "verbose", "dirs"):
            continue
        val = getattr(args, dest, None)
        if val is None and dest in file_vals:
            raw = file_vals[dest]
            try:
                val = typ(raw) if typ is not None else raw
            except (TypeError, ValueError):
                raise ValidationError(f"--{dest.replace('_', '-')}: bad value {raw!r} in config file") from None
        if val is None:
            val = DEFAULTS.get(dest)
        out[dest] = val
    unknown = set(file_vals) - set(types)
    if unknown:
        raise ValidationError(f"--config: unknown keys {sorted(unknown)}")
    return out


def make_run_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> RunConfig:
    opts = resolve(args, parser)
    cmd = args.command
    if cmd == "report":
        return RunConfig(cmd, GridSpec(), None, {"dirs": list(args.dirs)}, 0, opts.get("out"))
    n = opts.pop("n")
    grid = parse_grid(opts.pop("grid", None), n)
    alpha = opts.pop("alpha")
    seed = opts.pop("seed")
    out = opts.pop("out", None)
    lam = opts.get("lambda") if cmd == "minimize" else None
    try:
        params = Params(alpha, lam if lam is not None else 1.0, n)
    except ValueError as exc:
        raise ValidationError(f"--alpha/--lambda: {exc}") from None
    return RunConfig(cmd, grid, params, opts, seed, Path(out) if out else None)


# commands ----------------------------------------------------------------

def _soliton_record(profile) -> dict:
    rec = {"alpha": profile.alpha, "omega": profile.omega, "n": profile.n, "A": profile.A,
           "B": profile.B, "rho": soliton_mass(profile)}
    if profile.n == 1:
        rep = pohozaev_report(profile)
        rec.update({
            "kinetic": rep.kinetic,
            "potential_int": rep.potential_int,
            "energy": rep.energy,
            "residuals": {
                "ode_analytic": ode_residual(profile),
                "ode_spectral": ode_residual(profile, method="spectral"),
                "pohozaev_kinetic": abs(rep.residual_poza),
                "pohozaev_frequency": abs(rep.residual_pozae),
                "ground_energy": abs(rep.ground_energy - rep.energy),
            },
        })
    return rec


def cmd_soliton(cfg: RunConfig) -> dict:
    o = cfg.options
    a, n = cfg.params.alpha, cfg.params.n
    if (o["omega"] is None) == (o["rho"] is None):
        raise ValidationError("soliton: give exactly one of --omega, --rho")
    if o["rho"] is not None:
        if not o["rho"] > 0:
            raise ValidationError("--rho must be positive")
        omega = omega_of_mass(o["rho"], a, n)
    else:
        omega = o["omega"]
    try:
        prof = soliton(omega, a, n)
    except ValueError as exc:
        raise ValidationError(f"--omega: {exc}") from None
    return {"soliton": _soliton_record(prof)}


def identity_suite(alpha: float, omegas, spec: GridSpec, limit: float = 1e-6) -> dict:
    """Profile identities at each omega plus grid-level energy checks at the first one."""
    rows = []
    for w in omegas:
        rec = _soliton_record(soliton(w, alpha, 1))
        rows.append({"omega": w, **rec["residuals"]})
    checks = {}
    curve = mass_curve(alpha, omegas)
    checks["mass_increasing_in_omega"] = curve.is_increasing()
    checks["scaling_law"] = scaling_check(alpha, 0.7, 1.4)
    prof = soliton(1.0, alpha, 1)
    u = prof.sample(spec)
    params = Params(alpha, 1.0, 1)
    e_grid = energy(u, params).total
    e_1d = pohozaev_report(prof).energy
    checks["extension_energy"] = abs(e_grid - spec.vol * e_1d) / abs(spec.vol * e_1d)
    checks["extension_el_residual"] = el_residual(u, params, omega=1.0)
    worst = max([v for r in rows for k, v in r.items() if k != "omega"]
                + [checks["scaling_law"], checks["extension_energy"],
                   checks["extension_el_residual"]])
    passed = worst < limit and checks["mass_increasing_in_omega"]
    return {"alpha": alpha, "limit": limit, "profiles": rows, "grid_checks": checks,
            "worst_residual": worst, "passed": bool(passed)}


def cmd_verify(cfg: RunConfig) -> dict:
    o = cfg.options
    try:
        omegas = [float(v) for v in str(o["omegas"]).split(",")]
    except ValueError:
        raise ValidationError(f"--omegas: could not parse {o['omegas']!r}") from None
    if any(not w > 0 for w in omegas):
        raise ValidationError("--omegas: frequencies must be positive")
    if cfg.grid.n != 1:
        raise ValidationError("verify: the identity suite is built for --n 1")
    rep = identity_suite(cfg.params.alpha, omegas, cfg.grid, o["limit"])
    if not rep["passed"]:
        raise NumericalFailure(f"identity suite failed (worst residual {rep['worst_residual']:.3g})",
                               {"verify": rep})
    return {"verify": rep}


def _minimize_config(cfg: RunConfig, init: Init = None) -> MinimizeConfig:
    o = cfg.options
    try:
        return MinimizeConfig(grid=cfg.grid, tau=o.get("tau") or DEFAULTS["tau"],
                              tol=o.get("tol") or DEFAULTS["tol"],
                              max_iter=o.get("max_iter") or DEFAULTS["max_iter"],
                              init=init or Init())
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def cmd_minimize(cfg: RunConfig) -> dict:
    o = cfg.options
    if (o["rho"] is None) == (o["lambda"] is None):
        raise ValidationError("minimize: give exactly one of --rho, --lambda")
    init = parse_init(o["init"], cfg.seed)
    if init.kind == "supplied" and init.field.spec != cfg.grid:
        raise ValidationError("--init file: field grid differs from --grid")
    mcfg = _minimize_config(cfg, init)
    try:
        if o["rho"] is not None:
            if not o["rho"] > 0:
                raise ValidationError("--rho must be positive")
            res = minimize_K(o["rho"], cfg.params.alpha, mcfg)
        else:
            res = minimize_J(o["lambda"], cfg.params.alpha, mcfg)
    except (FlowDivergence, UpperBoundViolation) as exc:
        raise NumericalFailure(str(exc), {}) from None
    if cfg.out_dir is not None:
        write_field(cfg.out_dir / "field.nlsf", res.u)
        write_csv(cfg.out_dir / "history.csv", ["iter", "energy", "residual", "y_variation"],
                  res.history)
    body = {"minimize": {**res.summary(), "classification": bif.classify(res.u)}}
    if not res.converged:
        raise NumericalFailure(f"flow did not converge in {res.iterations} iterations "
                               f"(residual {res.residual:.3g})", body)
    return body


PROBE_HEADER = ["parameter", "y_variation", "value", "omega", "converged", "iterations",
                "residual", "classification", "trivial_value"]


def _probe_rows(result: bif.BifurcationResult) -> list:
    return [[p.parameter, p.y_variation, p.value, p.omega, p.converged, p.iterations,
             p.residual, p.classification, p.trivial_value] for p in result.probes]


def _bracket_record(result: bif.BifurcationResult) -> dict:
    d = result.to_dict()
    d.pop("probes")
    d["monotone"] = result.is_monotone()
    d["probe_count"] = len(result.probes)
    return d


def cmd_critical_mass(cfg: RunConfig) -> dict:
    o = cfg.options
    kind = o["parameter"]
    if o["bracket"] is None:
        raise ValidationError("--bracket is required")
    lo, hi = parse_pair(o["bracket"], "--bracket")
    tol = o["bisection_tol"]
    mcfg = _minimize_config(cfg)
    a = cfg.params.alpha
    finder = bif.find_rho_star if kind == "rho" else bif.find_lambda_star
    try:
        result = finder(lo, hi, tol, a, mcfg, threshold=o["threshold"])
    except bif.BracketError as exc:
        raise ValidationError(f"--bracket: {exc}") from None
    body = {"critical_mass": _bracket_record(result)}
    if cfg.out_dir is not None:
        write_csv(cfg.out_dir / "probes.csv", PROBE_HEADER, _probe_rows(result))
    if result.halted:
        raise NumericalFailure(result.message, body)
    if kind == "rho" and o["lambda_bracket"] is not None:
        llo, lhi = parse_pair(o["lambda_bracket"], "--lambda-bracket")
        ltol = o["lambda_tol"] if o["lambda_tol"] is not None else 0.01
        try:
            lres = bif.find_lambda_star(llo, lhi, ltol, a, mcfg, threshold=o["threshold"])
        except bif.BracketError as exc:
            raise ValidationError(f"--lambda-bracket: {exc}") from None
        mapped = bif.mapped_lambda_bracket(result, cfg.grid.n)
        body["lambda_star"] = _bracket_record(lres)
        body["mapped_rho_bracket"] = list(mapped)
        body["brackets_overlap"] = bif.brackets_overlap(mapped, (lres.bracket_lo, lres.bracket_hi))
        if cfg.out_dir is not None:
            write_csv(cfg.out_dir / "probes_lambda.csv", PROBE_HEADER, _probe_rows(lres))
        if lres.halted:
            raise NumericalFailure(lres.message, body)
        if not body["brackets_overlap"]:
            raise NumericalFailure("rho* and lambda* brackets disagree under rescaling", body)
    return body


def _evolve_config(o: dict) -> EvolveConfig:
    try:
        return EvolveConfig(o["dt"], o["T"], o["snapshot_every"], o["energy_every"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def _dump_trajectory(out_dir: Path, traj, distances=None):
    snap_dir = out_dir / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for i, (_, f) in enumerate(traj.snapshots):
        write_field(snap_dir / f"snap_{i:06d}.nlsf", f)
    step_mass = dict(zip(traj.step_times, zip(traj.mass_series, traj.energy_series)))
    rows = []
    for i, (t, _) in enumerate(traj.snapshots):
        m, e = step_mass.get(t, (float("nan"), float("nan")))
        row = [t, m, e]
        if distances is not None:
            row.append(float(distances[i]))
        rows.append(row)
    header = ["t", "mass", "energy"] + (["orbit_distance"] if distances is not None else [])
    write_csv(out_dir / "series.csv", header, rows)
    write_csv(out_dir / "conserved.csv", ["t", "mass", "energy"],
              zip(traj.step_times, traj.mass_series, traj.energy_series))


def _trajectory_summary(traj) -> dict:
    s = strichartz_norms(traj)
    return {"steps": traj.config.steps, "snapshots": len(traj.snapshots),
            "mass_drift": traj.mass_drift(), "energy_drift": traj.energy_drift(),
            "p": s.p, "q": s.q, "X_T": s.X_T, "Y_T": s.Y_T}


def cmd_evolve(cfg: RunConfig) -> dict:
    o = cfg.options
    spec, params = cfg.grid, cfg.params
    if o["input"] is not None:
        try:
            u0 = read_field(o["input"])
        except (OSError, ValueError) as exc:
            raise ValidationError(f"--input: {exc}") from None
        spec = u0.spec
        if spec.n != params.n:
            raise ValidationError("--input: field dimension differs from --n")
    else:
        if o["omega"] is not None and o["rho"] is not None:
            raise ValidationError("evolve: give at most one of --omega, --rho")
        if o["rho"] is not None:
            omega = omega_of_mass(o["rho"] / np.sqrt(spec.vol), params.alpha, spec.n)
        else:
            omega = o["omega"] if o["omega"] is not None else 1.0
        try:
            u0 = soliton(omega, params.alpha, spec.n).sample(spec)
        except ValueError as exc:
            raise ValidationError(f"--omega: {exc}") from None
    if o["perturb"]:
        y = spec.mesh()[-1]
        u0 = Field(spec, u0.values * (1 + o["perturb"] * np.cos(2 * np.pi * y / spec.ell)))
    ecfg = _evolve_config(o)
    try:
        traj = split_step(u0, params, ecfg)
    except EvolutionError as exc:
        if cfg.out_dir is not None:
            write_field(cfg.out_dir / "last_good.nlsf", exc.last_good)
        raise NumericalFailure(str(exc), {"evolve": {"failed_at": exc.t}}) from None
    if cfg.out_dir is not None:
        _dump_trajectory(cfg.out_dir, traj)
    return {"evolve": _trajectory_summary(traj)}


def cmd_stability(cfg: RunConfig) -> dict:
    o = cfg.options
    rho = o["rho"] if o["rho"] is not None else 0.5
    if not rho > 0:
        raise ValidationError("--rho must be positive")
    if not o["delta"] > 0:
        raise ValidationError("--delta must be positive")
    ecfg = _evolve_config(o)
    mcfg = _minimize_config(cfg)
    try:
        rep = stability_experiment(rho, o["delta"], cfg.params.alpha, ecfg, mcfg, seed=cfg.seed,
                                   stability_factor=o["factor"], keep_trajectory=True)
    except EvolutionError as exc:
        raise NumericalFailure(str(exc), {}) from None
    except (RuntimeError, FlowDivergence, UpperBoundViolation) as exc:
        raise NumericalFailure(f"ground state: {exc}", {}) from None
    if cfg.out_dir is not None:
        write_field(cfg.out_dir / "ground_state.nlsf", rep.ground_state)
        _dump_trajectory(cfg.out_dir, rep.trajectory, rep.distance_series)
    return {"stability": {**rep.summary(), **_trajectory_summary(rep.trajectory)}}


# report ------------------------------------------------------------------

def _load_run(d: Path) -> dict:
    import json

    summ = json.loads((d / "summary.json").read_text())
    if summ.get("schema") != SCHEMA:
        raise ValueError(f"unsupported schema {summ.get('schema')!r}")
    run = {"dir": str(d), "summary": summ}
    for name in ("probes.csv", "history.csv", "series.csv"):
        if (d / name).exists():
            run[name] = read_csv(d / name)
    return run


def build_report(dirs) -> dict:
    """Group runs by command, collect per-directory errors, and check bracket nesting."""
    sections, errors = {}, []
    for d in dirs:
        d = Path(d)
        try:
            run = _load_run(d)
        except (OSError, ValueError, KeyError) as exc:
            errors.append({"dir": str(d), "error": str(exc)})
            continue
        cmd = run["summary"].get("config", {}).get("command", "unknown")
        sections.setdefault(cmd, []).append(run)

    report = {"schema": SCHEMA, "runs": sum(len(v) for v in sections.values()), "errors": errors,
              "sections": {}}
    for cmd, runs in sections.items():
        report["sections"][cmd] = [{"dir": r["dir"], "status": r["summary"].get("status"),
                                    "result": r["summary"].get("result", {})} for r in runs]

    crit = [r for r in sections.get("critical-mass", [])
            if r["summary"].get("status") == "ok"]
    nests = []
    for i, a in enumerate(crit):
        for b in crit[i + 1:]:
            ra, rb = a["summary"]["result"]["critical_mass"], b["summary"]["result"]["critical_mass"]
            if ra["parameter"] != rb["parameter"]:
                continue
            inner, outer = (a, b) if ra["bisection_tol"] <= rb["bisection_tol"] else (b, a)
            ri = inner["summary"]["result"]["critical_mass"]
            ro = outer["summary"]["result"]["critical_mass"]
            nests.append({"inner": inner["dir"], "outer": outer["dir"],
                          "nested": ro["bracket_lo"] <= ri["bracket_lo"]
                          and ri["bracket_hi"] <= ro["bracket_hi"]})
    if crit:
        report["nested_brackets"] = nests
    return report, sections


def _write_report_tables(out: Path, sections: dict):
    rows = []
    for run in sections.get("critical-mass", []):
        if "probes.csv" in run:
            header, body = run["probes.csv"]
            rows += [[run["dir"]] + r for r in body]
    if rows:
        write_csv(out / "probes_merged.csv", ["dir"] + PROBE_HEADER, rows)
    rows = []
    for run in sections.get("minimize", []):
        res = run["summary"].get("result", {}).get("minimize", {})
        rows.append([run["dir"], res.get("target_mass"), res.get("lambda"), res.get("value"),
                     res.get("omega"), res.get("y_variation"), res.get("converged")])
    if rows:
        write_csv(out / "minimizers.csv",
                  ["dir", "rho", "lambda", "value", "omega", "y_variation", "converged"], rows)
    rows = []
    for cmd in ("evolve", "stability"):
        for run in sections.get(cmd, []):
            res = run["summary"].get("result", {}).get(cmd, {})
            opts = run["summary"].get("config", {}).get("options", {})
            rows.append([run["dir"], cmd, opts.get("dt"), opts.get("T"), res.get("mass_drift"),
                         res.get("energy_drift")])
    if rows:
        write_csv(out / "drift.csv", ["dir", "command", "dt", "T", "mass_drift", "energy_drift"],
                  rows)


def cmd_report(cfg: RunConfig) -> dict:
    report, sections = build_report(cfg.options["dirs"])
    if cfg.out_dir is not None:
        _write_report_tables(cfg.out_dir, sections)
    return report


HANDLERS = {
    "soliton": cmd_soliton,
    "verify": cmd_verify,
    "minimize": cmd_minimize,
    "critical-mass": cmd_critical_mass,
    "evolve": cmd_evolve,
    "stability": cmd_stability,
    "report": cmd_report,
}


def _threads() -> int:
    raw = os.environ.get("NLS_THREADS")
    if raw is None:
        return 1
    try:
        t = int(raw)
    except ValueError:
        raise ValidationError(f"NLS_THREADS must be a positive integer, got {raw!r}") from None
    if t < 1:
        raise ValidationError(f"NLS_THREADS must be a positive integer, got {raw!r}")
    return t


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute one command; always leaves a summary when an output directory is set."""
    stdout = stdout or sys.stdout
    if cfg.out_dir is not None:
        try:
            cfg.out_dir.mkdir(parents=True, exist_ok=True)
            probe = cfg.out_dir / ".write_test"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            print(f"error: --out: {exc}", file=sys.stderr)
            return EXIT_INVALID

    if cfg.command == "report":
        body = cmd_report(cfg)
        if cfg.out_dir is not None:
            write_json(cfg.out_dir / "report.json", body)
        print(to_json(body), file=stdout)
        return EXIT_OK

    summary = {"schema": SCHEMA, "config": cfg.echo()}
    try:
        with sfft.set_workers(_threads()):
            result = HANDLERS[cfg.command](cfg)
        summary.update(status="ok", result=result)
        code = EXIT_OK
    except ValidationError as exc:
        summary.update(status="invalid", error=str(exc))
        code = EXIT_INVALID
    except NumericalFailure as exc:
        summary.update(status="failed", error=str(exc.args[0]),
                       result=exc.args[1] if len(exc.args) > 1 else {})
        code = EXIT_NUMERICAL
    except (FloatingPointError, ArithmeticError) as exc:
        summary.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        code = EXIT_NUMERICAL
    if cfg.out_dir is not None:
        write_json(cfg.out_dir / "summary.json", summary)
    if code == EXIT_INVALID:
        print(f"error: {summary['error']}", file=sys.stderr)
    elif code == EXIT_NUMERICAL:
        print(f"numerical failure: {summary['error']}", file=sys.stderr)
    print(to_json(summary), file=stdout)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_run_config(args, parser)
        _threads()
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
