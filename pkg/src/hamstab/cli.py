"""``hamstab`` command-line interface.

Every command accepts a JSON config (``--config``) and/or inline flags;
flags win. Results go to stdout and, with ``--out``, to a CSV or JSON file
written atomically. Exit codes: 0 success, 2 configuration error,
3 numerical failure; the error class name is printed on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import ere
from .brake import decomposition_check
from .errors import ConfigError, DegenerateBaseProblem, HamstabError, NumericalError
from .hill import determinant_sign, hill_evaluation
from .oracle import (eigen_sum, galerkin_determinant, periodic_morse_index, relative_morse_index,
                     shoot_eigenvalues)
from .propagator import DEFAULT_TOL, monodromy
from .symplectic import normalize_boundary_pair
from .systems import System, angle_boundary, builtin_system, load_sampled_coefficients
from .trace import conditional_traces

COMMANDS = ("hill", "trace", "eigs", "galerkin", "parity", "decompose", "scan")
CSV_DIGITS = 12

_CONFIG_KEYS = {"command", "system", "boundary", "numerics", "output"}
_SYSTEM_KEYS = {"name", "params", "sampled"}
_BOUNDARY_KEYS = {"angles", "V0", "V1"}
_NUMERIC_KEYS = {"tol", "alpha", "window", "N", "grid", "m", "tail_bound", "kind", "refine"}
_OUTPUT_KEYS = {"path", "format"}


# ---------------------------------------------------------------------------
# configuration


@dataclass
class JobConfig:
    command: str
    system: dict = field(default_factory=dict)
    boundary: dict = field(default_factory=dict)
    numerics: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "JobConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        _reject_unknown(d, _CONFIG_KEYS, "config")
        cfg = cls(d.get("command"), dict(d.get("system", {})), dict(d.get("boundary", {})),
                  dict(d.get("numerics", {})), dict(d.get("output", {})))
        cfg.validate()
        return cfg

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got {self.command!r}")
        _reject_unknown(self.system, _SYSTEM_KEYS, "system")
        _reject_unknown(self.boundary, _BOUNDARY_KEYS, "boundary")
        _reject_unknown(self.numerics, _NUMERIC_KEYS, "numerics")
        _reject_unknown(self.output, _OUTPUT_KEYS, "output")
        for key in ("tol", "N", "grid", "m", "tail_bound"):
            v = self.numerics.get(key)
            vals = v if isinstance(v, list) else [v]
            if v is not None and not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                         and x > 0 for x in vals):
                raise ConfigError(f"numerics.{key} must be positive, got {v!r}")
        fmt = self.output.get("format")
        if fmt is not None and fmt not in ("csv", "json"):
            raise ConfigError(f"output.format must be csv or json, got {fmt!r}")
        if "V0" in self.boundary or "V1" in self.boundary:
            if not ("V0" in self.boundary and "V1" in self.boundary):
                raise ConfigError("boundary needs both V0 and V1")
            if "angles" in self.boundary:
                raise ConfigError("give either boundary angles or frames, not both")


def _reject_unknown(d: dict, allowed: set, where: str):
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def _parse_params(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def build_system(cfg: JobConfig) -> System:
    entry = cfg.system
    if "sampled" in entry:
        B, D = load_sampled_coefficients(entry["sampled"])
        system = System("sampled", B, D)
    else:
        if "name" not in entry:
            raise ConfigError("no system given")
        system = builtin_system(entry["name"], **entry.get("params", {}))
    bd = cfg.boundary
    if "angles" in bd:
        system = system.with_boundary(angle_boundary(bd["angles"]))
    elif "V0" in bd:
        system = system.with_boundary(normalize_boundary_pair(np.array(bd["V0"], dtype=float),
                                                              np.array(bd["V1"], dtype=float)))
    elif system.boundary is None and system.S is None:
        system = system.with_boundary(angle_boundary(np.full(system.B.n, math.pi / 2)))
    return system


def _need_boundary(system: System):
    if system.boundary is None:
        raise ConfigError(f"system {system.name!r} has no Lagrangian boundary; pass half=plus|minus "
                          f"or a boundary")


# ---------------------------------------------------------------------------
# commands; each returns (header, rows, extra json payload)


def cmd_hill(system: System, num: dict):
    _need_boundary(system)
    tol = num.get("tol", DEFAULT_TOL)
    alphas = num.get("alpha", [1.0])
    alphas = alphas if isinstance(alphas, list) else [alphas]
    rows = []
    for a in alphas:
        ev = hill_evaluation(system.B, system.D, system.boundary, float(a), tol)
        rows.append([ev.alpha, ev.value, ev.condition])
    return ["alpha", "f", "condition"], rows, {}


def cmd_trace(system: System, num: dict):
    _need_boundary(system)
    rep = conditional_traces(system.B, system.D, system.boundary, num.get("tol", DEFAULT_TOL))
    return ["tr1", "tr2"], [[rep.tr1, rep.tr2]], {"G1": rep.G1.tolist(), "G2": rep.G2.tolist()}


def cmd_eigs(system: System, num: dict):
    _need_boundary(system)
    window = num.get("window", [-10.0, 10.0])
    tol = min(num.get("tol", DEFAULT_TOL), 1e-11)
    eigs = shoot_eigenvalues(system.B, system.D, system.boundary, window, tol)
    rows = [[v, int(m)] for v, m in zip(eigs.values, eigs.multiplicities)]
    extra = {"window": list(eigs.window)}
    if "m" in num:
        s = eigen_sum(eigs, int(num["m"]), num.get("tail_bound"))
        extra["eigen_sum"] = {"m": int(num["m"]), "value": s.value, "tail": s.tail,
                              "tail_bound": s.tail_bound}
    return ["lambda", "multiplicity"], rows, extra


def cmd_galerkin(system: System, num: dict):
    _need_boundary(system)
    Ns = num.get("N", [32, 64, 128, 256])
    Ns = Ns if isinstance(Ns, list) else [Ns]
    f = hill_evaluation(system.B, system.D, system.boundary, 1.0, num.get("tol", DEFAULT_TOL)).value
    rows = []
    for N in Ns:
        g = galerkin_determinant(system.B, system.D, system.boundary, int(N))
        rows.append([int(N), g, f, abs(g - f)])
    return ["N", "galerkin", "hill", "error"], rows, {}


def cmd_parity(system: System, num: dict):
    tol = num.get("tol", DEFAULT_TOL)
    grid = int(num.get("grid", 200))
    if system.boundary is not None:
        sign = determinant_sign(system.B, system.D, system.boundary, tol)
        index = relative_morse_index(system.B, system.D, system.boundary, grid)
        return ["sign", "index", "consistent"], [[sign, index, int(sign == (-1) ** index)]], {}
    eye = np.eye(2 * system.B.n)
    per = []
    for C in (system.B, system.B + system.D):
        per.append(periodic_morse_index(C, system.S, grid))
    G0, G1 = monodromy(system.B, tol), monodromy(system.B + system.D, tol)
    ratio = np.linalg.det(system.S @ G1 - eye) / np.linalg.det(system.S @ G0 - eye)
    sign = 1 if ratio > 0 else -1
    index = per[1].relative_index - per[0].relative_index
    return (["sign", "index", "consistent", "maslov_base", "maslov_perturbed"],
            [[sign, index, int(sign == (-1) ** index), per[0].maslov_index, per[1].maslov_index]], {})


def cmd_decompose(system: System, num: dict):
    if system.sym is None:
        raise ConfigError(f"system {system.name!r} carries no brake symmetry")
    rep = decomposition_check(system.B, system.D, system.sym, num.get("tol", DEFAULT_TOL))
    return (["periodic_ratio", "plus_ratio", "minus_ratio", "product_residual", "max_residual"],
            [[rep.periodic_ratio, rep.plus_ratio, rep.minus_ratio, rep.product_residual,
              rep.max_residual]],
            {"block_residuals": list(rep.block_residuals),
             "display_residuals": list(rep.display_residuals)})


# ---------------------------------------------------------------------------
# scans


def _scan_point(args):
    kind, p, tol = args
    if kind == "lagrange":
        try:
            cv = ere.curve_value("lagrange", p, "f", tol)
            row = [cv.bound_minus, cv.bound_plus]
        except DegenerateBaseProblem:
            row = [math.nan, math.nan]
        return [p] + row + [_nanmin(row)]
    row = []
    for which in ("g1", "g2"):
        try:
            cv = ere.curve_value("euler", p, which, tol)
            row += [cv.bound_minus, cv.bound_plus]
        except DegenerateBaseProblem:
            row += [math.nan, math.nan]
    band = ere.euler_band(p)
    curve = _nanmin(row[:2]) if band == 0 else _nanmin(row)
    return [p] + row + [curve, -1 if band is None else band]


def _nanmin(vals):
    vals = [v for v in vals if not math.isnan(v)]
    return min(vals) if vals else math.nan


def _workers() -> int:
    env = os.environ.get("HAMSTAB_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ConfigError(f"HAMSTAB_THREADS must be an integer, got {env!r}") from None
        if cap < 1:
            raise ConfigError("HAMSTAB_THREADS must be positive")
        return cap
    return os.cpu_count() or 1


def _evaluate(kind, params, tol, workers):
    jobs = [(kind, float(p), tol) for p in params]
    if workers <= 1 or len(jobs) < 4:
        return [_scan_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_scan_point, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def _needs_refinement(ps, curve, threshold):
    """Indices ``i`` of intervals ``[p_i, p_i+1]`` next to large second differences."""
    out = set()
    for i in range(1, len(ps) - 1):
        c = curve[i - 1:i + 2]
        if np.any(np.isnan(c)):
            continue
        h = min(ps[i] - ps[i - 1], ps[i + 1] - ps[i])
        if abs(c[0] - 2 * c[1] + c[2]) > threshold and h > 1e-6:
            out.update((i - 1, i))
    return sorted(out)


def region_scan(kind: str, grid: int = 181, tol: float = DEFAULT_TOL, refine: int = 3,
                threshold: float = 1e-2, workers: int = 1, max_points: int = 2000):
    """Eccentricity bounds over ``beta in [0, 9]`` or ``delta in [0, 7]``.

    Starts from ``grid`` equispaced points and bisects intervals where the
    second difference of the curve exceeds ``threshold`` (at most ``refine``
    passes). Degenerate base problems give NaN.
    """
    hi = 9.0 if kind == "lagrange" else 7.0
    params = list(np.linspace(0.0, hi, int(grid)))
    rows = {p: r for p, r in zip(params, _evaluate(kind, params, tol, workers))}
    curve_col = 3 if kind == "lagrange" else 5
    for _ in range(refine):
        ps = sorted(rows)
        curve = np.array([rows[p][curve_col] for p in ps])
        new = [(ps[i] + ps[i + 1]) / 2 for i in _needs_refinement(ps, curve, threshold)]
        new = [p for p in new if p not in rows][:max(0, max_points - len(rows))]
        if not new:
            break
        rows.update(zip(new, _evaluate(kind, new, tol, workers)))
    return [rows[p] for p in sorted(rows)]


def cmd_scan(num: dict):
    kind = num.get("kind", "lagrange")
    if kind not in ("lagrange", "euler"):
        raise ConfigError(f"scan kind must be lagrange or euler, got {kind!r}")
    rows = region_scan(kind, int(num.get("grid", 181)), num.get("tol", DEFAULT_TOL),
                       int(num.get("refine", 3)), workers=_workers())
    if kind == "lagrange":
        header = ["beta", "curve_minus", "curve_plus", "curve"]
    else:
        header = ["delta", "g1_minus", "g1_plus", "g2_minus", "g2_plus", "curve", "band"]
    return header, rows, {"kind": kind}


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.{CSV_DIGITS}g}"


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) else v
    return v


def render_json(command, header, rows, extra) -> str:
    payload = {"command": command,
               "rows": [{h: _json_value(v) for h, v in zip(header, r)} for r in rows]}
    payload.update(extra)
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_atomic(path: str, text: str):
    """Write via a temporary file in the target directory and ``os.replace``."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".hamstab-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# argument parsing


class _ArgumentError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument errors become ``ConfigError`` (exit code 2) instead of ``SystemExit``."""

    def error(self, message):
        raise _ArgumentError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hamstab", description="Hill determinants, traces and spectral "
                                "checks for linear Hamiltonian systems.")
    sub = p.add_subparsers(dest="command")
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON job config")
        s.add_argument("--out", help="output file")
        s.add_argument("--format", choices=("csv", "json"))
        s.add_argument("--tol", type=float)
        if name != "scan":
            s.add_argument("--system", help="builtin system name")
            s.add_argument("--param", action="append", metavar="KEY=VALUE", help="system parameter")
            s.add_argument("--sampled", help="sampled coefficient table")
            s.add_argument("--angles", type=float, nargs="+", help="boundary angles theta_j")
        if name == "hill":
            s.add_argument("--alpha", type=float, nargs="+")
        if name == "eigs":
            s.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
            s.add_argument("--m", type=int, help="also report the eigen-sum of this power")
            s.add_argument("--tail-bound", type=float, dest="tail_bound")
        if name == "galerkin":
            s.add_argument("--N", type=int, nargs="+")
        if name in ("parity", "scan"):
            s.add_argument("--grid", type=int)
        if name == "scan":
            s.add_argument("--kind", choices=("lagrange", "euler"))
            s.add_argument("--refine", type=int)
    return p


def config_from_args(args) -> JobConfig:
    base = {"command": args.command}
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if loaded.get("command", args.command) != args.command:
            raise ConfigError(f"config command {loaded.get('command')!r} differs from {args.command!r}")
        base.update(loaded)
        base["command"] = args.command
    cfg = JobConfig.from_dict(base)
    a = vars(args)
    if a.get("system"):
        cfg.system = {"name": a["system"], "params": _parse_params(a.get("param"))}
    elif a.get("param"):
        cfg.system.setdefault("params", {}).update(_parse_params(a["param"]))
    if a.get("sampled"):
        cfg.system = {"sampled": a["sampled"]}
    if a.get("angles"):
        cfg.boundary = {"angles": a["angles"]}
    for key in ("tol", "alpha", "window", "N", "grid", "m", "tail_bound", "kind", "refine"):
        if a.get(key) is not None:
            cfg.numerics[key] = list(a[key]) if isinstance(a[key], (list, tuple)) else a[key]
    if a.get("out"):
        cfg.output["path"] = a["out"]
    if a.get("format"):
        cfg.output["format"] = a["format"]
    cfg.validate()
    return cfg


def execute(cfg: JobConfig):
    if cfg.command == "scan":
        return cmd_scan(cfg.numerics)
    system = build_system(cfg)
    handler = {"hill": cmd_hill, "trace": cmd_trace, "eigs": cmd_eigs, "galerkin": cmd_galerkin,
               "parity": cmd_parity, "decompose": cmd_decompose}[cfg.command]
    return handler(system, cfg.numerics)


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _parser().parse_args(argv)
        if args.command is None:
            raise ConfigError(f"no command given; choose from {COMMANDS}")
        cfg = config_from_args(args)
        header, rows, extra = execute(cfg)
        path = cfg.output.get("path")
        fmt = cfg.output.get("format") or ("json" if path and path.endswith(".json") else "csv")
        text = render_json(cfg.command, header, rows, extra) if fmt == "json" else render_csv(header, rows)
        if path:
            write_atomic(path, text)
            if cfg.command != "scan":
                sys.stdout.write(render_csv(header, rows))
        else:
            sys.stdout.write(text)
        return 0
    except ConfigError as exc:
        name = "ConfigError" if isinstance(exc, _ArgumentError) else type(exc).__name__
        print(f"error: {name}: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except HamstabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: ConfigError: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
