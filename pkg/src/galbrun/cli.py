"""Command-line front end.

Subcommands map one-to-one onto the library's top-level operations:

* ``check``        -- validate a configuration, compute the sector angle,
                      evaluate the admissibility conditions
* ``decompose``    -- build the displacement-space decomposition and verify
                      its algebra
* ``tcoerc``       -- inf-sup constants of the sign-flipped form across
                      nested refinements
* ``solve``        -- direct solve of the reduced or coupled system
* ``sweep``        -- sonic near-kernel census on the built-in template
* ``convergence``  -- manufactured-solution convergence study
* ``creg``         -- regularity-constant estimates across refinements

Configurations are strict TOML: every key is checked against the schema
below and unknown keys are rejected.  Reports are written with a canonical
JSON encoding so reruns are byte-identical; wall-clock timings and
environment data go to a separate ``run_manifest.json`` sidecar.

Exit codes: 0 on success, 1 when a requested check fails or a computation
breaks down, 2 for configuration or usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

try:
    import tomllib
except ImportError:                       # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import assembly, diagnostics, solve as solve_mod
from .decomposition import build_decomposition, verify_decomposition
from .errors import (BoundaryFlowViolation, ConstraintViolation,
                     DimensionMismatch, FieldSyntaxError, InconsistentDerivative,
                     InvalidRange, MissingCreg, MissingDerivative,
                     PreconditionViolated, UnsupportedDegree)
from .fields import ScalarField, VectorField
from .meshing import build_interval_mesh, build_rect_mesh
from .problem import ProblemConfig, validate_config
from .reporting import canonical_json, config_hash, write_json
from .sector import check_admissibility, compute_theta, CONDITION_NAMES
from .spaces import build_space

VERSION = "galbrun 0.1.0 (config schema 1)"

_CONFIG_ERRORS = (FieldSyntaxError, MissingDerivative, ConstraintViolation,
                  BoundaryFlowViolation, InconsistentDerivative, InvalidRange,
                  UnsupportedDegree, DimensionMismatch, PreconditionViolated,
                  MissingCreg, ValueError, KeyError, OSError,
                  tomllib.TOMLDecodeError)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# TOML schema
# ---------------------------------------------------------------------------

_DERIVS = ["x", "y", "z"]
_HESS = ["xx", "yy", "zz", "xy", "xz", "yz"]

_FIELD_KEYS = {"rho", "c", "gamma", "divrhob", "p", "phi",
               "b_x", "b_y", "b_z", "bounds"}
_FIELD_KEYS |= {"p_%s" % d for d in _DERIVS}
_FIELD_KEYS |= {"p_%s" % d for d in _HESS}
_FIELD_KEYS |= {"phi_%s" % d for d in _DERIVS}
_FIELD_KEYS |= {"phi_%s" % d for d in _HESS}

_SCHEMA = {
    "problem": {"omega", "angvel", "G", "safety"},
    "fields": _FIELD_KEYS,
    "domain": {"kind", "range", "xrange", "yrange", "cells"},
    "discretization": {"degree", "levels", "quad_points"},
    "flags": {"c_w1inf", "rho_w1inf", "domain_class"},
    "rhs": {"x", "y", "z"},
    "mms": {"x", "y", "z"},
}


def _schema_check(raw):
    for section, body in raw.items():
        if section not in _SCHEMA:
            raise ConfigError("unknown section [%s]" % section)
        if not isinstance(body, dict):
            raise ConfigError("[%s] must be a table" % section)
        for key, val in body.items():
            if key not in _SCHEMA[section]:
                raise ConfigError("unknown key %r in [%s]" % (key, section))
            if section == "fields" and key == "bounds":
                if not isinstance(val, dict):
                    raise ConfigError("[fields.bounds] must be a table")
                for bk in val:
                    if bk not in ("rho", "c", "gamma"):
                        raise ConfigError(
                            "unknown key %r in [fields.bounds]" % bk)


def _expr(body, key, default=None):
    val = body.get(key, default)
    if val is None:
        raise ConfigError("[fields] is missing required key %r" % key)
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        return ScalarField.constant(float(val))
    if not isinstance(val, str):
        raise ConfigError("field %r must be a string expression or a number"
                          % key)
    return ScalarField.expression(val)


def _field_with_derivs(body, name):
    base = body.get(name)
    grad = VectorField([str(body.get("%s_%s" % (name, d), "0"))
                        for d in _DERIVS])
    hess = tuple(ScalarField.expression(str(body.get("%s_%s" % (name, h), "0")))
                 for h in _HESS)
    if base is None:
        base = "1" if name == "p" else "0"
    sf = _expr({name: base}, name)
    return ScalarField(sf.kind, sf.payload, sf.source, grad=grad, hess=hess)


def _bounds(body):
    raw = body.get("bounds")
    if raw is None:
        raise ConfigError("[fields.bounds] is required "
                          "(rho, c, gamma as [lo, hi])")
    out = {}
    for key in ("rho", "c", "gamma"):
        pair = raw.get(key)
        if (not isinstance(pair, list) or len(pair) != 2
                or not all(isinstance(v, (int, float)) for v in pair)):
            raise ConfigError("[fields.bounds] %s must be [lo, hi]" % key)
        out[key] = (float(pair[0]), float(pair[1]))
    return out


def _build_mesh(raw):
    body = raw.get("domain")
    if body is None:
        raise ConfigError("missing [domain] section")
    kind = body.get("kind")
    cells = body.get("cells")
    if kind == "interval":
        rng = body.get("range")
        if not isinstance(rng, list) or len(rng) != 2:
            raise ConfigError("[domain] range must be [a, b]")
        if not isinstance(cells, int):
            raise ConfigError("[domain] cells must be an integer "
                              "for an interval")
        return build_interval_mesh(float(rng[0]), float(rng[1]), cells)
    if kind == "rect":
        xr, yr = body.get("xrange"), body.get("yrange")
        for nm, rng in (("xrange", xr), ("yrange", yr)):
            if not isinstance(rng, list) or len(rng) != 2:
                raise ConfigError("[domain] %s must be [a, b]" % nm)
        if (not isinstance(cells, list) or len(cells) != 2
                or not all(isinstance(c, int) for c in cells)):
            raise ConfigError("[domain] cells must be [nx, ny] for a rect")
        return build_rect_mesh((float(xr[0]), float(xr[1])),
                               (float(yr[0]), float(yr[1])),
                               cells[0], cells[1])
    raise ConfigError("[domain] kind must be 'interval' or 'rect'")


def _vector(body):
    comps = [str(body.get(d, "0")) for d in _DERIVS]
    return VectorField(comps)


def load_config(path):
    """Parse and validate a TOML configuration file.

    Returns (ProblemConfig, mesh, extras) where extras carries the
    discretization table, the raw dict, and the optional manufactured
    solution.
    """
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    _schema_check(raw)
    prob = raw.get("problem")
    if prob is None or "omega" not in prob:
        raise ConfigError("missing [problem] omega")
    fields = raw.get("fields")
    if fields is None:
        raise ConfigError("missing [fields] section")
    angvel = prob.get("angvel", [0.0, 0.0, 0.0])
    if not isinstance(angvel, list) or len(angvel) != 3:
        raise ConfigError("[problem] angvel must be [x, y, z]")
    flags_body = raw.get("flags", {})
    flags = {}
    if flags_body.get("c_w1inf"):
        flags["c_w1inf"] = True
    if flags_body.get("rho_w1inf"):
        flags["rho_w1inf"] = True
    if "domain_class" in flags_body:
        dc = flags_body["domain_class"]
        if dc not in ("convex", "c11"):
            raise ConfigError("[flags] domain_class must be "
                              "'convex' or 'c11'")
        flags["domain_class"] = dc
    rhs = _vector(raw["rhs"]) if "rhs" in raw else None
    cfg = ProblemConfig(
        omega=float(prob["omega"]),
        angvel=tuple(float(v) for v in angvel),
        grav_const=float(prob.get("G", 1.0)),
        rho=_expr(fields, "rho"),
        c=_expr(fields, "c"),
        gamma=_expr(fields, "gamma", "0"),
        p=_field_with_derivs(fields, "p"),
        phi=_field_with_derivs(fields, "phi"),
        b=VectorField([str(fields.get("b_x", "0")),
                       str(fields.get("b_y", "0")),
                       str(fields.get("b_z", "0"))]),
        divrhob=_expr(fields, "divrhob", "0"),
        bounds=_bounds(fields),
        flags=flags,
        rhs=rhs,
        safety=float(prob.get("safety", 1.0)),
    )
    disc = raw.get("discretization", {})
    extras = {
        "degree": int(disc.get("degree", 1)),
        "levels": int(disc.get("levels", 3)),
        "quad_points": disc.get("quad_points"),
        "mms": _vector(raw["mms"]) if "mms" in raw else None,
        "raw": raw,
    }
    mesh = _build_mesh(raw)
    return cfg, mesh, extras


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _emit(args, name, payload, started, extra_files=()):
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, name)
    write_json(path, payload)
    manifest = {
        "command": args.command,
        "report": name,
        "walltime": time.perf_counter() - started,
        "version": VERSION,
        "seed": args.seed,
        "files": [name] + list(extra_files),
    }
    if getattr(args, "config", None):
        manifest["config"] = os.path.abspath(args.config)
        manifest["config_hash"] = config_hash(payload)
    with open(os.path.join(outdir, "run_manifest.json"), "w") as fh:
        fh.write(canonical_json(manifest))
    sys.stdout.write(path + "\n")


def _fail(exc, code):
    obj = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    sys.stderr.write(json.dumps(obj, sort_keys=True) + "\n")
    return code


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_check(args):
    t0 = time.perf_counter()
    cfg, mesh, extras = load_config(args.config)
    problem = validate_config(cfg, mesh)
    sector = compute_theta(problem)
    require = None
    if args.require:
        require = [s.strip() for s in args.require.split(",") if s.strip()]
        for name in require:
            if name not in CONDITION_NAMES:
                raise ConfigError("unknown condition %r (known: %s)"
                                  % (name, ", ".join(CONDITION_NAMES)))
    report = check_admissibility(problem, sector.theta, creg=args.creg,
                                 require=require)
    payload = {
        "theta": sector.theta,
        "worst_angle": sector.worst_angle,
        "mach_inf": problem.mach_inf,
        "bnorm_inf": problem.bnorm_inf,
        "admissibility": report.to_dict(),
    }
    _emit(args, "check_report.json", payload, t0)
    if require and not all(row["passed"] for row in
                           report.to_dict()["conditions"]
                           if row["name"] in require):
        return 1
    return 0


def _decomposition_for(problem, vec_space, extras):
    blocks = assembly.assemble_blocks(problem, vec_space,
                                      quad_points=extras["quad_points"])
    R = assembly.assemble_R(problem, vec_space, blocks.scalar_space,
                            quad_points=extras["quad_points"])
    B = assembly.assemble_B(problem, blocks.scalar_space,
                            quad_points=extras["quad_points"])
    decomp = build_decomposition(R, B, blocks.GRAMX, blocks.GRAMH1)
    return blocks, R, B, decomp


def cmd_decompose(args):
    t0 = time.perf_counter()
    cfg, mesh, extras = load_config(args.config)
    problem = validate_config(cfg, mesh)
    V = build_space(mesh, extras["degree"], "vector-with-normal-constraint")
    blocks, R, B, decomp = _decomposition_for(problem, V, extras)
    report = verify_decomposition(decomp, R=R, mass=blocks.MASS,
                                  seed=args.seed)
    if args.export_blocks:
        assembly.export_blocks(blocks, args.export_blocks)
        report = dict(report)
        report["exported_to"] = os.path.abspath(args.export_blocks)
    _emit(args, "decompose_report.json", report, t0)
    return 0


def cmd_tcoerc(args):
    t0 = time.perf_counter()
    cfg, mesh, extras = load_config(args.config)
    rows = []
    walltimes = []
    for lvl in range(1, extras["levels"] + 1):
        problem = validate_config(cfg, mesh)
        V = build_space(mesh, extras["degree"],
                        "vector-with-normal-constraint")
        blocks, R, B, decomp = _decomposition_for(problem, V, extras)
        A = assembly.assemble_cowling(blocks)
        rep = diagnostics.inf_sup(A, blocks.GRAMX, decomp=decomp,
                                  seed=args.seed)
        row = rep.to_dict()
        row["level"] = lvl
        rows.append(row)
        walltimes.append(rep.walltime)
        if lvl < extras["levels"]:
            mesh = mesh.refine()
    betas = [r["beta"] for r in rows]
    payload = {"rows": rows,
               "beta_min": min(betas), "beta_max": max(betas),
               "ratio": (max(betas) / min(betas)) if min(betas) > 0
               else float("inf")}
    _emit(args, "tcoerc_report.json", payload, t0)
    return 0


def cmd_solve(args):
    t0 = time.perf_counter()
    cfg, mesh, extras = load_config(args.config)
    problem = validate_config(cfg, mesh)
    V = build_space(mesh, extras["degree"], "vector-with-normal-constraint")
    if args.model == "cowling":
        res = solve_mod.solve_cowling(problem, V,
                                      quad_points=extras["quad_points"])
    else:
        res = solve_mod.solve_full(problem, V, method=args.method,
                                   quad_points=extras["quad_points"])
    os.makedirs(args.out, exist_ok=True)
    sol_path = os.path.join(args.out, "solution.npz")
    np.savez(sol_path, x=res.x,
             psi=res.psi if res.psi is not None else np.zeros(0, complex))
    payload = dict(res.to_dict())
    payload["model"] = args.model
    _emit(args, "solve_report.json", payload, t0,
          extra_files=["solution.npz"])
    return 0


def cmd_sweep(args):
    t0 = time.perf_counter()
    machs = tuple(float(s) for s in args.machs.split(","))
    rep = diagnostics.sonic_sweep(machs=machs, levels=args.levels,
                                  base_cells=args.base_cells,
                                  threshold=args.threshold)
    _emit(args, "sweep_report.json", rep.to_dict(), t0)
    return 0


def cmd_convergence(args):
    t0 = time.perf_counter()
    cfg, mesh, extras = load_config(args.config)
    if extras["mms"] is None:
        raise ConfigError("convergence needs an [mms] section with the "
                          "manufactured solution")
    problem = validate_config(cfg, mesh)
    rep = solve_mod.mms_convergence(problem, extras["mms"],
                                    levels=extras["levels"],
                                    degree=extras["degree"],
                                    quad_points=extras["quad_points"])
    _emit(args, "convergence_report.json", rep.to_dict(), t0)
    return 0


def cmd_creg(args):
    t0 = time.perf_counter()
    cfg, mesh, extras = load_config(args.config)
    problem = validate_config(cfg, mesh)
    rep = diagnostics.estimate_creg(problem, levels=extras["levels"],
                                    degree=extras["degree"],
                                    quad_points=extras["quad_points"])
    _emit(args, "creg_report.json", rep.to_dict(), t0)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _set_threads(n):
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        import numba
        numba.set_num_threads(n)
    except (ImportError, ValueError):
        pass


def build_parser():
    parser = argparse.ArgumentParser(
        prog="galbrun",
        description="Assembly, decomposition, and well-posedness "
                    "diagnostics for damped time-harmonic flows.")
    parser.add_argument("--version", action="version", version=VERSION)
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for randomized probes (default 0)")
    parser.add_argument("--threads", type=int, default=None,
                        help="thread-count hint for BLAS and kernels")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, needs_config=True):
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("config", help="TOML configuration file")
        p.add_argument("--out", default=".", help="output directory")
        p.set_defaults(func=func)
        return p

    p = add("check", cmd_check)
    p.add_argument("--creg", type=float, default=None,
                   help="regularity constant for the conditions that "
                        "need one")
    p.add_argument("--require", default=None,
                   help="comma-separated condition names that must pass")

    p = add("decompose", cmd_decompose)
    p.add_argument("--export-blocks", default=None, metavar="DIR",
                   help="also write the assembled matrices to DIR")

    add("tcoerc", cmd_tcoerc)

    p = add("solve", cmd_solve)
    p.add_argument("--model", choices=("cowling", "full"),
                   default="cowling")
    p.add_argument("--method", choices=("direct", "schur"),
                   default="direct",
                   help="coupled-system strategy (full model only)")

    p = add("sweep", cmd_sweep, needs_config=False)
    p.add_argument("--machs", default="0.5,1.0,1.5")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--base-cells", type=int, default=32)
    p.add_argument("--threshold", type=float, default=1e-6)

    add("convergence", cmd_convergence)
    add("creg", cmd_creg)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _set_threads(args.threads)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        return _fail(exc, 2)
    except RuntimeError as exc:
        return _fail(exc, 1)


if __name__ == "__main__":
    sys.exit(main())
