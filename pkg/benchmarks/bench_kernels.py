#!/usr/bin/env python3
"""Timing comparison of the numba and numpy assembly backends.

Assembles the full block system for a standing 2D flow problem with both
kernel backends and reports best-of-N wall times.  The first numba pass
includes JIT compilation, so each backend gets an untimed warmup.

    python3 benchmarks/bench_kernels.py --cells 48 --repeats 3
"""

import argparse
import time

import numpy as np

from galbrun import kernels
from galbrun.assembly import assemble_blocks
from galbrun.fields import ScalarField, VectorField
from galbrun.meshing import build_rect_mesh
from galbrun.problem import ProblemConfig, validate_config
from galbrun.spaces import build_space


def make_problem(cells):
    zero = ScalarField.constant(0.0)
    zero3 = VectorField.constant([0.0, 0.0, 0.0])
    hess0 = tuple(ScalarField.constant(0.0) for _ in range(6))
    cfg = ProblemConfig(
        omega=1.3, angvel=(0.0, 0.0, 0.4), grav_const=1.0,
        rho=ScalarField.expression("1 + 0.25*x*y"),
        c=ScalarField.constant(1.0),
        gamma=ScalarField.constant(0.5),
        p=ScalarField.expression(
            "1 + 0.05*x^2 + 0.03*y^2",
            grad=VectorField(["0.1*x", "0.06*y", "0"]),
            hess=(ScalarField.constant(0.1), ScalarField.constant(0.06),
                  zero, zero, zero, zero)),
        phi=ScalarField.constant(0.0, grad=zero3, hess=hess0),
        # rho*b = curl of a bubble stream function, so div(rho b) = 0 exactly
        b=VectorField([
            "x^2*(1-x)^2*(2*y*(1-y)^2 - 2*y^2*(1-y))/(1 + 0.25*x*y)",
            "-(y^2*(1-y)^2*(2*x*(1-x)^2 - 2*x^2*(1-x)))/(1 + 0.25*x*y)",
            "0"]),
        divrhob=ScalarField.constant(0.0),
        bounds={"rho": (0.5, 2.0), "c": (0.5, 2.0), "gamma": (0.0, 1.0)},
        flags={})
    mesh = build_rect_mesh((0.0, 1.0), (0.0, 1.0), cells, cells)
    problem = validate_config(cfg, mesh)
    space = build_space(mesh, 1, "vector-with-normal-constraint")
    return problem, space


def time_backend(problem, space, repeats):
    assemble_blocks(problem, space)  # warmup (JIT compile on first call)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        blocks = assemble_blocks(problem, space)
        best = min(best, time.perf_counter() - t0)
    return best, blocks


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=48,
                    help="cells per side of the square mesh (default 48)")
    ap.add_argument("--repeats", type=int, default=3,
                    help="timed repetitions per backend (default 3)")
    args = ap.parse_args()

    problem, space = make_problem(args.cells)
    print("mesh %dx%d, %d vector dofs" % (args.cells, args.cells,
                                          space.n_dofs))

    results = {}
    reference = None
    backends = ["numpy"] + (["numba"] if kernels.HAS_NUMBA else [])
    if not kernels.HAS_NUMBA:
        print("numba unavailable; timing the numpy path only")
    for name in backends:
        kernels.use_numba(name == "numba")
        best, blocks = time_backend(problem, space, args.repeats)
        results[name] = best
        print("%-6s best of %d: %7.3f s" % (name, args.repeats, best))
        if reference is None:
            reference = blocks.DIV
        else:
            drift = abs(blocks.DIV - reference).max()
            scale = abs(reference).max()
            print("       max DIV drift vs numpy: %.2e (rel %.2e)"
                  % (drift, drift / scale))
    if len(results) == 2:
        print("speedup: %.2fx" % (results["numpy"] / results["numba"]))
    kernels.use_numba(kernels.HAS_NUMBA)


if __name__ == "__main__":
    main()
