"""Direct solvers and manufactured-solution convergence studies.

The reduced (no-gravity-perturbation) system is solved with a sparse LU.
The self-gravitating system couples the displacement to a potential in a
Dirichlet scalar space; it can be solved monolithically or by eliminating
the potential through a Schur complement, and the two routes are kept
independent so they can cross-check each other.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import assembly
from .errors import SingularGravityBlock, SingularMatrix, SolverBreakdown
from .problem import validate_config
from .spaces import build_space, interpolate, prolongation


@dataclass
class SolveResult:
    x: np.ndarray
    psi: np.ndarray | None
    residual: float
    dofs: int
    method: str
    walltime: float

    def to_dict(self):
        out = {"residual": self.residual, "dofs": self.dofs,
               "method": self.method}
        if self.psi is not None:
            out["gravity_dofs"] = int(self.psi.shape[0])
        return out


def _sparse_solve(A, F, label):
    try:
        lu = spla.splu(sp.csc_matrix(A))
    except RuntimeError as exc:
        raise SingularMatrix("%s factorization failed: %s" % (label, exc))
    x = lu.solve(F)
    if not np.all(np.isfinite(x.real)) or not np.all(np.isfinite(x.imag)):
        raise SolverBreakdown("%s solve produced non-finite values" % label)
    return x


def _rel_residual(A, x, F):
    num = float(np.linalg.norm(A @ x - F))
    den = float(np.linalg.norm(F))
    return num / den if den > 0.0 else num


def solve_cowling(problem, vec_space, f=None, blocks=None, quad_points=None):
    """Solve the reduced displacement system A x = F directly.

    ``f`` overrides the configured volume load; with neither, the load is
    zero and (for omega != 0) the unique solution is the zero vector.
    """
    t0 = time.perf_counter()
    if blocks is None:
        blocks = assembly.assemble_blocks(problem, vec_space,
                                          quad_points=quad_points)
    A = assembly.assemble_cowling(blocks)
    F = assembly.assemble_rhs(problem, vec_space, quad_points=quad_points,
                              f=f)
    x = _sparse_solve(A, F, "reduced system")
    return SolveResult(x=x, psi=None, residual=_rel_residual(A, x, F),
                       dofs=int(A.shape[0]), method="cowling",
                       walltime=time.perf_counter() - t0)


def _gravity_factor(problem):
    G = getattr(problem, "config", problem).grav_const
    if not (G > 0.0) or not np.isfinite(G):
        raise SingularGravityBlock(
            "the potential block needs a positive gravitational constant "
            "(got %r)" % G)
    return 1.0 / (4.0 * np.pi * G)


def solve_full(problem, vec_space, f=None, method="direct", blocks=None,
               quad_points=None):
    """Solve the coupled displacement/potential system.

    method="direct" assembles the 2x2 block matrix
        [[A, -C^H], [-C, (4 pi G)^-1 S]]
    and factors it monolithically; method="schur" eliminates the potential,
    solving (A - 4 pi G C^H S^-1 C) x = F densely and recovering
    psi = 4 pi G S^-1 C x.  Both return the same (x, psi) up to solver
    rounding.
    """
    t0 = time.perf_counter()
    if blocks is None:
        blocks = assembly.assemble_blocks(problem, vec_space,
                                          quad_points=quad_points)
    fac = _gravity_factor(problem)
    A = assembly.assemble_cowling(blocks)
    C = blocks.GRAVC
    S = blocks.GRAVS
    F = assembly.assemble_rhs(problem, vec_space, quad_points=quad_points,
                              f=f)
    n = A.shape[0]
    ndir = C.shape[0]
    if ndir == 0:
        x = _sparse_solve(A, F, "reduced system")
        return SolveResult(x=x, psi=np.zeros(0, dtype=complex),
                           residual=_rel_residual(A, x, F), dofs=int(n),
                           method=method, walltime=time.perf_counter() - t0)
    if method == "direct":
        big = sp.bmat([[A, -C.getH()], [-C, fac * S]], format="csc")
        Fb = np.concatenate([F, np.zeros(ndir, dtype=complex)])
        sol = _sparse_solve(big, Fb, "coupled system")
        x, psi = sol[:n], sol[n:]
        res = _rel_residual(big, sol, Fb)
    elif method == "schur":
        try:
            slu = spla.splu(sp.csc_matrix(S))
        except RuntimeError as exc:
            raise SingularGravityBlock(
                "potential stiffness factorization failed: %s" % exc)
        Y = slu.solve(C.toarray())            # S^-1 C, (ndir, n)
        a_add = (C.getH() @ Y) / fac          # 4 pi G * C^H S^-1 C
        dense = A.toarray() - a_add
        try:
            lu, piv = sla.lu_factor(dense)
        except (ValueError, sla.LinAlgError) as exc:
            raise SingularMatrix("Schur complement factorization failed: %s"
                                 % exc)
        x = sla.lu_solve((lu, piv), F)
        if not np.all(np.isfinite(x.real)):
            raise SolverBreakdown("Schur solve produced non-finite values")
        psi = slu.solve(C @ x) / fac
        res = _rel_residual(dense, x, F)
    else:
        raise ValueError("unknown method %r" % method)
    return SolveResult(x=x, psi=psi, residual=res, dofs=int(n),
                       method=method, walltime=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# manufactured-solution convergence
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceReport:
    rows: list
    order_l2: float
    order_x: float
    fine_dofs: int
    degree: int

    def to_dict(self):
        return {"rows": self.rows, "order_l2": self.order_l2,
                "order_x": self.order_x, "fine_dofs": self.fine_dofs,
                "degree": self.degree}


def _mesh_h(mesh):
    return max(float(np.max(np.diff(ax))) for ax in mesh.axes
               if len(ax) > 1)


def mms_convergence(problem, exact, levels=4, degree=1, refine_extra=3,
                    quad_points=None):
    """Convergence study against a reference solution on a much finer grid.

    The exact field is interpolated on a mesh ``refine_extra`` refinements
    past the finest study level; the load is manufactured by applying the
    fine-grid operator to that interpolant, then restricted to each study
    level through the transpose of the nested-space prolongation.  Errors
    are measured on the fine grid after prolongating each level's solution,
    which keeps the comparison free of same-grid cancellation.
    """
    cfg = getattr(problem, "config", problem)
    meshes = [problem.mesh]
    for _ in range(int(levels) - 1 + int(refine_extra)):
        meshes.append(meshes[-1].refine())
    fine_mesh = meshes[-1]
    spaces = [build_space(m, degree, "vector-with-normal-constraint")
              for m in meshes]
    fine_space = spaces[-1]

    steps = [prolongation(spaces[i], spaces[i + 1])
             for i in range(len(spaces) - 1)]

    prob_fine = validate_config(cfg, fine_mesh)
    blocks_fine = assembly.assemble_blocks(prob_fine, fine_space,
                                           quad_points=quad_points)
    A_fine = assembly.assemble_cowling(blocks_fine)
    u_fine = interpolate(exact, fine_space)
    g = A_fine @ u_fine

    rows = []
    hs, el2, ex = [], [], []
    for lvl in range(int(levels)):
        P = steps[lvl]
        for step in steps[lvl + 1:]:
            P = step @ P
        prob_l = validate_config(cfg, meshes[lvl])
        blocks_l = assembly.assemble_blocks(prob_l, spaces[lvl],
                                            quad_points=quad_points)
        A_l = assembly.assemble_cowling(blocks_l)
        rhs_l = P.getH() @ g
        x_l = _sparse_solve(A_l, rhs_l, "level %d system" % (lvl + 1))
        e = P @ x_l - u_fine
        err_l2 = float(np.sqrt(abs(np.vdot(e, blocks_fine.MASS @ e))))
        err_x = float(np.sqrt(abs(np.vdot(e, blocks_fine.GRAMX @ e))))
        h = _mesh_h(meshes[lvl])
        rows.append({"level": lvl + 1, "dofs": int(spaces[lvl].n_dofs),
                     "h": h, "err_l2": err_l2, "err_x": err_x})
        hs.append(h)
        el2.append(err_l2)
        ex.append(err_x)

    def _order(errs):
        if min(errs) <= 0.0:
            return float("inf")
        coef = np.polyfit(np.log(hs), np.log(errs), 1)
        return float(coef[0])

    return ConvergenceReport(rows=rows, order_l2=_order(el2),
                             order_x=_order(ex),
                             fine_dofs=int(fine_space.n_dofs),
                             degree=int(degree))
