"""Well-posedness diagnostics on assembled systems.

These probes quantify, on the discrete level, the structural facts the
continuous analysis rests on: the damping controls the imaginary part of
the quadratic form (injectivity), the transport block is self-adjoint for
divergence-free flows, the no-flow form factorizes through the weighted
divergence, the premultiplied form satisfies a mesh-robust inf-sup bound
in the subsonic regime, and the principal part degenerates at the sonic
line.  Everything returns plain report objects; nothing here asserts.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import assembly
from .decomposition import (DEFAULT_SIZE_LIMIT, build_decomposition, _chol)
from .errors import EmptySubspace, PreconditionViolated, SolverBreakdown
from .fields import ScalarField, VectorField
from .meshing import build_interval_mesh
from .problem import ProblemConfig, validate_config
from .spaces import Quadrature, build_space


# ---------------------------------------------------------------------------
# quadratic-form identities
# ---------------------------------------------------------------------------


def imag_identity_residual(blocks, trials=100, seed=0):
    """Residual of Im(x^H A x) = -omega x^H DAMP x over random vectors.

    The identity encodes that all damping of the reduced form comes from
    the gamma term; it holds to rounding whenever div(rho b) = 0 and is
    violated at O(1) otherwise, which makes it a cheap injectivity /
    sign-convention check.  Returns the max relative residual, normalized
    by |x^H A x| + |omega x^H DAMP x|.
    """
    A = assembly.assemble_cowling(blocks)
    D = blocks.DAMP
    omega = blocks.omega
    rng = np.random.default_rng(seed)
    n = A.shape[0]
    worst = 0.0
    for _ in range(int(trials)):
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        qa = complex(np.vdot(x, A @ x))
        qd = float(np.real(np.vdot(x, D @ x)))
        scale = abs(qa) + abs(omega * qd)
        if scale == 0.0:
            continue
        worst = max(worst, abs(qa.imag + omega * qd) / scale)
    return {"max_rel_residual": worst, "trials": int(trials),
            "omega": omega, "dofs": int(n)}


def selfadjointness_residual(blocks):
    """Frobenius-relative Hermitian defect of the transport block.

    For flows with div(rho b) = 0, no boundary flux, and quadrature exact
    for the product rho b . grad(basis^2), the block <rho i d_b xi, xi'>
    is exactly Hermitian; the residual measures how far the assembled
    matrix is from that.
    """
    S = blocks.TRANS
    diff = (S - S.getH())
    num = sla.norm(diff.toarray()) if diff.nnz else 0.0
    den = sla.norm(S.toarray()) if S.nnz else 0.0
    if den == 0.0:
        return {"residual": 0.0, "norm": 0.0}
    return {"residual": float(num / den), "norm": float(den)}


def representation_identity_residual(problem, vec_space, quad_points=None):
    """Frobenius-relative gap between the no-flow form and its factorized
    representation  <c^2 rho (div + q.) xi, (div + q.) xi'> - <Lambda xi, xi'>.

    The two integrands agree pointwise, so with a shared quadrature rule the
    assembled matrices agree to rounding for any smooth data -- provided the
    flow vanishes; a nonzero b has no factorized counterpart and raises
    PreconditionViolated.
    """
    cfg = getattr(problem, "config", problem)
    bnorm = getattr(problem, "bnorm_inf", None)
    if bnorm is None:
        pts = np.zeros((1, 3))
        bnorm = float(np.max(np.abs(cfg.b(pts))))
    if bnorm > 0.0:
        raise PreconditionViolated(
            "the factorized representation requires b = 0 (got |b| up to %g)"
            % bnorm)
    blocks = assembly.assemble_blocks(problem, vec_space,
                                      quad_points=quad_points)
    A = assembly.assemble_cowling(blocks)
    E1 = assembly.factorized_principal(problem, vec_space,
                                       quad_points=quad_points)
    LAM = assembly.lambda_mass(problem, vec_space, quad_points=quad_points)
    diff = A - (E1 - LAM)
    den = sla.norm(A.toarray())
    num = sla.norm(diff.toarray())
    return {"residual": float(num / den), "norm": float(den),
            "dofs": int(A.shape[0])}


# ---------------------------------------------------------------------------
# inf-sup constants
# ---------------------------------------------------------------------------


@dataclass
class InfSupReport:
    beta: float
    dofs: int
    method: str
    premultiplied: bool
    walltime: float

    def to_dict(self):
        # wall time goes to the run manifest, not the canonical report
        return {"beta": self.beta, "dofs": self.dofs, "method": self.method,
                "premultiplied": self.premultiplied}


def _whitened_dense(A, L):
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A)
    Y = sla.solve_triangular(L, Ad, lower=True)
    Z = sla.solve_triangular(L, Y.conj().T, lower=True)
    return Z.conj().T


def whitened_singulars(A, gramX, size_limit=DEFAULT_SIZE_LIMIT):
    """All singular values of L^{-1} A L^{-H} (descending), dense only."""
    L = _chol(gramX, "gramX", size_limit)
    return np.linalg.svd(_whitened_dense(A, L), compute_uv=False)


def inf_sup(A, gramX, decomp=None, size_limit=DEFAULT_SIZE_LIMIT,
            maxiter=200, tol=1e-10, seed=0):
    """Discrete inf-sup constant of A in the graph norm.

    beta = sigma_min(L^{-1} A L^{-H}) with gramX = L L^H.  When a
    decomposition is given, A is premultiplied by T^H first (the sign-flip
    isometry leaves the singular values unchanged in exact arithmetic, but
    the premultiplied form is the one the stability theory bounds).  Small
    systems use a dense SVD; larger ones run inverse power iteration on
    A^{-1} G A^{-H} G via a sparse LU of A, raising SolverBreakdown when
    the factorization or the iteration fails.
    """
    t0 = time.perf_counter()
    n = A.shape[0]
    premult = decomp is not None
    if premult:
        T = decomp.T_matrix()
        A_eff = T.T @ (A.toarray() if sp.issparse(A) else A)
    else:
        A_eff = A
    if n <= size_limit:
        L = _chol(gramX, "gramX", size_limit)
        s = np.linalg.svd(_whitened_dense(A_eff, L), compute_uv=False)
        beta = float(s[-1]) if len(s) else 0.0
        return InfSupReport(beta=beta, dofs=int(n), method="dense",
                            premultiplied=premult,
                            walltime=time.perf_counter() - t0)
    if premult:
        raise SolverBreakdown(
            "premultiplied inf-sup needs the dense path (%d dofs > %d)"
            % (n, size_limit))
    G = gramX.tocsr()
    try:
        lu = spla.splu(sp.csc_matrix(A_eff))
    except RuntimeError as exc:
        raise SolverBreakdown("sparse LU failed: %s" % exc)
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(n) + 1j * rng.standard_normal(n)

    def gdot(u, v):
        return complex(np.vdot(u, G @ v))

    y = y / np.sqrt(abs(gdot(y, y)))
    theta_old = np.inf
    theta = 0.0
    for _ in range(maxiter):
        v1 = lu.solve(G @ y, trans="H")
        z = lu.solve(G @ v1)
        theta = abs(gdot(y, z))
        nz = np.sqrt(abs(gdot(z, z)))
        if not np.isfinite(nz) or nz == 0.0:
            raise SolverBreakdown("inverse iteration broke down")
        y = z / nz
        if abs(theta - theta_old) <= tol * theta:
            break
        theta_old = theta
    beta = float(1.0 / np.sqrt(theta))
    return InfSupReport(beta=beta, dofs=int(n), method="iterative",
                        premultiplied=False,
                        walltime=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# regularity-constant estimate
# ---------------------------------------------------------------------------


@dataclass
class CregReport:
    rows: list
    monotone: bool
    degree: int

    def to_dict(self):
        return {"rows": self.rows, "monotone": self.monotone,
                "degree": self.degree}


def _complement_basis(L, W, Z):
    n = L.shape[0]
    C = np.hstack([W, Z])
    if C.shape[1] == 0:
        Qc = np.eye(n)
    else:
        Ct = L.T @ C
        Q, _ = np.linalg.qr(Ct, mode="complete")
        Qc = Q[:, C.shape[1]:]
    return sla.solve_triangular(L, Qc, lower=True, trans="T")


def estimate_creg_level(problem, vec_space, scalar_space=None,
                        quad_points=None, size_limit=DEFAULT_SIZE_LIMIT):
    """Regularity-constant estimate on one mesh level.

    C^2 is the smallest Rayleigh quotient of the divergence-plus-mass form
    against the full-gradient-plus-mass form over the complement subspace
    V_h of the decomposition: how much of the H1 energy the divergence
    controls once the divergence-free and stratification directions are
    projected out.
    """
    blocks = assembly.assemble_blocks(problem, vec_space, scalar_space,
                                      quad_points=quad_points)
    R = assembly.assemble_R(problem, vec_space, blocks.scalar_space,
                            quad_points=quad_points)
    B = assembly.assemble_B(problem, blocks.scalar_space,
                            quad_points=quad_points)
    decomp = build_decomposition(R, B, blocks.GRAMX, blocks.GRAMH1,
                                 size_limit=size_limit)
    if decomp.dim_V == 0:
        raise EmptySubspace("V_h is empty on this mesh")
    DIV0, GRADFULL, MASS = assembly.creg_matrices(vec_space,
                                                  quad_points=quad_points)
    L = _chol(blocks.GRAMX, "gramX", size_limit)
    Vb = _complement_basis(L, decomp.W, decomp.Z)
    K1 = Vb.T @ ((DIV0 + MASS).real @ Vb)
    K2 = Vb.T @ ((GRADFULL + MASS).real @ Vb)
    K1 = 0.5 * (K1 + K1.T)
    K2 = 0.5 * (K2 + K2.T)
    c2 = sla.eigh(K1, K2, eigvals_only=True, subset_by_index=[0, 0])[0]
    est = float(np.sqrt(max(c2, 0.0)))
    return est, decomp


def estimate_creg(problem, levels=3, degree=1, quad_points=None,
                  size_limit=DEFAULT_SIZE_LIMIT):
    """Per-level regularity-constant estimates on nested refinements.

    Returns a CregReport whose rows carry {level, dofs, dim_V, estimate};
    ``monotone`` records whether the sequence is nonincreasing (the
    estimates are infima over growing search spaces, so refinement should
    never raise them beyond rounding).
    """
    cfg = getattr(problem, "config", problem)
    mesh = problem.mesh
    rows = []
    prev = None
    monotone = True
    for lvl in range(1, int(levels) + 1):
        prob = validate_config(cfg, mesh)
        V = build_space(mesh, degree, "vector-with-normal-constraint")
        est, decomp = estimate_creg_level(prob, V, quad_points=quad_points,
                                          size_limit=size_limit)
        rows.append({"level": lvl, "dofs": int(V.n_dofs),
                     "dim_V": int(decomp.dim_V), "estimate": est})
        if prev is not None and est > prev + 1e-12:
            monotone = False
        prev = est
        if lvl < levels:
            mesh = mesh.refine()
    return CregReport(rows=rows, monotone=monotone, degree=int(degree))


# ---------------------------------------------------------------------------
# sonic sweep
# ---------------------------------------------------------------------------

# A C-infinity plateau bump: exactly 1 on |x| <= 1/4 and exactly 0 for
# |x| >= 1/2 in IEEE arithmetic (tanh saturates), smooth in between, with a
# hand-differentiated derivative for the declared div(rho b).
_BUMP = ("0.25*(1 + tanh(160*(x + 0.375)))*(1 - tanh(160*(x - 0.375)))")
_BUMP_DX = ("40*(1 - tanh(160*(x + 0.375))^2)*(1 - tanh(160*(x - 0.375)))"
            " - 40*(1 + tanh(160*(x + 0.375)))"
            "*(1 - tanh(160*(x - 0.375))^2)")


@dataclass
class SweepReport:
    rows: list
    threshold: float
    template: dict

    def to_dict(self):
        return {"rows": self.rows, "threshold": self.threshold,
                "template": self.template}


def _sweep_problem(mach, cells):
    mesh = build_interval_mesh(-1.0, 1.0, cells)
    zero = ScalarField.constant(0.0)
    zgrad = VectorField.constant([0.0, 0.0, 0.0])
    zhess = tuple(ScalarField.constant(0.0) for _ in range(6))
    bx = "%r*(%s)" % (float(mach), _BUMP)
    drb = "%r*(%s)" % (float(mach), _BUMP_DX)
    cfg = ProblemConfig(
        omega=0.0, angvel=(0.0, 0.0, 0.0), grav_const=1.0,
        rho=ScalarField.constant(1.0), c=ScalarField.constant(1.0),
        gamma=zero,
        p=ScalarField.constant(1.0, grad=zgrad, hess=zhess),
        phi=ScalarField.constant(0.0, grad=zgrad, hess=zhess),
        b=VectorField([bx, "0", "0"]),
        divrhob=ScalarField.expression(drb),
        bounds={"rho": (0.5, 2.0), "c": (0.5, 2.0), "gamma": (0.0, 1.0)},
        flags={})
    return validate_config(cfg, mesh), mesh


def sonic_sweep(machs=(0.5, 1.0, 1.5), levels=3, base_cells=32,
                threshold=1e-6, quad_points=None,
                size_limit=DEFAULT_SIZE_LIMIT):
    """Near-kernel census across the sonic transition.

    A one-dimensional zero-frequency template (unit sound speed and
    density, compactly supported plateau flow of amplitude ``mach``) is
    assembled on ``levels`` nested refinements for each flow amplitude.
    Each row records the smallest whitened singular value (the inf-sup
    constant of the unpremultiplied form), the count of whitened singular
    values below ``threshold``, and the minimum of the principal
    coefficient (c^2 - b^2) rho over the quadrature points.  Subsonic
    amplitudes keep the count at zero and beta bounded; at the sonic
    amplitude the plateau cells produce exact zero columns whose number
    grows under refinement; beyond it the principal coefficient changes
    sign on the plateau.
    """
    rows = []
    for mach in sorted(float(m) for m in machs):
        for lvl in range(1, int(levels) + 1):
            cells = int(base_cells) * 2 ** (lvl - 1)
            prob, mesh = _sweep_problem(mach, cells)
            V = build_space(mesh, 1, "vector-with-normal-constraint")
            blocks = assembly.assemble_blocks(prob, V,
                                              quad_points=quad_points)
            A = assembly.assemble_cowling(blocks)
            s = whitened_singulars(A, blocks.GRAMX, size_limit=size_limit)
            npts = int(quad_points) if quad_points else V.degree + 3
            quad = Quadrature(npts, 1)
            pts, _ = V.quad_points(quad)
            flat = pts.reshape(-1, 3)
            cfg = prob.config
            principal = (cfg.c(flat) ** 2 - cfg.b(flat)[:, 0] ** 2) * cfg.rho(flat)
            rows.append({
                "mach": mach,
                "level": lvl,
                "cells": cells,
                "dofs": int(V.n_dofs),
                "beta": float(s[-1]) if len(s) else 0.0,
                "count": int(np.sum(s < threshold)),
                "principal_min": float(np.min(principal)),
            })
    template = {
        "domain": [-1.0, 1.0],
        "base_cells": int(base_cells),
        "omega": 0.0,
        "bump": _BUMP,
        "bump_dx": _BUMP_DX,
    }
    return SweepReport(rows=rows, threshold=float(threshold),
                       template=template)
