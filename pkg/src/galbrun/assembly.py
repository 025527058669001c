"""Global assembly of the coupled-form blocks.

Each block of the damped time-harmonic form is assembled separately into a
complex CSR matrix so diagnostics can probe them individually; the vector
equation in the reduced (no self-gravity) model is recovered by
:func:`assemble_cowling`:

    A = DIV + PC1 + PC2 + HESS - ADV - i omega DAMP

All blocks use the convention ``A[i, j] = form(phi_j, phi_i)`` (trial
column, test row), so ``x^H A x`` evaluates the quadratic form.  Assembly
walks cells in fixed chunks and merges triplets in deterministic order;
repeated runs produce bitwise-identical matrices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from . import kernels
from .errors import DimensionMismatch, QuadratureInsufficient
from .problem import compute_lambda, compute_q, cross_matrix
from .reporting import canonical_json
from .spaces import FESpace, Quadrature, build_space

_CHUNK = 2048

_BLOCK_NAMES = ("DIV", "PC1", "PC2", "HESS", "ADV", "DAMP", "TRANS",
                "GRAVC", "GRAVS", "GRAMX", "GRAMH1", "MASS")


@dataclass
class SystemBlocks:
    """Assembled form blocks, one complex CSR matrix each.

    Vector-space blocks (square, n_vec x n_vec):

    DIV    <c^2 rho div xi, div xi'>
    PC1    <div xi, grad(p) . xi'>
    PC2    <grad(p) . xi, div xi'>  (transpose of PC1 by construction)
    HESS   <(Hess p - rho Hess phi) xi, xi'>
    ADV    <rho L xi, L xi'> - i <div(rho b) L xi, xi'>,  L = omega + i d_b + i Omega x
    DAMP   <gamma rho xi, xi'>
    TRANS  <rho i d_b xi, xi'>  (skew up to quadrature when div(rho b) = 0)
    GRAMX  graph inner product: <div xi, div xi'> + <d_b xi, d_b xi'> + <xi, xi'>
    MASS   <xi, xi'>

    Scalar-space blocks:

    GRAMH1 H1 inner product on the free scalar space
    GRAVS  <grad psi, grad psi'> on the homogeneous-Dirichlet scalar space
    GRAVC  <rho xi, grad psi'> coupling (rows: Dirichlet scalar test dofs)
    """

    DIV: sp.csr_matrix
    PC1: sp.csr_matrix
    PC2: sp.csr_matrix
    HESS: sp.csr_matrix
    ADV: sp.csr_matrix
    DAMP: sp.csr_matrix
    TRANS: sp.csr_matrix
    GRAVC: sp.csr_matrix
    GRAVS: sp.csr_matrix
    GRAMX: sp.csr_matrix
    GRAMH1: sp.csr_matrix
    MASS: sp.csr_matrix
    omega: float
    vec_space: FESpace
    scalar_space: FESpace
    scalar_dirichlet_space: FESpace


class _Triplets:
    """Deterministic COO accumulator over free dofs."""

    def __init__(self, shape):
        self.shape = shape
        self.rows = []
        self.cols = []
        self.vals = []

    def add(self, lrow, lcol, local):
        R = np.broadcast_to(lrow[:, :, None], local.shape)
        C = np.broadcast_to(lcol[:, None, :], local.shape)
        keep = (R >= 0) & (C >= 0)
        self.rows.append(R[keep])
        self.cols.append(C[keep])
        self.vals.append(local[keep])

    def _arrays(self):
        if not self.rows:
            z = np.zeros(0)
            return z.astype(int), z.astype(int), z.astype(np.complex128)
        return (np.concatenate(self.rows), np.concatenate(self.cols),
                np.concatenate(self.vals))

    def tocsr(self):
        r, c, v = self._arrays()
        return sp.coo_matrix((v, (r, c)), shape=self.shape).tocsr()

    def transposed_csr(self):
        r, c, v = self._arrays()
        shape = (self.shape[1], self.shape[0])
        return sp.coo_matrix((v, (c, r)), shape=shape).tocsr()


def _local_map(space):
    lm = space.dofmap[space.cell_nodes]  # (nc, nloc, ncomp)
    return lm.reshape(lm.shape[0], -1)


def _same_mesh(a, b):
    if a.mesh is b.mesh:
        return True
    if a.mesh.dimension != b.mesh.dimension:
        return False
    return all(np.array_equal(x, y) for x, y in zip(a.mesh.axes, b.mesh.axes))


def _require_same_mesh(*spaces):
    first = spaces[0]
    for other in spaces[1:]:
        if not _same_mesh(first, other):
            raise DimensionMismatch("spaces live on different meshes")


def _config(problem):
    return getattr(problem, "config", problem)


def check_quadrature(cfg, degree, npts):
    """Warn when the tensor rule cannot integrate the block data exactly.

    For polynomial coefficient data the worst product degree over the
    blocks is compared against the rule's per-axis exactness; for
    non-polynomial data there is no exact rule, and anything below the
    ``degree + 3`` default is flagged.
    """
    degs = {
        "rho": cfg.rho.poly_degree(),
        "c": cfg.c.poly_degree(),
        "gamma": cfg.gamma.poly_degree(),
        "divrhob": cfg.divrhob.poly_degree(),
        "b": cfg.b.poly_degree(),
        "gradp": cfg.p.grad.poly_degree() if cfg.p.has_grad else None,
        "gradphi": cfg.phi.grad.poly_degree() if cfg.phi.has_grad else None,
    }
    for src in ("p", "phi"):
        fld = getattr(cfg, src)
        hd = ([comp.poly_degree() for comp in fld.hess]
              if fld.has_hess else [None])
        if any(d is None for d in hd):
            degs["hess" + src] = None
        else:
            degs["hess" + src] = tuple(max(d[i] for d in hd) for i in range(3))
    if any(d is None for d in degs.values()):
        if npts < degree + 3:
            warnings.warn(
                "quadrature with %d points/axis is below the safety default "
                "%d for non-polynomial coefficient data" % (npts, degree + 3),
                QuadratureInsufficient, stacklevel=3)
        return

    def axes_max(*terms):
        return max(max(t) for t in terms)

    d = {k: np.asarray(v) for k, v in degs.items()}
    dmax = axes_max(
        2 * d["c"] + d["rho"],           # c^2 rho div-div
        d["gamma"] + d["rho"],           # damping mass
        d["rho"] + 2 * d["b"],           # advection Gram
        d["divrhob"] + d["b"],           # advection correction
        2 * d["b"],                      # graph-norm transport part
        d["gradp"],                      # pressure coupling
        d["hessp"],
        d["rho"] + d["hessphi"],
    )
    needed = (2 * degree + int(dmax) + 2) // 2
    if npts < needed:
        warnings.warn(
            "quadrature with %d points/axis is not exact for polynomial "
            "data of per-axis coefficient degree %d (needs %d)"
            % (npts, int(dmax), needed),
            QuadratureInsufficient, stacklevel=3)


def _chunk_fields(cfg, pts):
    """Coefficient values at a chunk of quadrature points."""
    nch, nq = pts.shape[0], pts.shape[1]
    flat = pts.reshape(-1, 3)

    def scal(field):
        return np.ascontiguousarray(field(flat).reshape(nch, nq), np.float64)

    rho = scal(cfg.rho)
    cs = scal(cfg.c)
    gamma = scal(cfg.gamma)
    drb = scal(cfg.divrhob)
    bv = np.ascontiguousarray(cfg.b(flat).reshape(nch, nq, 3), np.float64)
    gradp = np.ascontiguousarray(cfg.p.grad(flat).reshape(nch, nq, 3), np.float64)
    hess = cfg.p.hess_at(flat) - rho.reshape(-1, 1, 1) * cfg.phi.hess_at(flat)
    hess = np.ascontiguousarray(hess.reshape(nch, nq, 3, 3), np.float64)
    return rho, cs, gamma, drb, bv, gradp, hess


def assemble_blocks(problem, vec_space, scalar_space=None, quad_points=None):
    """Assemble every form block on the given spaces.

    ``scalar_space`` is the free scalar space used for the H1 gram and the
    decomposition couplings; when omitted, a sibling of the same degree on
    the same mesh is built (a richer scalar space would overconstrain the
    kernel of R and collapse the divergence-free subspace).  The
    homogeneous-Dirichlet sibling for the truncated gravity potential is
    always built internally.
    """
    cfg = _config(problem)
    mesh = vec_space.mesh
    if vec_space.kind == "scalar":
        raise DimensionMismatch("assemble_blocks needs a vector space")
    if scalar_space is None:
        scalar_space = build_space(mesh, vec_space.degree, "scalar")
    _require_same_mesh(vec_space, scalar_space)
    scalar_dir = build_space(mesh, scalar_space.degree, "scalar", dirichlet=True)

    npts = int(quad_points) if quad_points else max(vec_space.degree,
                                                    scalar_space.degree) + 3
    check_quadrature(cfg, max(vec_space.degree, scalar_space.degree), npts)
    quad = Quadrature(npts, mesh.dimension)
    Nv, Gv_ref = vec_space.tabulate(quad.points)
    Ns, Gs_ref = scalar_space.tabulate(quad.points)
    pts, wq = vec_space.quad_points(quad)
    _, hs = vec_space.cell_geometry()
    omega = float(cfg.omega)
    CR = cross_matrix(cfg.angvel)
    ncomp = vec_space.ncomp

    nvec = vec_space.n_dofs
    nsc = scalar_space.n_dofs
    ndir = scalar_dir.n_dofs
    lv_all = _local_map(vec_space)
    ls_all = _local_map(scalar_space)
    ld_all = _local_map(scalar_dir)

    tDIV = _Triplets((nvec, nvec))
    tPC1 = _Triplets((nvec, nvec))
    tHESS = _Triplets((nvec, nvec))
    tADV = _Triplets((nvec, nvec))
    tDAMP = _Triplets((nvec, nvec))
    tTRANS = _Triplets((nvec, nvec))
    tGRAMX = _Triplets((nvec, nvec))
    tMASS = _Triplets((nvec, nvec))
    tGH1 = _Triplets((nsc, nsc))
    tGRAVS = _Triplets((ndir, ndir))
    tGRAVC = _Triplets((ndir, nvec))

    nc = mesh.num_cells
    for c0 in range(0, nc, _CHUNK):
        c1 = min(c0 + _CHUNK, nc)
        w = wq[c0:c1]
        hchunk = hs[c0:c1]
        G = Gv_ref[None, :, :, :] / hchunk[:, None, None, :]
        Gs = Gs_ref[None, :, :, :] / hchunk[:, None, None, :]
        rho, cs, gamma, drb, bv, gradp, hess = _chunk_fields(cfg, pts[c0:c1])
        ones = np.ones_like(rho)

        lv = lv_all[c0:c1]
        ls = ls_all[c0:c1]
        ld = ld_all[c0:c1]

        tDIV.add(lv, lv, kernels.div_div(w, cs * cs * rho, G))
        tPC1.add(lv, lv, kernels.div_gradp(w, gradp, Nv, G))
        tHESS.add(lv, lv, kernels.matrix_mass(w, hess, Nv, ncomp))
        tADV.add(lv, lv, kernels.advection_gram(w, rho, drb, bv, omega, CR, Nv, G))
        tDAMP.add(lv, lv, kernels.vector_mass(w, gamma * rho, Nv, ncomp))
        tTRANS.add(lv, lv, kernels.transport(w, rho, bv, Nv, G))
        gx = kernels.div_div(w, ones, G)
        gx += kernels.bgrad_gram(w, bv, G)
        gx += kernels.vector_mass(w, ones, Nv, ncomp)
        tGRAMX.add(lv, lv, gx)
        tMASS.add(lv, lv, kernels.vector_mass(w, ones, Nv, ncomp))
        gh1 = kernels.scalar_stiffness(w, ones, Gs)
        gh1 += kernels.scalar_mass(w, ones, Ns)
        tGH1.add(ls, ls, gh1)
        tGRAVS.add(ld, ld, kernels.scalar_stiffness(w, ones, Gs))
        tGRAVC.add(ld, lv, kernels.grad_coupling(w, rho, Nv, Gs))

    return SystemBlocks(
        DIV=tDIV.tocsr(), PC1=tPC1.tocsr(), PC2=tPC1.transposed_csr(),
        HESS=tHESS.tocsr(), ADV=tADV.tocsr(), DAMP=tDAMP.tocsr(),
        TRANS=tTRANS.tocsr(), GRAVC=tGRAVC.tocsr(), GRAVS=tGRAVS.tocsr(),
        GRAMX=tGRAMX.tocsr(), GRAMH1=tGH1.tocsr(), MASS=tMASS.tocsr(),
        omega=omega, vec_space=vec_space, scalar_space=scalar_space,
        scalar_dirichlet_space=scalar_dir)


def assemble_cowling(blocks):
    """Reduced-model system matrix from assembled blocks."""
    return (blocks.DIV + blocks.PC1 + blocks.PC2 + blocks.HESS
            - blocks.ADV - 1j * blocks.omega * blocks.DAMP).tocsr()


def _pair_tabulation(vec_space, scalar_space, quad_points):
    _require_same_mesh(vec_space, scalar_space)
    npts = int(quad_points) if quad_points else max(vec_space.degree,
                                                    scalar_space.degree) + 3
    quad = Quadrature(npts, vec_space.mesh.dimension)
    return quad


def assemble_R(problem, vec_space, scalar_space, quad_points=None):
    """Divergence-coupling block R[i, j] = <xi_j, grad v_i> - <q . xi_j, v_i>.

    Rows run over the free scalar space, columns over the vector space; the
    kernel of R is the discretely weighted-divergence-free subspace.
    """
    cfg = _config(problem)
    quad = _pair_tabulation(vec_space, scalar_space, quad_points)
    Nv, _ = vec_space.tabulate(quad.points)
    Ns, Gs_ref = scalar_space.tabulate(quad.points)
    pts, wq = vec_space.quad_points(quad)
    _, hs = vec_space.cell_geometry()
    lv_all = _local_map(vec_space)
    ls_all = _local_map(scalar_space)
    trip = _Triplets((scalar_space.n_dofs, vec_space.n_dofs))
    nc = vec_space.mesh.num_cells
    for c0 in range(0, nc, _CHUNK):
        c1 = min(c0 + _CHUNK, nc)
        Gs = Gs_ref[None, :, :, :] / hs[c0:c1][:, None, None, :]
        flat = pts[c0:c1].reshape(-1, 3)
        qv = np.ascontiguousarray(
            compute_q(cfg, flat).reshape(c1 - c0, quad.n_points, 3), np.float64)
        trip.add(ls_all[c0:c1], lv_all[c0:c1],
                 kernels.r_coupling(wq[c0:c1], qv, Nv, Ns, Gs))
    return trip.tocsr()


def assemble_B(problem, scalar_space, quad_points=None):
    """Scalar form B[i, j] = <grad v_j, grad v_i> - <q . grad v_j, v_i>."""
    cfg = _config(problem)
    quad = _pair_tabulation(scalar_space, scalar_space, quad_points)
    Ns, Gs_ref = scalar_space.tabulate(quad.points)
    pts, wq = scalar_space.quad_points(quad)
    _, hs = scalar_space.cell_geometry()
    ls_all = _local_map(scalar_space)
    trip = _Triplets((scalar_space.n_dofs, scalar_space.n_dofs))
    nc = scalar_space.mesh.num_cells
    for c0 in range(0, nc, _CHUNK):
        c1 = min(c0 + _CHUNK, nc)
        Gs = Gs_ref[None, :, :, :] / hs[c0:c1][:, None, None, :]
        flat = pts[c0:c1].reshape(-1, 3)
        qv = np.ascontiguousarray(
            compute_q(cfg, flat).reshape(c1 - c0, quad.n_points, 3), np.float64)
        trip.add(ls_all[c0:c1], ls_all[c0:c1],
                 kernels.b_form(wq[c0:c1], qv, Ns, Gs))
    return trip.tocsr()


def assemble_rhs(problem, vec_space, quad_points=None, f=None):
    """Load vector <f, xi_i>; ``f`` defaults to the configured volume load."""
    cfg = _config(problem)
    if f is None:
        f = getattr(cfg, "rhs", None)
    out = np.zeros(vec_space.n_dofs, np.complex128)
    if f is None:
        return out
    npts = int(quad_points) if quad_points else vec_space.degree + 3
    quad = Quadrature(npts, vec_space.mesh.dimension)
    Nv, _ = vec_space.tabulate(quad.points)
    pts, wq = vec_space.quad_points(quad)
    lv_all = _local_map(vec_space)
    nc = vec_space.mesh.num_cells
    for c0 in range(0, nc, _CHUNK):
        c1 = min(c0 + _CHUNK, nc)
        flat = pts[c0:c1].reshape(-1, 3)
        fv = np.asarray(f(flat), np.complex128).reshape(c1 - c0, quad.n_points, 3)
        loc = kernels.load_vector(wq[c0:c1], fv, Nv, vec_space.ncomp)
        lv = lv_all[c0:c1]
        keep = lv >= 0
        np.add.at(out, lv[keep], loc[keep])
    return out


def creg_matrices(vec_space, quad_points=None):
    """(DIV0, GRADFULL, MASS): unweighted div-div, componentwise H1
    seminorm, and mass matrices used by the regularity-constant estimator."""
    npts = int(quad_points) if quad_points else vec_space.degree + 3
    quad = Quadrature(npts, vec_space.mesh.dimension)
    Nv, Gv_ref = vec_space.tabulate(quad.points)
    _, wq = vec_space.quad_points(quad)
    _, hs = vec_space.cell_geometry()
    lv_all = _local_map(vec_space)
    n = vec_space.n_dofs
    t0 = _Triplets((n, n))
    t1 = _Triplets((n, n))
    t2 = _Triplets((n, n))
    nc = vec_space.mesh.num_cells
    for c0 in range(0, nc, _CHUNK):
        c1 = min(c0 + _CHUNK, nc)
        w = wq[c0:c1]
        G = Gv_ref[None, :, :, :] / hs[c0:c1][:, None, None, :]
        ones = np.ones_like(w)
        lv = lv_all[c0:c1]
        t0.add(lv, lv, kernels.div_div(w, ones, G))
        t1.add(lv, lv, kernels.gradgrad_diag(w, G))
        t2.add(lv, lv, kernels.vector_mass(w, ones, Nv, vec_space.ncomp))
    return t0.tocsr(), t1.tocsr(), t2.tocsr()


def factorized_principal(problem, vec_space, quad_points=None):
    """<c^2 rho (div + q.) xi_j, (div + q.) xi_i> with q = grad(p)/(c^2 rho).

    With no flow the full vector form equals this factorized principal part
    minus the zeroth-order mass <Lambda xi, xi'>; the cross terms reproduce
    the pressure couplings exactly and the q-quadratic term absorbs the
    rank-one part of Lambda.
    """
    cfg = _config(problem)
    npts = int(quad_points) if quad_points else vec_space.degree + 3
    quad = Quadrature(npts, vec_space.mesh.dimension)
    Nv, Gv_ref = vec_space.tabulate(quad.points)
    pts, wq = vec_space.quad_points(quad)
    _, hs = vec_space.cell_geometry()
    lv_all = _local_map(vec_space)
    trip = _Triplets((vec_space.n_dofs, vec_space.n_dofs))
    nc = vec_space.mesh.num_cells
    for c0 in range(0, nc, _CHUNK):
        c1 = min(c0 + _CHUNK, nc)
        nch = c1 - c0
        w = wq[c0:c1]
        G = Gv_ref[None, :, :, :] / hs[c0:c1][:, None, None, :]
        flat = pts[c0:c1].reshape(-1, 3)
        rho = cfg.rho(flat).reshape(nch, quad.n_points)
        cs = cfg.c(flat).reshape(nch, quad.n_points)
        qv = np.ascontiguousarray(
            compute_q(cfg, flat).reshape(nch, quad.n_points, 3), np.float64)
        trip.add(lv_all[c0:c1], lv_all[c0:c1],
                 kernels.weighted_divq(w, cs * cs * rho, qv, Nv, G))
    return trip.tocsr()


def lambda_mass(problem, vec_space, quad_points=None):
    """Zeroth-order mass <Lambda xi_j, xi_i> with the full symbol Lambda."""
    cfg = _config(problem)
    npts = int(quad_points) if quad_points else vec_space.degree + 3
    quad = Quadrature(npts, vec_space.mesh.dimension)
    Nv, _ = vec_space.tabulate(quad.points)
    pts, wq = vec_space.quad_points(quad)
    lv_all = _local_map(vec_space)
    trip = _Triplets((vec_space.n_dofs, vec_space.n_dofs))
    nc = vec_space.mesh.num_cells
    for c0 in range(0, nc, _CHUNK):
        c1 = min(c0 + _CHUNK, nc)
        nch = c1 - c0
        flat = pts[c0:c1].reshape(-1, 3)
        lam = compute_lambda(cfg, flat).reshape(nch, quad.n_points, 3, 3)
        trip.add(lv_all[c0:c1], lv_all[c0:c1],
                 kernels.matrix_mass(wq[c0:c1], lam, Nv, vec_space.ncomp))
    return trip.tocsr()


def export_blocks(blocks, directory):
    """Write every block in Matrix Market format plus a manifest.

    Returns the manifest dict; the manifest JSON (canonical bytes) lists
    file names, shapes and nonzero counts for downstream tooling.
    """
    import os

    os.makedirs(directory, exist_ok=True)
    entries = {}
    for name in _BLOCK_NAMES:
        mat = getattr(blocks, name)
        fname = name + ".mtx"
        scipy.io.mmwrite(os.path.join(directory, fname), mat)
        entries[name] = {"file": fname, "shape": list(mat.shape),
                         "nnz": int(mat.nnz)}
    manifest = {
        "schema": 1,
        "omega": blocks.omega,
        "vector_dofs": int(blocks.vec_space.n_dofs),
        "scalar_dofs": int(blocks.scalar_space.n_dofs),
        "gravity_dofs": int(blocks.scalar_dirichlet_space.n_dofs),
        "blocks": entries,
    }
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        fh.write(canonical_json(manifest))
    return manifest
