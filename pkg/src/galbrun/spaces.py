"""Tensor-product Lagrange finite element spaces on interval/rectangle meshes.

Degrees 1 and 2 are supported.  Vector spaces carry one unknown per mesh
dimension per node; the essential constraint n.xi = 0 on axis-aligned
boundaries is a per-node zeroing of the normal component (both components at
corners).  Scalar spaces are unconstrained by default, with an optional
homogeneous Dirichlet variant used for the truncated gravity problem.
"""

import numpy as np
import scipy.sparse as sp

from .errors import ConstraintViolation, UnsupportedDegree, DimensionMismatch
from .fields import _as_points


def eval_basis_1d(degree, t):
    """Reference Lagrange basis values on [0, 1] at points t: (nt, degree+1)."""
    t = np.asarray(t, dtype=float)
    if degree == 1:
        return np.stack([1.0 - t, t], axis=-1)
    if degree == 2:
        return np.stack([(1.0 - t) * (1.0 - 2.0 * t),
                         4.0 * t * (1.0 - t),
                         t * (2.0 * t - 1.0)], axis=-1)
    raise UnsupportedDegree("degree must be 1 or 2, got %r" % degree)


def eval_dbasis_1d(degree, t):
    """Reference basis derivatives on [0, 1] at points t: (nt, degree+1)."""
    t = np.asarray(t, dtype=float)
    if degree == 1:
        one = np.ones_like(t)
        return np.stack([-one, one], axis=-1)
    if degree == 2:
        return np.stack([4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0], axis=-1)
    raise UnsupportedDegree("degree must be 1 or 2, got %r" % degree)


class Quadrature:
    """Tensor Gauss-Legendre rule on the reference cell [0, 1]^dim.

    ``exactness`` is the per-axis polynomial degree integrated exactly
    (2 * npts - 1 for Gauss-Legendre).
    """

    def __init__(self, npts, dim):
        x, w = np.polynomial.legendre.leggauss(npts)
        x = 0.5 * (x + 1.0)  # map [-1, 1] -> [0, 1]
        w = 0.5 * w
        self.npts_per_axis = npts
        self.dim = dim
        self.exactness = 2 * npts - 1
        if dim == 1:
            self.points = x[:, None]
            self.weights = w
        else:
            X, Y = np.meshgrid(x, x, indexing="xy")
            self.points = np.column_stack([X.ravel(), Y.ravel()])
            self.weights = np.outer(w, w).ravel()

    @property
    def n_points(self):
        return len(self.weights)


class FESpace:
    """A conforming Lagrange space on a :class:`Mesh`.

    Parameters
    ----------
    mesh : Mesh
    degree : int
        1 or 2.
    kind : str
        ``"scalar"``, ``"vector-with-normal-constraint"``, or
        ``"vector-free"``.
    dirichlet : bool
        Scalar spaces only: constrain every boundary node (used for the
        truncated gravity potential).
    """

    def __init__(self, mesh, degree, kind, dirichlet=False):
        if degree not in (1, 2):
            raise UnsupportedDegree("degree must be 1 or 2, got %r" % degree)
        if kind not in ("scalar", "vector-with-normal-constraint", "vector-free"):
            raise ValueError("unknown space kind %r" % kind)
        if dirichlet and kind != "scalar":
            raise ValueError("dirichlet flag applies to scalar spaces only")
        self.mesh = mesh
        self.degree = degree
        self.kind = kind
        self.dirichlet = dirichlet
        self.ncomp = 1 if kind == "scalar" else mesh.dimension
        self._build_nodes()
        self._build_dofmap()

    # -- node layout ---------------------------------------------------------

    def _build_nodes(self):
        k = self.degree
        axes_nodes = []
        for a in self.mesh.axes:
            n = len(a) - 1
            nodes = np.empty(k * n + 1)
            nodes[::k] = a
            if k == 2:
                nodes[1::2] = 0.5 * (a[:-1] + a[1:])
            axes_nodes.append(nodes)
        self.node_axes = tuple(axes_nodes)
        if self.mesh.dimension == 1:
            self.node_coords = axes_nodes[0][:, None].copy()
        else:
            X, Y = np.meshgrid(axes_nodes[0], axes_nodes[1], indexing="xy")
            self.node_coords = np.column_stack([X.ravel(), Y.ravel()])
        self.n_nodes = len(self.node_coords)

        # cell -> local scalar node connectivity, lexicographic within cell
        dim = self.mesh.dimension
        counts = self.mesh.cell_counts
        if dim == 1:
            nx = counts[0]
            ci = np.arange(nx)
            self.cell_nodes = ci[:, None] * k + np.arange(k + 1)[None, :]
        else:
            nx, ny = counts
            nnx = k * nx + 1
            loc = np.array([(a, b) for b in range(k + 1) for a in range(k + 1)])
            cells_ij = np.array([(i, j) for j in range(ny) for i in range(nx)])
            self.cell_nodes = ((cells_ij[:, 1][:, None] * k + loc[:, 1][None, :]) * nnx
                               + cells_ij[:, 0][:, None] * k + loc[:, 0][None, :])
        self.nloc = (k + 1) ** dim

    def _boundary_sides_of_nodes(self):
        """For each node, the set of boundary sides it lies on (may be empty)."""
        dim = self.mesh.dimension
        k = self.degree
        sides = [[] for _ in range(self.n_nodes)]
        if dim == 1:
            sides[0].append("left")
            sides[-1].append("right")
            return sides
        nnx = len(self.node_axes[0])
        nny = len(self.node_axes[1])
        for j in range(nny):
            for i in (0, nnx - 1):
                sides[j * nnx + i].append("left" if i == 0 else "right")
        for i in range(nnx):
            for j in (0, nny - 1):
                sides[j * nnx + i].append("bottom" if j == 0 else "top")
        return sides

    def _build_dofmap(self):
        dim = self.mesh.dimension
        constrained = np.zeros((self.n_nodes, self.ncomp), dtype=bool)
        side_normal_comp = {"left": 0, "right": 0, "bottom": 1, "top": 1}
        if self.kind == "vector-with-normal-constraint":
            for node, sides in enumerate(self._boundary_sides_of_nodes()):
                for s in sides:
                    constrained[node, side_normal_comp[s]] = True
        elif self.kind == "scalar" and self.dirichlet:
            for node, sides in enumerate(self._boundary_sides_of_nodes()):
                if sides:
                    constrained[node, 0] = True
        self.constrained = constrained
        dofmap = -np.ones((self.n_nodes, self.ncomp), dtype=int)
        idx = 0
        for node in range(self.n_nodes):
            for c in range(self.ncomp):
                if not constrained[node, c]:
                    dofmap[node, c] = idx
                    idx += 1
        self.dofmap = dofmap
        self.n_dofs = idx

    # -- geometry and tabulation ----------------------------------------------

    def node_coords3(self):
        return _as_points(self.node_coords)

    def cell_geometry(self):
        """Per-cell origin and extent arrays, shapes (nc, dim)."""
        origins = []
        hs = []
        for a in self.mesh.axes:
            origins.append(a[:-1])
            hs.append(np.diff(a))
        if self.mesh.dimension == 1:
            return origins[0][:, None], hs[0][:, None]
        nx, ny = self.mesh.cell_counts
        ox = np.tile(origins[0], ny)
        oy = np.repeat(origins[1], nx)
        hx = np.tile(hs[0], ny)
        hy = np.repeat(hs[1], nx)
        return np.column_stack([ox, oy]), np.column_stack([hx, hy])

    def tabulate(self, ref_points):
        """Reference basis values/gradients at reference points.

        Returns (vals, grads) with shapes (nq, nloc) and (nq, nloc, dim).
        """
        ref_points = np.atleast_2d(ref_points)
        k = self.degree
        dim = self.mesh.dimension
        if dim == 1:
            vals = eval_basis_1d(k, ref_points[:, 0])
            grads = eval_dbasis_1d(k, ref_points[:, 0])[:, :, None]
            return vals, grads
        vx = eval_basis_1d(k, ref_points[:, 0])
        vy = eval_basis_1d(k, ref_points[:, 1])
        dx = eval_dbasis_1d(k, ref_points[:, 0])
        dy = eval_dbasis_1d(k, ref_points[:, 1])
        nq = len(ref_points)
        nloc = (k + 1) ** 2
        vals = np.empty((nq, nloc))
        grads = np.empty((nq, nloc, 2))
        m = 0
        for b in range(k + 1):
            for a in range(k + 1):
                vals[:, m] = vx[:, a] * vy[:, b]
                grads[:, m, 0] = dx[:, a] * vy[:, b]
                grads[:, m, 1] = vx[:, a] * dy[:, b]
                m += 1
        return vals, grads

    def quad_points(self, quad):
        """Physical quadrature points/weights over all cells.

        Returns (pts, w) with pts shape (nc, nq, 3) (zero-padded) and w shape
        (nc, nq) including the cell Jacobian.
        """
        origins, hs = self.cell_geometry()
        ref = quad.points
        nc = len(origins)
        nq = quad.n_points
        dim = self.mesh.dimension
        pts = np.zeros((nc, nq, 3))
        for d in range(dim):
            pts[:, :, d] = origins[:, None, d] + hs[:, None, d] * ref[None, :, d]
        jac = np.prod(hs, axis=1)
        w = quad.weights[None, :] * jac[:, None]
        return pts, w

    # -- dof embedding ---------------------------------------------------------

    def embed(self, coefs):
        """Free-dof vector -> full (n_nodes * ncomp,) array (constrained = 0)."""
        full = np.zeros(self.n_nodes * self.ncomp, dtype=complex)
        mask = self.dofmap.ravel() >= 0
        full[mask] = np.asarray(coefs)[self.dofmap.ravel()[mask]]
        return full

    def restrict(self, full):
        """Full node-component array -> free-dof vector."""
        full = np.asarray(full).ravel()
        mask = self.dofmap.ravel() >= 0
        out = np.zeros(self.n_dofs, dtype=full.dtype)
        out[self.dofmap.ravel()[mask]] = full[mask]
        return out

    def __repr__(self):
        return ("FESpace(%s, degree=%d, dofs=%d, mesh %sD level %d)"
                % (self.kind, self.degree, self.n_dofs,
                   self.mesh.dimension, self.mesh.level))


def build_space(mesh, degree, kind, dirichlet=False):
    """Build a finite element space; see :class:`FESpace`."""
    return FESpace(mesh, degree, kind, dirichlet=dirichlet)


def interpolate(field, space):
    """Nodal interpolation of a field into a space (free-dof vector).

    Exact for polynomials up to the space degree.  Raises
    ConstraintViolation if the field violates a constrained dof (normal
    component at a constrained boundary node, or Dirichlet value) beyond
    1e-12 relative to the field's nodal magnitude.
    """
    pts = space.node_coords3()
    if space.kind == "scalar":
        vals = np.asarray(field(pts), dtype=float)[:, None]
    else:
        v3 = np.asarray(field(pts), dtype=float)
        vals = v3[:, : space.ncomp]
    scale = max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)
    bad = space.constrained & (np.abs(vals) > 1e-12 * scale)
    if np.any(bad):
        node, comp = np.argwhere(bad)[0]
        raise ConstraintViolation(
            "field violates constrained dof (node %d, component %d): %r"
            % (node, comp, vals[node, comp]),
            point=space.node_coords[node], value=vals[node, comp])
    out = np.zeros(space.n_dofs, dtype=complex)
    sel = space.dofmap >= 0
    out[space.dofmap[sel]] = vals[sel]
    return out


def _prolongation_1d(coarse_nodes, fine_nodes, coarse_axis, degree):
    """1D prolongation matrix: coarse basis evaluated at fine node positions."""
    n_cells = len(coarse_axis) - 1
    lo = coarse_axis[0]
    cell = np.clip(np.searchsorted(coarse_axis, fine_nodes, side="right") - 1,
                   0, n_cells - 1)
    h = coarse_axis[cell + 1] - coarse_axis[cell]
    t = (fine_nodes - coarse_axis[cell]) / h
    vals = eval_basis_1d(degree, t)  # (nf, degree+1)
    rows = np.repeat(np.arange(len(fine_nodes)), degree + 1)
    cols = (cell[:, None] * degree + np.arange(degree + 1)[None, :]).ravel()
    P = sp.coo_matrix((vals.ravel(), (rows, cols)),
                      shape=(len(fine_nodes), len(coarse_nodes)))
    P.sum_duplicates()
    data = P.data.copy()
    data[np.abs(data) < 1e-14] = 0.0
    P.data = data
    P.eliminate_zeros()
    return P.tocsr()


def prolongation(coarse, fine):
    """Sparse free-dof prolongation between nested spaces of equal degree.

    Exact for nested tensor meshes: the coarse function is re-expressed in
    the fine space without change.  Requires matching kind and degree.
    """
    if coarse.kind != fine.kind or coarse.degree != fine.degree:
        raise DimensionMismatch("prolongation needs matching kind and degree")
    if coarse.mesh.dimension != fine.mesh.dimension:
        raise DimensionMismatch("prolongation needs matching dimension")
    mats = []
    for d in range(coarse.mesh.dimension):
        mats.append(_prolongation_1d(coarse.node_axes[d], fine.node_axes[d],
                                     coarse.mesh.axes[d], coarse.degree))
    P_nodes = mats[0] if len(mats) == 1 else sp.kron(mats[1], mats[0], format="csr")
    if coarse.ncomp > 1:
        P_full = sp.kron(P_nodes, sp.identity(coarse.ncomp, format="csr"),
                         format="csr")
    else:
        P_full = P_nodes
    fine_free = fine.dofmap.ravel() >= 0
    coarse_free = coarse.dofmap.ravel() >= 0
    P_free = P_full[np.flatnonzero(fine_free)][:, np.flatnonzero(coarse_free)]
    # reorder rows/cols into free-dof numbering
    rperm = np.argsort(fine.dofmap.ravel()[fine_free])
    cperm = np.argsort(coarse.dofmap.ravel()[coarse_free])
    return P_free[rperm][:, cperm].tocsr()
