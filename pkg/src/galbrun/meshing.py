"""Uniform interval and axis-aligned rectangle meshes.

Meshes are tensor products of per-axis vertex arrays.  Refinement inserts
exact midpoints per axis, so coarse vertex coordinates reappear bitwise in
every refinement (nested meshes, exact prolongation later on).
"""

import io

import numpy as np

from .errors import InvalidRange


class Mesh:
    """A uniform 1D interval or 2D axis-aligned rectangle mesh.

    Attributes
    ----------
    dimension : int
        1 or 2.
    axes : tuple of ndarray
        Per-axis vertex coordinates (sorted, nested under refinement).
    vertices : ndarray, shape (nv, dim)
        Vertex coordinates, lexicographic (x fastest).
    cells : ndarray of int
        Vertex index tuples; (nc, 2) segments or (nc, 4) quadrilaterals with
        local order (i,j), (i+1,j), (i,j+1), (i+1,j+1).
    boundary_facets : list of dict
        Each with ``vertices`` (index tuple), ``normal`` (outward unit,
        axis-aligned), and ``side`` tag.
    level : int
        Refinement level (0 for a freshly built mesh).
    """

    def __init__(self, axes, level=0):
        self.axes = tuple(np.asarray(a, dtype=float) for a in axes)
        self.dimension = len(self.axes)
        self.level = level
        self._build()

    def _build(self):
        if self.dimension == 1:
            xs, = self.axes
            nx = len(xs) - 1
            self.vertices = xs[:, None].copy()
            self.cells = np.column_stack([np.arange(nx), np.arange(1, nx + 1)])
            self.boundary_facets = [
                {"vertices": (0,), "normal": np.array([-1.0]), "side": "left"},
                {"vertices": (nx,), "normal": np.array([1.0]), "side": "right"},
            ]
        else:
            xs, ys = self.axes
            nx, ny = len(xs) - 1, len(ys) - 1
            X, Y = np.meshgrid(xs, ys, indexing="xy")
            self.vertices = np.column_stack([X.ravel(), Y.ravel()])

            def vid(i, j):
                return j * (nx + 1) + i

            cells = np.empty((nx * ny, 4), dtype=int)
            k = 0
            for j in range(ny):
                for i in range(nx):
                    cells[k] = (vid(i, j), vid(i + 1, j),
                                vid(i, j + 1), vid(i + 1, j + 1))
                    k += 1
            self.cells = cells
            facets = []
            for j in range(ny):  # left / right edges
                facets.append({"vertices": (vid(0, j), vid(0, j + 1)),
                               "normal": np.array([-1.0, 0.0]), "side": "left"})
                facets.append({"vertices": (vid(nx, j), vid(nx, j + 1)),
                               "normal": np.array([1.0, 0.0]), "side": "right"})
            for i in range(nx):  # bottom / top edges
                facets.append({"vertices": (vid(i, 0), vid(i + 1, 0)),
                               "normal": np.array([0.0, -1.0]), "side": "bottom"})
                facets.append({"vertices": (vid(i, ny), vid(i + 1, ny)),
                               "normal": np.array([0.0, 1.0]), "side": "top"})
            self.boundary_facets = facets

    @property
    def num_cells(self):
        return len(self.cells)

    @property
    def cell_counts(self):
        return tuple(len(a) - 1 for a in self.axes)

    @property
    def ranges(self):
        return tuple((a[0], a[-1]) for a in self.axes)

    def cell_measures(self):
        hs = [np.diff(a) for a in self.axes]
        if self.dimension == 1:
            return hs[0].copy()
        return np.multiply.outer(hs[1], hs[0]).ravel()

    def domain_measure(self):
        out = 1.0
        for a in self.axes:
            out *= a[-1] - a[0]
        return out

    def refine(self):
        """Uniform refinement by exact per-axis midpoint insertion."""
        new_axes = []
        for a in self.axes:
            fine = np.empty(2 * len(a) - 1)
            fine[0::2] = a
            fine[1::2] = 0.5 * (a[:-1] + a[1:])
            new_axes.append(fine)
        return Mesh(new_axes, level=self.level + 1)

    def export_text(self):
        """Plain-text node/cell listing with a documented header."""
        buf = io.StringIO()
        buf.write("# mesh dimension=%d vertices=%d cells=%d level=%d\n"
                  % (self.dimension, len(self.vertices), len(self.cells),
                     self.level))
        buf.write("# vertex lines: id x [y]; cell lines: id v0 v1 [v2 v3]\n")
        for i, v in enumerate(self.vertices):
            buf.write("v %d %s\n" % (i, " ".join(repr(float(c)) for c in v)))
        for i, c in enumerate(self.cells):
            buf.write("c %d %s\n" % (i, " ".join(str(int(j)) for j in c)))
        return buf.getvalue()


def build_interval_mesh(a, b, n):
    """Uniform mesh of (a, b) with n cells.

    Boundary facets are the endpoints with outward normals -1 and +1.
    """
    if not (a < b):
        raise InvalidRange("need a < b, got [%r, %r]" % (a, b))
    if n < 1:
        raise InvalidRange("need at least one cell, got %d" % n)
    return Mesh((np.linspace(a, b, n + 1),))


def build_rect_mesh(xrange, yrange, nx, ny):
    """Uniform axis-aligned rectangle mesh with nx-by-ny quadrilaterals."""
    (xa, xb), (ya, yb) = xrange, yrange
    if not (xa < xb and ya < yb):
        raise InvalidRange("empty extent: x=%r y=%r" % (xrange, yrange))
    if nx < 1 or ny < 1:
        raise InvalidRange("need at least one cell per axis")
    return Mesh((np.linspace(xa, xb, nx + 1), np.linspace(ya, yb, ny + 1)))
