"""Problem configuration: coefficient fields, declared bounds, validation.

All pointwise algebra is done in 3-vector/3x3 form regardless of the mesh
dimension; unused trailing coordinates and components are zero.  The
background flow b must be tangential on the boundary, and the declared
analytic data (gradients, Hessians, div(rho*b)) must be mutually consistent;
``validate_config`` enforces both by sampling before any assembly happens.
"""

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import (
    BoundaryFlowViolation,
    ConstraintViolation,
    InconsistentDerivative,
    InvalidRange,
)
from .fields import ScalarField, VectorField, _as_points
from .spaces import Quadrature, build_space

_DEFAULT_FLAGS = {"c_w1inf": False, "rho_w1inf": False, "domain_class": "convex"}


def cross_matrix(v):
    """Matrix CR with CR @ u == v x u."""
    v = np.asarray(v, dtype=float)
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


@dataclass
class ProblemConfig:
    """Coefficients and parameters of one damped time-harmonic flow problem.

    ``bounds`` maps "rho", "c", "gamma" to declared (lo, hi) pairs; these are
    trusted by the admissibility checks after validation confirms the sampled
    fields stay inside them.  ``flags`` may set "c_w1inf", "rho_w1inf"
    (declared W^{1,inf} regularity of c^2*rho and rho) and "domain_class"
    ("convex" or "c11").
    """

    omega: float
    angvel: np.ndarray
    grav_const: float
    rho: ScalarField
    c: ScalarField
    gamma: ScalarField
    p: ScalarField
    phi: ScalarField
    b: VectorField
    divrhob: ScalarField
    bounds: dict
    flags: dict = dataclass_field(default_factory=dict)
    rhs: VectorField = None
    safety: float = 1.0

    def __post_init__(self):
        self.omega = float(self.omega)
        self.angvel = np.asarray(self.angvel, dtype=float).reshape(3)
        self.grav_const = float(self.grav_const)
        merged = dict(_DEFAULT_FLAGS)
        merged.update(self.flags or {})
        self.flags = merged

    def with_omega(self, omega):
        """Copy of this configuration at a different frequency."""
        return ProblemConfig(
            omega=omega, angvel=self.angvel, grav_const=self.grav_const,
            rho=self.rho, c=self.c, gamma=self.gamma, p=self.p, phi=self.phi,
            b=self.b, divrhob=self.divrhob, bounds=self.bounds,
            flags=dict(self.flags), rhs=self.rhs, safety=self.safety)


def compute_q(config, pts):
    """The reduced pressure-gradient vector q = c^-2 rho^-1 grad p.

    Accepts a single point (shape (3,) or shorter) or a batch (n, d); returns
    (3,) or (n, 3) correspondingly.
    """
    single = np.asarray(pts).ndim == 1
    pts = _as_points(pts)
    c = config.c(pts)
    rho = config.rho(pts)
    gp = config.p.grad(pts)
    out = gp / (c * c * rho)[:, None]
    return out[0] if single else out


def compute_matkl(config, pts):
    """Zeroth-order coefficient matrix M(x), complex 3x3 (batched: (n, 3, 3)).

    M = i*omega*gamma*rho*I - Hess(p) + rho*Hess(phi)
        + c^-2 rho^-1 grad(p) grad(p)^T.
    """
    single = np.asarray(pts).ndim == 1
    pts = _as_points(pts)
    rho = config.rho(pts)
    gamma = config.gamma(pts)
    c = config.c(pts)
    gp = config.p.grad(pts)
    hp = config.p.hess_at(pts)
    hphi = config.phi.hess_at(pts)
    n = pts.shape[0]
    out = np.zeros((n, 3, 3), dtype=complex)
    eye = np.eye(3)
    out += (1j * config.omega * gamma * rho)[:, None, None] * eye
    out -= hp
    out += rho[:, None, None] * hphi
    out += gp[:, :, None] * gp[:, None, :] / (c * c * rho)[:, None, None]
    return out[0] if single else out


def compute_lambda(config, pts):
    """Frozen-coefficient symbol Lambda(x) = rho K^H K + M(x), complex 3x3.

    K = omega*I + i*cross(angvel) is the rotation-shifted frequency operator
    with the advection term dropped (its size enters through the flow bounds,
    not through Lambda).  Batched like :func:`compute_matkl`.
    """
    single = np.asarray(pts).ndim == 1
    pts = _as_points(pts)
    K = config.omega * np.eye(3) + 1j * cross_matrix(config.angvel)
    KhK = K.conj().T @ K
    rho = config.rho(pts)
    out = rho[:, None, None] * KhK[None, :, :] + compute_matkl(config, pts)
    return out[0] if single else out


class ValidatedProblem:
    """A configuration bound to a mesh after all precondition checks passed.

    Carries the sampled sups used by the admissibility conditions:
    ``mach_inf`` = sup |b|/c and ``bnorm_inf`` = sup |b| over the volume
    sample points, each multiplied by the configured safety factor.
    """

    def __init__(self, config, mesh, sample_points, mach_inf, bnorm_inf):
        self.config = config
        self.mesh = mesh
        self.sample_points = sample_points
        self.mach_inf = mach_inf
        self.bnorm_inf = bnorm_inf

    def __getattr__(self, name):
        if name.startswith("_"):
            raise AttributeError(name)
        return getattr(self.config, name)

    def __repr__(self):
        return ("ValidatedProblem(omega=%g, mesh %sD level %d, mach_inf=%.3g)"
                % (self.config.omega, self.mesh.dimension, self.mesh.level,
                   self.mach_inf))


def _fd_gradient(f, pts, h):
    """Central-difference gradient of a scalar callable, (n, 3)."""
    out = np.zeros((pts.shape[0], 3))
    for d in range(3):
        if h[d] == 0.0:
            continue
        step = np.zeros(3)
        step[d] = h[d]
        out[:, d] = (f(pts + step) - f(pts - step)) / (2.0 * h[d])
    return out


def _check_bounds(name, values, pts, lo, hi, tol):
    below = values < lo - tol
    above = values > hi + tol
    if np.any(below | above):
        worst = int(np.argmax(np.where(below, lo - values, values - hi)))
        raise ConstraintViolation(
            "%s leaves its declared bounds [%g, %g]: value %g at %s"
            % (name, lo, hi, values[worst], pts[worst]),
            field=name, point=pts[worst], value=float(values[worst]))


def validate_config(config, mesh, quad_points_per_axis=4):
    """Check a configuration against a mesh and return a ValidatedProblem.

    Raises InvalidRange for malformed bounds, ConstraintViolation when a
    sampled field leaves its declared bounds, BoundaryFlowViolation when
    n.b != 0 on a boundary facet, and InconsistentDerivative when a declared
    gradient/Hessian or div(rho*b) disagrees with finite differences of the
    underlying values.
    """
    for name in ("rho", "c", "gamma"):
        if name not in config.bounds:
            raise InvalidRange("missing declared bounds for %r" % name)
        lo, hi = config.bounds[name]
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
            raise InvalidRange("bad bounds for %r: (%r, %r)" % (name, lo, hi))
    if config.bounds["rho"][0] <= 0.0:
        raise InvalidRange("rho lower bound must be positive")
    if config.bounds["c"][0] <= 0.0:
        raise InvalidRange("c lower bound must be positive")
    if config.bounds["gamma"][0] < 0.0:
        raise InvalidRange("gamma lower bound must be nonnegative")
    if config.flags.get("domain_class") not in ("convex", "c11"):
        raise InvalidRange("domain_class must be 'convex' or 'c11' "
                           "(C^{1,1} or convex piecewise-C^{1,1})")
    if not (config.safety >= 1.0):
        raise InvalidRange("safety factor must be >= 1")

    dim = mesh.dimension
    helper = build_space(mesh, 1, "scalar")
    quad = Quadrature(quad_points_per_axis, dim)
    pts_cells, _ = helper.quad_points(quad)
    pts = pts_cells.reshape(-1, 3)

    rho = config.rho(pts)
    c = config.c(pts)
    gamma = config.gamma(pts)
    tol = 1e-9
    _check_bounds("rho", rho, pts, *config.bounds["rho"], tol=tol)
    _check_bounds("c", c, pts, *config.bounds["c"], tol=tol)
    _check_bounds("gamma", gamma, pts, *config.bounds["gamma"], tol=tol)

    bvals = config.b(pts)
    bnorm = np.linalg.norm(bvals, axis=1)
    bnorm_inf = float(np.max(bnorm)) * config.safety
    mach_inf = float(np.max(bnorm / c)) * config.safety

    # tangential flow on the boundary
    line = Quadrature(quad_points_per_axis, 1)
    for facet in mesh.boundary_facets:
        vids = facet["vertices"]
        if len(vids) == 1:
            fpts = mesh.vertices[list(vids)]
        else:
            v0 = mesh.vertices[vids[0]]
            v1 = mesh.vertices[vids[1]]
            t = np.concatenate([[0.0], line.points[:, 0], [1.0]])
            fpts = v0[None, :] + t[:, None] * (v1 - v0)[None, :]
        normal3 = np.zeros(3)
        normal3[: dim] = facet["normal"][: dim]
        flow = config.b(_as_points(fpts)) @ normal3
        worst = int(np.argmax(np.abs(flow)))
        if abs(flow[worst]) > 1e-12 * bnorm_inf:
            raise BoundaryFlowViolation(
                "flow crosses the boundary: n.b = %g" % flow[worst],
                point=fpts[worst], normal_flow=float(flow[worst]))

    # declared derivatives vs finite differences, away from any bbox clamping
    h = np.zeros(3)
    h[:dim] = 1e-5
    margin = 2.0 * np.max(h)
    inside = np.ones(len(pts), dtype=bool)
    for d, (lo, hi) in enumerate(mesh.ranges):
        inside &= (pts[:, d] > lo + margin) & (pts[:, d] < hi - margin)
    fd_pts = pts[inside] if np.any(inside) else pts[:1]

    active = h != 0.0  # axes the mesh spans; others are unobservable
    for name in ("p", "phi"):
        fld = getattr(config, name)
        declared = fld.grad(fd_pts)
        fd = _fd_gradient(fld, fd_pts, h)
        dev = np.max(np.abs((fd - declared)[:, active]))
        scale = max(1.0, float(np.max(np.abs(declared))))
        if dev > 1e-5 * scale:
            raise InconsistentDerivative(
                "declared gradient of %s disagrees with finite differences "
                "(max deviation %g)" % (name, dev), field=name)
        hess = fld.hess_at(fd_pts)
        for col in range(3):
            comp = fld.grad.components[col]
            fd_col = _fd_gradient(comp, fd_pts, h)
            dev = np.max(np.abs(fd_col[:, active] - hess[:, active, col]))
            scale = max(1.0, float(np.max(np.abs(hess))))
            if dev > 1e-5 * scale:
                raise InconsistentDerivative(
                    "declared Hessian of %s disagrees with finite differences "
                    "of its gradient (max deviation %g)" % (name, dev),
                    field=name)

    def rho_b_comp(d):
        return lambda q: config.rho(q) * config.b(q)[:, d]

    fd_div = np.zeros(len(fd_pts))
    for d in range(3):
        if h[d] == 0.0:
            continue
        step = np.zeros(3)
        step[d] = h[d]
        f = rho_b_comp(d)
        fd_div += (f(fd_pts + step) - f(fd_pts - step)) / (2.0 * h[d])
    declared_div = config.divrhob(fd_pts)
    scale = max(1.0, float(np.max(np.abs(declared_div))),
                float(np.max(np.abs(fd_div))))
    if np.max(np.abs(fd_div - declared_div)) > 1e-5 * scale:
        raise InconsistentDerivative(
            "declared div(rho*b) disagrees with finite differences "
            "(max deviation %g)" % np.max(np.abs(fd_div - declared_div)),
            field="divrhob")

    return ValidatedProblem(config, mesh, pts, mach_inf, bnorm_inf)
