"""Numerical-range sector angles and sufficient well-posedness conditions.

The zeroth-order coefficient matrix M(x) of the vector equation is sectorial
when its numerical range W(M(x)) stays inside a sector of half-angle
pi/2 + theta around the positive real axis, uniformly in x.  ``sector_angle`` computes
sup |arg W(M)| for one matrix; ``compute_theta`` takes the max over sample
points and subtracts pi/2; ``check_admissibility`` evaluates the sufficient
flow-smallness conditions that this theta enters.

Every angle computation reduces to eigenvalue bounds of rotated Hermitian
parts: with H = (M + M^H)/2 and N = -i*(M - M^H)/2 (both Hermitian),

    Herm(e^{i phi} M) = cos(phi) * H - sin(phi) * N,

so support lines of W(M) in any direction come from lambda_min/lambda_max of
that pencil.  The batched path evaluates those bounds for 3x3 matrices in
closed form across all sample points at once.
"""

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import MissingCreg, PreconditionViolated
from .fields import _as_points
from .problem import compute_matkl

_TWO_PI = 2.0 * np.pi


def _split_parts(M):
    """Hermitian pair (H, N) with Herm(e^{i phi} M) = cos(phi) H - sin(phi) N."""
    Mh = np.conj(np.swapaxes(M, -1, -2))
    H = 0.5 * (M + Mh)
    N = -0.5j * (M - Mh)
    return H, N


def _wrap_angle(x):
    """Map to [-pi, pi)."""
    return (x + np.pi) % _TWO_PI - np.pi


def _herm3_bounds(A):
    """Analytic (lambda_min, lambda_max) of batched Hermitian 3x3 matrices.

    Trigonometric closed form; accuracy ~1e-13 relative to the spread, which
    is ample for the sub-slack feasibility tests it backs.
    """
    a00 = A[..., 0, 0].real
    a11 = A[..., 1, 1].real
    a22 = A[..., 2, 2].real
    a01 = A[..., 0, 1]
    a02 = A[..., 0, 2]
    a12 = A[..., 1, 2]
    p1 = (np.abs(a01) ** 2 + np.abs(a02) ** 2 + np.abs(a12) ** 2)
    q = (a00 + a11 + a22) / 3.0
    b00 = a00 - q
    b11 = a11 - q
    b22 = a22 - q
    p2 = b00 ** 2 + b11 ** 2 + b22 ** 2 + 2.0 * p1
    p = np.sqrt(np.maximum(p2, 0.0) / 6.0)
    safe = p > 0.0
    ps = np.where(safe, p, 1.0)
    c00 = b00 / ps
    c11 = b11 / ps
    c22 = b22 / ps
    c01 = a01 / ps
    c02 = a02 / ps
    c12 = a12 / ps
    # determinant of the shifted/scaled matrix C (real for Hermitian input)
    det = (c00 * (c11 * c22 - (np.abs(c12) ** 2))
           - (c01 * (np.conj(c01) * c22 - c02 * np.conj(c12))).real
           + (c02 * (np.conj(c01) * np.conj(c12) - c11 * np.conj(c02))).real)
    r = np.clip(det / 2.0, -1.0, 1.0)
    ang = np.arccos(r) / 3.0
    lmax = q + 2.0 * p * np.cos(ang)
    lmin = q + 2.0 * p * np.cos(ang + 2.0 * np.pi / 3.0)
    lmax = np.where(safe, lmax, q)
    lmin = np.where(safe, lmin, q)
    return lmin, lmax


def _rot_herm(H, N, phi):
    """cos(phi) H - sin(phi) N with per-matrix angles phi."""
    phi = np.asarray(phi, dtype=float)
    c = np.cos(phi)[..., None, None]
    s = np.sin(phi)[..., None, None]
    return c * H - s * N


def _lmin_lapack(A):
    return np.linalg.eigvalsh(A)[..., 0]


def _refine_min_scalar(fun, a, b, iters=80):
    """Ternary search of a 1D minimum inside [a, b]."""
    for _ in range(iters):
        m1 = a + (b - a) / 3.0
        m2 = b - (b - a) / 3.0
        if fun(m1) <= fun(m2):
            b = m2
        else:
            a = m1
    xm = 0.5 * (a + b)
    return xm, fun(xm)


def _bisect_sup_arg(H, N, slack, tol=1e-10):
    """Smallest t in [-pi/2, pi/2] with arg(w) <= t for all w in W(M).

    Valid when W(M) lies in the closed right half-plane (up to slack); the
    condition is lambda_min(Herm(e^{i(pi/2 - t)} M)) >= -slack, monotone in t.
    """

    def feasible(t):
        psi = 0.5 * np.pi - t
        C = np.cos(psi) * H - np.sin(psi) * N
        return np.linalg.eigvalsh(C)[0] >= -slack

    if feasible(-0.5 * np.pi):
        return -0.5 * np.pi
    lo, hi = -0.5 * np.pi, 0.5 * np.pi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def sector_angle(M, tol=1e-10):
    """sup |arg w| over the numerical range W(M), a value in [0, pi].

    The zero matrix gives 0.  Arguments are taken in (-pi, pi]; if W(M)
    surrounds the origin or touches the negative real axis the result is pi.
    """
    M = np.asarray(M, dtype=complex)
    H, N = _split_parts(M)
    ev_h = np.linalg.eigvalsh(H)
    ev_n = np.linalg.eigvalsh(N)
    nrm = max(np.max(np.abs(ev_h)), 1e-300) + np.max(np.abs(ev_n))
    if np.max(np.abs(ev_h)) == 0.0 and np.max(np.abs(ev_n)) == 0.0:
        return 0.0
    slack = 1e-13 * nrm

    if ev_h[0] >= -slack:
        # W(M) is already in the closed right half-plane
        def sector_ok(alpha):
            psi = 0.5 * np.pi - alpha
            for sgn in (1.0, -1.0):
                C = np.cos(sgn * psi) * H - np.sin(sgn * psi) * N
                if np.linalg.eigvalsh(C)[0] < -slack:
                    return False
            return True

        if sector_ok(0.0):
            return 0.0
        lo, hi = 0.0, 0.5 * np.pi
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if sector_ok(mid):
                hi = mid
            else:
                lo = mid
        return hi

    # Support-line scan: find a direction in which W(M) is (nearly) behind
    # the origin, i.e. a minimizer of h(phi) = lambda_max(Herm(e^{i phi} M)).
    def h(phi):
        C = np.cos(phi) * H - np.sin(phi) * N
        return np.linalg.eigvalsh(C)[-1]

    phis = np.linspace(-np.pi, np.pi, 2048, endpoint=False)
    hvals = np.array([h(p) for p in phis])
    i0 = int(np.argmin(hvals))
    step = phis[1] - phis[0]
    phi0, h0 = _refine_min_scalar(h, phis[i0] - step, phis[i0] + step)
    if hvals[i0] < h0:
        phi0, h0 = phis[i0], hvals[i0]
    if h0 > slack:
        # every support line keeps positive clearance: the origin is interior
        return np.pi
    c = phi0 - np.pi
    Hr = np.cos(c) * H - np.sin(c) * N
    Nr = np.sin(c) * H + np.cos(c) * N
    a_plus = _bisect_sup_arg(Hr, Nr, slack, tol)
    a_minus = -_bisect_sup_arg(np.conj(Hr), -np.conj(Nr), slack, tol)
    lo_w = _wrap_angle(a_minus - c)
    hi_w = _wrap_angle(a_plus - c)
    if hi_w < lo_w - 1e-9:
        return np.pi
    return min(np.pi, max(abs(lo_w), abs(hi_w)))


# -- batched machinery --------------------------------------------------------


def _batched_bisect_sup_arg(H, N, slack, iters=60):
    """Vectorized version of :func:`_bisect_sup_arg` over stacked matrices."""
    m = H.shape[0]
    lo = np.full(m, -0.5 * np.pi)
    hi = np.full(m, 0.5 * np.pi)
    lmin, _ = _herm3_bounds(_rot_herm(H, N, np.pi + 0.0 * lo))
    at_lo = lmin >= -slack
    hi[at_lo] = -0.5 * np.pi
    active = ~at_lo
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        psi = 0.5 * np.pi - mid
        lmin, _ = _herm3_bounds(_rot_herm(H, N, psi))
        feas = lmin >= -slack
        hi = np.where(active & feas, mid, hi)
        lo = np.where(active & ~feas, mid, lo)
    return hi


def _batched_phase2_angles(H, N, slack):
    """sup |arg W| for stacked 3x3 matrices whose range leaves the RHP.

    Returns (angles, uncertain) where ``uncertain`` flags points classified
    as surrounding the origin purely from the support-line scan; callers
    re-verify those with the scalar routine.
    """
    m = H.shape[0]
    nphi = 256
    phis = np.linspace(-np.pi, np.pi, nphi, endpoint=False)
    hvals = np.empty((m, nphi))
    for j, phi in enumerate(phis):
        _, hvals[:, j] = _herm3_bounds(np.cos(phi) * H - np.sin(phi) * N)
    i0 = np.argmin(hvals, axis=1)
    step = phis[1] - phis[0]
    a = phis[i0] - step
    b = phis[i0] + step
    for _ in range(90):
        m1 = a + (b - a) / 3.0
        m2 = b - (b - a) / 3.0
        _, f1 = _herm3_bounds(_rot_herm(H, N, m1))
        _, f2 = _herm3_bounds(_rot_herm(H, N, m2))
        left = f1 <= f2
        b = np.where(left, m2, b)
        a = np.where(left, a, m1)
    phi0 = 0.5 * (a + b)
    _, h0 = _herm3_bounds(_rot_herm(H, N, phi0))
    grid_min = hvals[np.arange(m), i0]
    worse = h0 > grid_min
    phi0 = np.where(worse, phis[i0], phi0)
    h0 = np.minimum(h0, grid_min)

    uncertain = h0 > slack
    c = phi0 - np.pi
    cc = np.cos(c)[:, None, None]
    sc = np.sin(c)[:, None, None]
    Hr = cc * H - sc * N
    Nr = sc * H + cc * N
    a_plus = _batched_bisect_sup_arg(Hr, Nr, slack)
    a_minus = -_batched_bisect_sup_arg(np.conj(Hr), -np.conj(Nr), slack)
    lo_w = _wrap_angle(a_minus - c)
    hi_w = _wrap_angle(a_plus - c)
    ang = np.minimum(np.pi, np.maximum(np.abs(lo_w), np.abs(hi_w)))
    ang[hi_w < lo_w - 1e-9] = np.pi
    ang[uncertain] = np.pi
    return ang, uncertain


def _batched_phase1_angles(H, N, slack, iters=60):
    """Vectorized sector half-angles for ranges inside the closed RHP."""
    m = H.shape[0]

    def feasible(alpha):
        psi = 0.5 * np.pi - alpha
        l1, _ = _herm3_bounds(_rot_herm(H, N, psi))
        l2, _ = _herm3_bounds(_rot_herm(H, N, -psi))
        return (l1 >= -slack) & (l2 >= -slack)

    lo = np.zeros(m)
    hi = np.full(m, 0.5 * np.pi)
    at_zero = feasible(lo)
    hi[at_zero] = 0.0
    active = ~at_zero
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        feas = feasible(mid)
        hi = np.where(active & feas, mid, hi)
        lo = np.where(active & ~feas, mid, lo)
    return hi


@dataclass
class SectorReport:
    """Result of a sector-angle sweep over sample points."""

    theta: float
    worst_point: tuple
    worst_angle: float
    n_samples: int
    per_point_angles: np.ndarray = dataclass_field(default=None, repr=False)

    def to_dict(self):
        return {
            "theta": float(self.theta),
            "worst_point": [float(v) for v in self.worst_point],
            "worst_angle": float(self.worst_angle),
            "n_samples": int(self.n_samples),
        }


def compute_theta(problem, sample_points=None, per_point=False):
    """Uniform sector angle theta = max(0, sup_x |arg W(M(x))| - pi/2).

    M is the zeroth-order coefficient matrix of :func:`compute_matkl`; its
    numerical range leaves the closed right half-plane only through the
    stratification terms, and theta measures that excess uniformly over the
    sample points (default: the validated problem's volume sample points).
    The report records the worst sample point and its full numerical-range
    angle; ``per_point=True`` additionally stores every sampled angle.
    """
    if sample_points is None:
        pts = problem.sample_points
    else:
        pts = _as_points(sample_points)
    cfg = getattr(problem, "config", problem)
    lam = compute_matkl(cfg, pts)
    H, N = _split_parts(lam)
    ev_h = np.linalg.eigvalsh(H)
    ev_n = np.linalg.eigvalsh(N)
    nrm = np.max(np.abs(ev_h), axis=1) + np.max(np.abs(ev_n), axis=1)
    slack = 1e-13 * nrm
    lmin_h = ev_h[:, 0]
    phase2 = lmin_h < -slack

    n = len(pts)
    theta_x = np.zeros(n)
    angles = np.full(n, np.nan) if per_point else None
    if np.any(phase2):
        idx = np.flatnonzero(phase2)
        ang, uncertain = _batched_phase2_angles(H[idx], N[idx], slack[idx])
        for k in np.flatnonzero(uncertain):
            ang[k] = sector_angle(lam[idx[k]])
        theta_x[idx] = ang - 0.5 * np.pi
        if per_point:
            angles[idx] = ang
    if per_point:
        idx1 = np.flatnonzero(~phase2)
        if len(idx1):
            angles[idx1] = _batched_phase1_angles(H[idx1], N[idx1], slack[idx1])

    if np.any(theta_x > 0):
        worst = int(np.argmax(theta_x))
    else:
        worst = int(np.argmin(lmin_h / np.maximum(nrm, 1e-300)))
    worst_angle = sector_angle(lam[worst])
    theta_x[worst] = max(0.0, worst_angle - 0.5 * np.pi)
    theta = float(np.max(theta_x)) if n else 0.0
    return SectorReport(
        theta=theta,
        worst_point=tuple(float(v) for v in pts[worst]),
        worst_angle=float(worst_angle),
        n_samples=n,
        per_point_angles=angles,
    )


# -- sufficient conditions ----------------------------------------------------

CONDITION_NAMES = ("Thm3.5", "Thm3.10", "Thm3.11",
                   "App-a", "App-b", "App-c", "App-d", "App-e")


def admissibility_conditions(bounds, mach_inf, bnorm_inf, theta, flags,
                             creg=None):
    """Evaluate every sufficient flow-smallness condition.

    Each row compares a flow-dependent left-hand side (monotone increasing
    in the flow magnitude) against a flow-independent threshold;
    margin = threshold - lhs and the condition passes when margin > 0.

    The names are fixed labels of the report format:

    - "Thm3.5": no-stratification case (constant p and phi); needs only a
      subsonic flow, mach^2 < 1.
    - "Thm3.10": sectorial case; mach^2 < cos^2(theta).
    - "Thm3.11": the same bound for the gravity-coupled system.
    - "App-a": sup rho |b|^2 sec^2(theta) < creg^2 * inf(c)^2 * inf(rho),
      valid on convex domains with a known curl regularity constant.
    - "App-b": as App-a with creg replaced by 1 (no constant needed).
    - "App-c": sup rho * mach^2 * sec^2(theta) < inf rho, needs c^2*rho in
      W^{1,inf}.
    - "App-d": |b|^2 sec^2(theta) < inf(c)^2, needs rho in W^{1,inf}.
    - "App-e": mach^2 sec^2(theta) < 1, needs both regularity flags.
    """
    rho_lo, rho_hi = bounds["rho"]
    c_lo = bounds["c"][0]
    cos2 = float(np.cos(theta)) ** 2
    sec2 = 1.0 / cos2
    mach2 = mach_inf ** 2
    b2 = bnorm_inf ** 2
    const_pphi = bool(flags.get("p_phi_constant", False))
    convex = flags.get("domain_class", "convex") == "convex"
    has_creg = creg is not None
    c_reg = float(creg) if has_creg else 0.0

    rows = []

    def row(name, applicable, lhs, threshold):
        margin = threshold - lhs
        rows.append({
            "name": name,
            "applicable": bool(applicable),
            "lhs": float(lhs),
            "threshold": float(threshold),
            "margin": float(margin),
            "passed": bool(applicable) and margin > 0.0,
        })

    row("Thm3.5", const_pphi, mach2, 1.0)
    row("Thm3.10", True, mach2, cos2)
    row("Thm3.11", True, mach2, cos2)
    row("App-a", convex and has_creg,
        sec2 * rho_hi * b2, c_reg ** 2 * c_lo ** 2 * rho_lo)
    row("App-b", True, sec2 * rho_hi * b2, c_lo ** 2 * rho_lo)
    row("App-c", bool(flags.get("c_w1inf", False)),
        sec2 * rho_hi * mach2, rho_lo)
    row("App-d", bool(flags.get("rho_w1inf", False)), sec2 * b2, c_lo ** 2)
    row("App-e", bool(flags.get("c_w1inf", False))
        and bool(flags.get("rho_w1inf", False)), sec2 * mach2, 1.0)
    return rows


@dataclass
class AdmissibilityReport:
    """Outcome of all sufficient conditions for one validated problem."""

    rows: list
    theta: float
    mach_inf: float
    bnorm_inf: float
    bounds: dict
    creg: float = None

    @property
    def satisfied(self):
        return [r["name"] for r in self.rows if r["passed"]]

    @property
    def overall(self):
        return bool(self.satisfied)

    def row(self, name):
        for r in self.rows:
            if r["name"] == name:
                return r
        raise KeyError(name)

    def to_dict(self):
        return {
            "theta": float(self.theta),
            "mach_inf": float(self.mach_inf),
            "bnorm_inf": float(self.bnorm_inf),
            "bounds": {k: [float(v[0]), float(v[1])]
                       for k, v in self.bounds.items()},
            "creg_used": None if self.creg is None else float(self.creg),
            "conditions": self.rows,
            "satisfied": self.satisfied,
            "overall": self.overall,
        }


def check_admissibility(problem, theta, creg=None, require=None):
    """Evaluate the sufficient conditions for a validated problem.

    ``require`` lists condition names that must be evaluable: requiring
    "App-a" without a creg constant raises MissingCreg, and requiring any
    other condition whose preconditions do not hold raises
    PreconditionViolated.  The report itself never raises for a failing
    margin; callers inspect ``rows``/``satisfied``.
    """
    require = list(require or [])
    for name in require:
        if name not in CONDITION_NAMES:
            raise PreconditionViolated("unknown condition name %r" % name)
    if "App-a" in require and creg is None:
        raise MissingCreg("condition App-a requires a curl regularity "
                          "constant; pass creg=...")

    cfg = problem.config
    pts = problem.sample_points
    gp = cfg.p.grad(pts)
    scale_p = max(1.0, float(np.max(np.abs(cfg.p(pts)))))
    hp = cfg.p.hess_at(pts)
    hphi = cfg.phi.hess_at(pts)
    scale_phi = max(1.0, float(np.max(np.abs(cfg.phi(pts)))))
    const_pphi = (np.max(np.abs(gp)) <= 1e-14 * scale_p
                  and np.max(np.abs(hp)) <= 1e-14 * scale_p
                  and np.max(np.abs(hphi)) <= 1e-14 * scale_phi)

    flags = dict(cfg.flags)
    flags["p_phi_constant"] = const_pphi
    rows = admissibility_conditions(cfg.bounds, problem.mach_inf,
                                    problem.bnorm_inf, theta, flags, creg)
    by_name = {r["name"]: r for r in rows}
    for name in require:
        if not by_name[name]["applicable"]:
            raise PreconditionViolated(
                "required condition %s is not applicable to this problem"
                % name)
    return AdmissibilityReport(
        rows=rows, theta=float(theta), mach_inf=problem.mach_inf,
        bnorm_inf=problem.bnorm_inf, bounds=dict(cfg.bounds), creg=creg)
