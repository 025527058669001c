"""Discrete splitting of the vector space into V + W + Z.

W is the kernel of the divergence-coupling block R (weighted-divergence-free
fields, the compactly embedded part), Z is the image under R of the
adjoint-harmonic scalar directions (absent when the stratification vector q
vanishes), and V is the graph-norm orthogonal complement of both.  All three
are represented by gramX-orthonormal bases obtained from whitened SVDs:
with gramX = L L^H the whitened coordinates y = L^H x turn the graph inner
product into the Euclidean one, so thresholded singular spaces are
orthonormal in the graph metric after mapping back through L^{-H}.

Everything here is dense linear algebra and guarded by a size limit; the
decomposition is a diagnostic object, not a solver component.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import (CutoffAmbiguous, DecompositionSizeError,
                     IllConditionedBases)

DEFAULT_SIZE_LIMIT = 4096
DEFAULT_CUTOFF = 1e-10
DEFAULT_FLOOR = 1e-12
GAP_RATIO = 10.0


def _dense_real(mat, what):
    if sp.issparse(mat):
        mat = mat.toarray()
    mat = np.asarray(mat)
    if np.iscomplexobj(mat):
        if mat.size and np.max(np.abs(mat.imag)) > 1e-13 * max(
                np.max(np.abs(mat.real)), 1.0):
            raise ValueError(what + " must be real for the decomposition")
        mat = mat.real.copy()
    return np.ascontiguousarray(mat, np.float64)


def _chol(gram, what, size_limit):
    n = gram.shape[0]
    if n > size_limit:
        raise DecompositionSizeError(
            "%s has %d dofs, dense decomposition limit is %d"
            % (what, n, size_limit))
    return sla.cholesky(_dense_real(gram, what), lower=True)


def _whiten_cols(L, mat):
    """mat L^{-T} for lower-triangular L (columns move to whitened basis)."""
    return sla.solve_triangular(L, mat.T, lower=True).T


def _unwhiten(L, cols):
    """L^{-T} cols: whitened orthonormal columns -> gram-orthonormal ones."""
    return sla.solve_triangular(L, cols, lower=True, trans="T")


def _split_rank(s, cutoff_rel):
    smax = s[0] if len(s) else 0.0
    cut = cutoff_rel * smax
    rank = int(np.sum(s > cut))
    if 0 < rank < len(s):
        tail = s[max(0, rank - 3): rank + 3]
        dropped = max(s[rank], np.finfo(float).tiny)
        if s[rank - 1] / dropped < GAP_RATIO:
            raise CutoffAmbiguous(
                "no clear singular-value gap at the rank cutoff "
                "(kept %.3e / dropped %.3e)" % (s[rank - 1], s[rank]),
                tail=tail)
    return rank, cut


def build_W(R, gramX, cutoff=DEFAULT_CUTOFF, size_limit=DEFAULT_SIZE_LIMIT):
    """gramX-orthonormal basis of ker(R): the divergence-free subspace.

    Returns (W, info).  ``dim W + rank R = n`` holds exactly by
    construction; a blurred singular-value gap at the cutoff raises
    CutoffAmbiguous rather than silently picking a rank.
    """
    L = _chol(gramX, "gramX", size_limit)
    Rt = _whiten_cols(L, _dense_real(R, "R"))
    _, s, Vt = np.linalg.svd(Rt, full_matrices=True)
    rank, cut = _split_rank(s, cutoff)
    Vnull = Vt[rank:].T
    W = _unwhiten(L, Vnull)
    info = {"singular_values": s, "rank": rank, "cutoff": cut,
            "dim": W.shape[1]}
    return W, info


def build_Z(R, B, gramX, gramH1, cutoff=DEFAULT_CUTOFF, floor=DEFAULT_FLOOR,
            size_limit=DEFAULT_SIZE_LIMIT):
    """gramX-orthonormal basis of the stratification subspace Z.

    N spans the gramH1-orthonormal left kernel of the scalar form B (the
    adjoint-harmonic directions; it always contains at least one vector
    because B annihilates constants).  Z is spanned by the right singular
    vectors of S = N^H R L^{-H}; when the whole of S sits below
    ``floor * sigma_max(R L^{-H})`` -- in particular whenever q = 0, where
    the rows of S cancel to rounding -- the subspace is empty.
    """
    L = _chol(gramX, "gramX", size_limit)
    L1 = _chol(gramH1, "gramH1", size_limit)
    Bt = _whiten_cols(L1, sla.solve_triangular(L1, _dense_real(B, "B"),
                                               lower=True))
    U, sB, _ = np.linalg.svd(Bt, full_matrices=True)
    smaxB = sB[0] if len(sB) else 0.0
    null_mask = sB <= cutoff * smaxB
    N = _unwhiten(L1, U[:, null_mask])

    Rt = _whiten_cols(L, _dense_real(R, "R"))
    smaxR = np.linalg.norm(Rt, 2) if Rt.size else 0.0
    S = N.T @ Rt
    info = {"n_harmonic": N.shape[1], "sigma_max_R": smaxR}
    if S.size == 0:
        info["singular_values"] = np.zeros(0)
        return np.zeros((gramX.shape[0], 0)), info
    _, sS, VtS = np.linalg.svd(S, full_matrices=False)
    info["singular_values"] = sS
    if len(sS) == 0 or sS[0] < floor * smaxR:
        return np.zeros((gramX.shape[0], 0)), info
    keep = int(np.sum(sS > cutoff * sS[0]))
    Z = _unwhiten(L, VtS[:keep].T)
    return Z, info


@dataclass
class Decomposition:
    """Graph-orthogonal projectors onto the V/W/Z splitting.

    Only the bases are stored; projectors are applied as operators
    (P_W = W W^H gramX and so on) so nothing n-by-n dense is kept around.
    """

    W: np.ndarray
    Z: np.ndarray
    gramX: sp.csr_matrix
    info: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.gramX.shape[0]

    @property
    def dim_W(self):
        return self.W.shape[1]

    @property
    def dim_Z(self):
        return self.Z.shape[1]

    @property
    def dim_V(self):
        return self.n - self.dim_W - self.dim_Z

    def _apply(self, basis, x):
        if basis.shape[1] == 0:
            return np.zeros_like(x, dtype=np.result_type(x, 1.0))
        return basis @ (basis.T @ (self.gramX @ x))

    def project_W(self, x):
        return self._apply(self.W, x)

    def project_Z(self, x):
        return self._apply(self.Z, x)

    def project_V(self, x):
        return x - self.project_W(x) - self.project_Z(x)

    def apply_T(self, x):
        """Sign-flip isometry T = P_V - P_W + P_Z = I - 2 P_W."""
        return x - 2.0 * self.project_W(x)

    def T_matrix(self):
        """Dense matrix of T (for premultiplied inf-sup computations)."""
        T = np.eye(self.n)
        if self.dim_W:
            T -= 2.0 * self.W @ (self.W.T @ self.gramX.toarray().real)
        return T

    def basis_matrix(self):
        return np.hstack([self.W, self.Z])


def build_projectors(W, Z, gramX, cond_limit=1e8):
    """Bundle the bases into a Decomposition after a conditioning check.

    The joint Gramian [W Z]^H gramX [W Z] must be numerically the identity;
    a condition number beyond ``cond_limit`` (or a nonpositive eigenvalue)
    means the two bases overlap and raises IllConditionedBases.
    """
    C = np.hstack([W, Z])
    if C.shape[1]:
        M = C.T @ (gramX @ C)
        M = np.asarray(M.real, np.float64)
        ev = np.linalg.eigvalsh(0.5 * (M + M.T))
        if ev[0] <= 0 or ev[-1] / ev[0] > cond_limit:
            raise IllConditionedBases(
                "joint W/Z Gramian condition %.3e exceeds %.1e"
                % (np.inf if ev[0] <= 0 else ev[-1] / ev[0], cond_limit))
    return Decomposition(W=np.asarray(W, np.float64),
                         Z=np.asarray(Z, np.float64), gramX=gramX)


def build_decomposition(R, B, gramX, gramH1, cutoff=DEFAULT_CUTOFF,
                        size_limit=DEFAULT_SIZE_LIMIT):
    """Full pipeline: W from R, Z from (R, B), bundled projectors."""
    W, winfo = build_W(R, gramX, cutoff=cutoff, size_limit=size_limit)
    Z, zinfo = build_Z(R, B, gramX, gramH1, cutoff=cutoff,
                       size_limit=size_limit)
    decomp = build_projectors(W, Z, gramX)
    decomp.info = {"W": winfo, "Z": zinfo}
    return decomp


def verify_decomposition(decomp, R=None, mass=None, probes=32, seed=0):
    """Measure the decomposition identities; report, never assert.

    Residuals are relative graph-norm errors over seeded random probe
    vectors: partition of unity, idempotency of each projector, mutual
    annihilation, the involution T^2 = I, and the graph-isometry of T.
    When R is given the largest ||R w|| over W basis columns is recorded
    (the W characterization), and a mass matrix adds a compactness proxy:
    the largest L2 mass carried by a graph-normalized W basis vector.
    """
    rng = np.random.default_rng(seed)
    n = decomp.n
    G = decomp.gramX

    def gnorm(x):
        return float(np.sqrt(abs(np.vdot(x, G @ x))))

    partition = idem = annih = invol = isom = 0.0
    for _ in range(probes):
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        nv = gnorm(v)
        pw, pz = decomp.project_W(v), decomp.project_Z(v)
        pv = v - pw - pz
        partition = max(partition, gnorm(pw + pz + pv - v) / nv)
        idem = max(idem, gnorm(decomp.project_W(pw) - pw) / nv)
        idem = max(idem, gnorm(decomp.project_Z(pz) - pz) / nv)
        idem = max(idem, gnorm(decomp.project_V(pv) - pv) / nv)
        annih = max(annih, gnorm(decomp.project_W(pz)) / nv)
        annih = max(annih, gnorm(decomp.project_Z(pw)) / nv)
        annih = max(annih, gnorm(decomp.project_W(pv)) / nv)
        annih = max(annih, gnorm(decomp.project_Z(pv)) / nv)
        tv = decomp.apply_T(v)
        invol = max(invol, gnorm(decomp.apply_T(tv) - v) / nv)
        isom = max(isom, abs(gnorm(tv) - nv) / nv)

    report = {
        "dofs": n,
        "dim_V": decomp.dim_V,
        "dim_W": decomp.dim_W,
        "dim_Z": decomp.dim_Z,
        "partition_residual": partition,
        "idempotency_residual": idem,
        "annihilation_residual": annih,
        "involution_residual": invol,
        "isometry_residual": isom,
        "probes": probes,
    }
    report["max_projector_residual"] = max(partition, idem, annih, invol)
    if R is not None and decomp.dim_W:
        RW = (R @ decomp.W)
        RW = RW.toarray() if sp.issparse(RW) else np.asarray(RW)
        report["w_characterization"] = float(
            np.max(np.linalg.norm(RW, axis=0)))
    elif R is not None:
        report["w_characterization"] = 0.0
    if mass is not None and decomp.dim_W:
        MW = mass @ decomp.W
        report["compactness_proxy"] = float(
            np.max(np.real(np.sum(decomp.W.conj() * MW, axis=0))))
    return report
