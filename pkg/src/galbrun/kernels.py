"""Element kernels for the sesquilinear-form blocks.

Every kernel maps cell-batched quadrature data to local element matrices
(or load vectors) in ``complex128``.  Two implementations are kept for each
kernel: straight loops compiled with numba when it is importable, and a
vectorized einsum path used as fallback.  Set the environment variable
``GALBRUN_NUMBA=0`` before import (or call :func:`use_numba`) to force the
numpy path; :func:`backend` reports which one is active.

Shared array conventions:

``w``      quadrature weights times cell Jacobian, shape (nc, nq), float64
``N``      reference basis values, shape (nq, nl), float64
``G``      physical basis gradients, shape (nc, nq, nl, dim), float64
``coef``   real scalar coefficient at quadrature points, (nc, nq)
``mat``    3x3 matrix coefficient at quadrature points, (nc, nq, 3, 3)
``bvals``  flow field at quadrature points, (nc, nq, 3)
``qvals``  stratification vector at quadrature points, (nc, nq, dim)

Local vector dofs are numbered ``I = a * ncomp + m`` (node-major,
component-minor), matching the global dof layout of the FE spaces.  The
matrix convention is ``out[c, I, J] = form(phi_J, phi_I)`` -- trial second
index, test first -- so ``x^H A x`` evaluates the form at ``x``.
"""

from __future__ import annotations

import os

import numpy as np

HAS_NUMBA = False
if os.environ.get("GALBRUN_NUMBA", "") != "0":
    try:
        from numba import njit

        HAS_NUMBA = True
    except ImportError:
        HAS_NUMBA = False

_use_numba = HAS_NUMBA


def use_numba(flag):
    """Switch between the compiled and the numpy kernel backend."""
    global _use_numba
    if flag and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable")
    _use_numba = bool(flag)


def backend():
    """Name of the active kernel backend: ``"numba"`` or ``"numpy"``."""
    return "numba" if _use_numba else "numpy"


# ---------------------------------------------------------------------------
# loop implementations (compiled when numba is present)
# ---------------------------------------------------------------------------


def _scalar_mass_loop(w, coef, N):
    nc, nq = w.shape
    nl = N.shape[1]
    out = np.zeros((nc, nl, nl), np.complex128)
    for c in range(nc):
        for q in range(nq):
            s = w[c, q] * coef[c, q]
            for i in range(nl):
                si = s * N[q, i]
                for j in range(nl):
                    out[c, i, j] += si * N[q, j]
    return out


def _scalar_stiffness_loop(w, coef, G):
    nc, nq, nl, nd = G.shape
    out = np.zeros((nc, nl, nl), np.complex128)
    for c in range(nc):
        for q in range(nq):
            s = w[c, q] * coef[c, q]
            for i in range(nl):
                for j in range(nl):
                    acc = 0.0
                    for d in range(nd):
                        acc += G[c, q, i, d] * G[c, q, j, d]
                    out[c, i, j] += s * acc
    return out


def _vector_mass_loop(w, coef, N, ncomp):
    nc, nq = w.shape
    nl = N.shape[1]
    out = np.zeros((nc, nl * ncomp, nl * ncomp), np.complex128)
    for c in range(nc):
        for q in range(nq):
            s = w[c, q] * coef[c, q]
            for a in range(nl):
                sa = s * N[q, a]
                for b in range(nl):
                    v = sa * N[q, b]
                    for m in range(ncomp):
                        out[c, a * ncomp + m, b * ncomp + m] += v
    return out


def _matrix_mass_loop(w, mat, N, ncomp):
    nc, nq = w.shape
    nl = N.shape[1]
    out = np.zeros((nc, nl * ncomp, nl * ncomp), np.complex128)
    for c in range(nc):
        for q in range(nq):
            s = w[c, q]
            for a in range(nl):
                for b in range(nl):
                    v = s * N[q, a] * N[q, b]
                    for m in range(ncomp):
                        for n in range(ncomp):
                            out[c, a * ncomp + m, b * ncomp + n] += v * mat[c, q, m, n]
    return out


def _div_div_loop(w, coef, G):
    nc, nq, nl, nd = G.shape
    out = np.zeros((nc, nl * nd, nl * nd), np.complex128)
    for c in range(nc):
        for q in range(nq):
            s = w[c, q] * coef[c, q]
            for a in range(nl):
                for m in range(nd):
                    di = s * G[c, q, a, m]
                    for b in range(nl):
                        for n in range(nd):
                            out[c, a * nd + m, b * nd + n] += di * G[c, q, b, n]
    return out


def _div_gradp_loop(w, gradp, N, G):
    nc, nq, nl, nd = G.shape
    out = np.zeros((nc, nl * nd, nl * nd), np.complex128)
    for c in range(nc):
        for q in range(nq):
            s = w[c, q]
            for a in range(nl):
                for m in range(nd):
                    ti = s * gradp[c, q, m] * N[q, a]
                    for b in range(nl):
                        for n in range(nd):
                            out[c, a * nd + m, b * nd + n] += ti * G[c, q, b, n]
    return out


def _advection_gram_loop(w, rho, divrhob, bvals, omega, crossmat, N, G):
    nc, nq, nl, nd = G.shape
    nlv = nl * nd
    out = np.zeros((nc, nlv, nlv), np.complex128)
    im = np.zeros((nlv, 3), np.complex128)
    for c in range(nc):
        for q in range(nq):
            for a in range(nl):
                bg = 0.0
                for d in range(nd):
                    bg += bvals[c, q, d] * G[c, q, a, d]
                na = N[q, a]
                for m0 in range(nd):
                    I = a * nd + m0
                    for m in range(3):
                        v = 1j * na * crossmat[m, m0]
                        if m == m0:
                            v += omega * na + 1j * bg
                        im[I, m] = v
            s = w[c, q] * rho[c, q]
            t = -1j * w[c, q] * divrhob[c, q]
            for a in range(nl):
                for m0 in range(nd):
                    I = a * nd + m0
                    for b in range(nl):
                        for n0 in range(nd):
                            J = b * nd + n0
                            acc = 0.0 + 0.0j
                            for m in range(3):
                                acc += im[J, m] * np.conj(im[I, m])
                            out[c, I, J] += s * acc + t * N[q, a] * im[J, m0]
    return out


def _bgrad_gram_loop(w, bvals, G):
    nc, nq, nl, nd = G.shape
    out = np.zeros((nc, nl * nd, nl * nd), np.complex128)
    bg = np.zeros(nl, np.float64)
    for c in range(nc):
        for q in range(nq):
            for a in range(nl):
                acc = 0.0
                for d in range(nd):
                    acc += bvals[c, q, d] * G[c, q, a, d]
                bg[a] = acc
            s = w[c, q]
            for a in range(nl):
                for b in range(nl):
                    v = s * bg[a] * bg[b]
                    for m in range(nd):
                        out[c, a * nd + m, b * nd + m] += v
    return out


def _transport_loop(w, rho, bvals, N, G):
    nc, nq, nl, nd = G.shape
    out = np.zeros((nc, nl * nd, nl * nd), np.complex128)
    for c in range(nc):
        for q in range(nq):
            s = w[c, q] * rho[c, q]
            for b in range(nl):
                bg = 0.0
                for d in range(nd):
                    bg += bvals[c, q, d] * G[c, q, b, d]
                v = 1j * s * bg
                for a in range(nl):
                    va = v * N[q, a]
                    for m in range(nd):
                        out[c, a * nd + m, b * nd + m] += va
    return out


def _grad_coupling_loop(w, rho, Nv, Gs):
    nc, nq, nls, nd = Gs.shape
    nlv = Nv.shape[1]
    out = np.zeros((nc, nls, nlv * nd), np.complex128)
    for c in range(nc):
        for q in range(nq):
            s = w[c, q] * rho[c, q]
            for i in range(nls):
                for b in range(nlv):
                    v = s * Nv[q, b]
                    for n in range(nd):
                        out[c, i, b * nd + n] += v * Gs[c, q, i, n]
    return out


def _r_coupling_loop(w, qvals, Nv, Ns, Gs):
    nc, nq, nls, nd = Gs.shape
    nlv = Nv.shape[1]
    out = np.zeros((nc, nls, nlv * nd), np.complex128)
    for c in range(nc):
        for q in range(nq):
            s = w[c, q]
            for i in range(nls):
                for b in range(nlv):
                    v = s * Nv[q, b]
                    for n in range(nd):
                        out[c, i, b * nd + n] += v * (
                            Gs[c, q, i, n] - qvals[c, q, n] * Ns[q, i]
                        )
    return out


def _b_form_loop(w, qvals, Ns, Gs):
    nc, nq, nls, nd = Gs.shape
    out = np.zeros((nc, nls, nls), np.complex128)
    for c in range(nc):
        for q in range(nq):
            s = w[c, q]
            for i in range(nls):
                for j in range(nls):
                    acc = 0.0
                    for d in range(nd):
                        acc += Gs[c, q, j, d] * (Gs[c, q, i, d] - qvals[c, q, d] * Ns[q, i])
                    out[c, i, j] += s * acc
    return out


def _weighted_divq_loop(w, coef, qvals, N, G):
    nc, nq, nl, nd = G.shape
    nlv = nl * nd
    out = np.zeros((nc, nlv, nlv), np.complex128)
    sv = np.zeros(nlv, np.float64)
    for c in range(nc):
        for q in range(nq):
            for a in range(nl):
                for m in range(nd):
                    sv[a * nd + m] = G[c, q, a, m] + qvals[c, q, m] * N[q, a]
            s = w[c, q] * coef[c, q]
            for I in range(nlv):
                si = s * sv[I]
                for J in range(nlv):
                    out[c, I, J] += si * sv[J]
    return out


def _gradgrad_diag_loop(w, G):
    nc, nq, nl, nd = G.shape
    out = np.zeros((nc, nl * nd, nl * nd), np.complex128)
    for c in range(nc):
        for q in range(nq):
            s = w[c, q]
            for a in range(nl):
                for b in range(nl):
                    acc = 0.0
                    for d in range(nd):
                        acc += G[c, q, a, d] * G[c, q, b, d]
                    v = s * acc
                    for m in range(nd):
                        out[c, a * nd + m, b * nd + m] += v
    return out


def _load_vector_loop(w, fvals, N, ncomp):
    nc, nq = w.shape
    nl = N.shape[1]
    out = np.zeros((nc, nl * ncomp), np.complex128)
    for c in range(nc):
        for q in range(nq):
            s = w[c, q]
            for a in range(nl):
                sa = s * N[q, a]
                for m in range(ncomp):
                    out[c, a * ncomp + m] += sa * fvals[c, q, m]
    return out


# ---------------------------------------------------------------------------
# einsum implementations
# ---------------------------------------------------------------------------


def _pair_reshape(out5):
    nc, nl, nd = out5.shape[0], out5.shape[1], out5.shape[2]
    return np.ascontiguousarray(out5).reshape(nc, nl * nd, out5.shape[3] * out5.shape[4])


def _scalar_mass_np(w, coef, N):
    return np.einsum("cq,qi,qj->cij", w * coef, N, N).astype(np.complex128)


def _scalar_stiffness_np(w, coef, G):
    return np.einsum("cq,cqid,cqjd->cij", w * coef, G, G).astype(np.complex128)


def _vector_mass_np(w, coef, N, ncomp):
    base = np.einsum("cq,qi,qj->cij", w * coef, N, N)
    out5 = np.einsum("cij,mn->cimjn", base, np.eye(ncomp))
    return _pair_reshape(out5).astype(np.complex128)


def _matrix_mass_np(w, mat, N, ncomp):
    out5 = np.einsum("cq,cqmn,qi,qj->cimjn", w, mat[:, :, :ncomp, :ncomp], N, N)
    return _pair_reshape(out5).astype(np.complex128)


def _div_div_np(w, coef, G):
    out5 = np.einsum("cq,cqim,cqjn->cimjn", w * coef, G, G)
    return _pair_reshape(out5).astype(np.complex128)


def _div_gradp_np(w, gradp, N, G):
    nd = G.shape[3]
    out5 = np.einsum("cq,cqm,qi,cqjn->cimjn", w, gradp[:, :, :nd], N, G)
    return _pair_reshape(out5).astype(np.complex128)


def _advection_images_np(bvals, omega, crossmat, N, G):
    nc, nq, nl, nd = G.shape
    bg = np.einsum("cqd,cqad->cqa", bvals[:, :, :nd], G)
    delta = np.eye(nd, 3)
    im = np.einsum("cqa,mk->cqamk", omega * np.broadcast_to(N, (nc, nq, nl)) + 1j * bg, delta)
    im = im + 1j * np.einsum("qa,mk->qamk", N, crossmat[:, :nd].T)
    return im.reshape(nc, nq, nl * nd, 3)


def _advection_gram_np(w, rho, divrhob, bvals, omega, crossmat, N, G):
    nc, nq, nl, nd = G.shape
    im = _advection_images_np(bvals, omega, crossmat, N, G)
    out = np.einsum("cq,cqjk,cqik->cij", w * rho, im, im.conj())
    imn = im.reshape(nc, nq, nl, nd, 3)
    corr5 = -1j * np.einsum("cq,qi,cqbnm->cimbn", w * divrhob, N, imn[:, :, :, :, :nd])
    return out + _pair_reshape(corr5)


def _bgrad_gram_np(w, bvals, G):
    nd = G.shape[3]
    bg = np.einsum("cqd,cqad->cqa", bvals[:, :, :nd], G)
    out5 = np.einsum("cq,cqi,cqj,mn->cimjn", w, bg, bg, np.eye(nd))
    return _pair_reshape(out5).astype(np.complex128)


def _transport_np(w, rho, bvals, N, G):
    nd = G.shape[3]
    bg = np.einsum("cqd,cqad->cqa", bvals[:, :, :nd], G)
    out5 = 1j * np.einsum("cq,qi,cqj,mn->cimjn", w * rho, N, bg, np.eye(nd))
    return _pair_reshape(out5)


def _grad_coupling_np(w, rho, Nv, Gs):
    out4 = np.einsum("cq,cqin,qj->cijn", w * rho, Gs, Nv)
    nc, nls, nlv, nd = out4.shape
    return np.ascontiguousarray(out4).reshape(nc, nls, nlv * nd).astype(np.complex128)


def _r_coupling_np(w, qvals, Nv, Ns, Gs):
    out4 = np.einsum("cq,cqin,qj->cijn", w, Gs, Nv)
    out4 = out4 - np.einsum("cq,cqn,qi,qj->cijn", w, qvals, Ns, Nv)
    nc, nls, nlv, nd = out4.shape
    return np.ascontiguousarray(out4).reshape(nc, nls, nlv * nd).astype(np.complex128)


def _b_form_np(w, qvals, Ns, Gs):
    out = np.einsum("cq,cqid,cqjd->cij", w, Gs, Gs)
    out = out - np.einsum("cq,cqd,qi,cqjd->cij", w, qvals, Ns, Gs)
    return out.astype(np.complex128)


def _weighted_divq_np(w, coef, qvals, N, G):
    nc, nq, nl, nd = G.shape
    sv = G + np.einsum("cqm,qa->cqam", qvals[:, :, :nd], N)
    svf = sv.reshape(nc, nq, nl * nd)
    return np.einsum("cq,cqi,cqj->cij", w * coef, svf, svf).astype(np.complex128)


def _gradgrad_diag_np(w, G):
    nd = G.shape[3]
    out5 = np.einsum("cq,cqid,cqjd,mn->cimjn", w, G, G, np.eye(nd))
    return _pair_reshape(out5).astype(np.complex128)


def _load_vector_np(w, fvals, N, ncomp):
    out3 = np.einsum("cq,cqm,qi->cim", w, fvals[:, :, :ncomp], N)
    nc, nl = out3.shape[0], out3.shape[1]
    return np.ascontiguousarray(out3).reshape(nc, nl * ncomp).astype(np.complex128)


if HAS_NUMBA:
    _scalar_mass_loop = njit(cache=True)(_scalar_mass_loop)
    _scalar_stiffness_loop = njit(cache=True)(_scalar_stiffness_loop)
    _vector_mass_loop = njit(cache=True)(_vector_mass_loop)
    _matrix_mass_loop = njit(cache=True)(_matrix_mass_loop)
    _div_div_loop = njit(cache=True)(_div_div_loop)
    _div_gradp_loop = njit(cache=True)(_div_gradp_loop)
    _advection_gram_loop = njit(cache=True)(_advection_gram_loop)
    _bgrad_gram_loop = njit(cache=True)(_bgrad_gram_loop)
    _transport_loop = njit(cache=True)(_transport_loop)
    _grad_coupling_loop = njit(cache=True)(_grad_coupling_loop)
    _r_coupling_loop = njit(cache=True)(_r_coupling_loop)
    _b_form_loop = njit(cache=True)(_b_form_loop)
    _weighted_divq_loop = njit(cache=True)(_weighted_divq_loop)
    _gradgrad_diag_loop = njit(cache=True)(_gradgrad_diag_loop)
    _load_vector_loop = njit(cache=True)(_load_vector_loop)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def scalar_mass(w, coef, N):
    """<coef v_J, v_I> on a scalar space."""
    fn = _scalar_mass_loop if _use_numba else _scalar_mass_np
    return fn(w, coef, N)


def scalar_stiffness(w, coef, G):
    """<coef grad v_J, grad v_I> on a scalar space."""
    fn = _scalar_stiffness_loop if _use_numba else _scalar_stiffness_np
    return fn(w, coef, G)


def vector_mass(w, coef, N, ncomp):
    """<coef xi_J, xi_I> with a scalar coefficient."""
    fn = _vector_mass_loop if _use_numba else _vector_mass_np
    return fn(w, coef, N, ncomp)


def matrix_mass(w, mat, N, ncomp):
    """<Mat xi_J, xi_I> with a 3x3 matrix coefficient (top block used)."""
    fn = _matrix_mass_loop if _use_numba else _matrix_mass_np
    return fn(w, np.ascontiguousarray(mat, np.complex128), N, ncomp)


def div_div(w, coef, G):
    """<coef div xi_J, div xi_I>."""
    fn = _div_div_loop if _use_numba else _div_div_np
    return fn(w, coef, G)


def div_gradp(w, gradp, N, G):
    """<div xi_J, gradp . xi_I>; its transpose is the mirrored pairing."""
    fn = _div_gradp_loop if _use_numba else _div_gradp_np
    return fn(w, gradp, N, G)


def advection_gram(w, rho, divrhob, bvals, omega, crossmat, N, G):
    """<rho L xi_J, L xi_I> - i <div(rho b) L xi_J, xi_I>.

    L = omega + i b.grad + i Omega-cross is the stellar transport operator;
    the Gram part is Hermitian by construction and the correction term
    vanishes identically when the declared div(rho b) is zero, restoring
    the distributionally integrated-by-parts advection block otherwise.
    """
    fn = _advection_gram_loop if _use_numba else _advection_gram_np
    return fn(w, rho, divrhob, bvals, float(omega), crossmat, N, G)


def bgrad_gram(w, bvals, G):
    """<b.grad xi_J, b.grad xi_I> (unweighted, for the graph norm)."""
    fn = _bgrad_gram_loop if _use_numba else _bgrad_gram_np
    return fn(w, bvals, G)


def transport(w, rho, bvals, N, G):
    """<rho i b.grad xi_J, xi_I> -- the skew-testable transport block."""
    fn = _transport_loop if _use_numba else _transport_np
    return fn(w, rho, bvals, N, G)


def grad_coupling(w, rho, Nv, Gs):
    """<rho xi_J, grad psi_I>: rows scalar test dofs, columns vector dofs."""
    fn = _grad_coupling_loop if _use_numba else _grad_coupling_np
    return fn(w, rho, Nv, Gs)


def r_coupling(w, qvals, Nv, Ns, Gs):
    """<xi_J, grad v_I> - <q . xi_J, v_I>: rows scalar, columns vector."""
    fn = _r_coupling_loop if _use_numba else _r_coupling_np
    return fn(w, np.ascontiguousarray(qvals[:, :, : Gs.shape[3]]), Nv, Ns, Gs)


def b_form(w, qvals, Ns, Gs):
    """<grad v_J, grad v_I> - <q . grad v_J, v_I> on a scalar space."""
    fn = _b_form_loop if _use_numba else _b_form_np
    return fn(w, np.ascontiguousarray(qvals[:, :, : Gs.shape[3]]), Ns, Gs)


def weighted_divq(w, coef, qvals, N, G):
    """<coef (div + q.) xi_J, (div + q.) xi_I> -- factorized principal part."""
    fn = _weighted_divq_loop if _use_numba else _weighted_divq_np
    return fn(w, coef, np.ascontiguousarray(qvals[:, :, : G.shape[3]]), N, G)


def gradgrad_diag(w, G):
    """Componentwise <grad xi_J, grad xi_I> (full H1 seminorm block)."""
    fn = _gradgrad_diag_loop if _use_numba else _gradgrad_diag_np
    return fn(w, G)


def load_vector(w, fvals, N, ncomp):
    """<f, xi_I> for a (possibly complex) vector load f."""
    fn = _load_vector_loop if _use_numba else _load_vector_np
    return fn(w, np.ascontiguousarray(fvals[:, :, :3], np.complex128), N, ncomp)
