"""Numeric kernels behind the potential, its gradient, and the sampler sweep.

Two interchangeable backends implement the same math:

* ``numpy`` — vectorised reference implementation, always available.
* ``numba`` — scalar-loop twins JIT-compiled with ``@njit``; the default
  whenever numba imports.

Selection happens once at import time from the ``POSESYNC_BACKEND``
environment variable (``"numba"`` or ``"numpy"``; unset means "numba if
available").  Both backends accumulate edge contributions in a fixed order
(edge storage order, then node order), so each backend is bit-for-bit
deterministic run to run; across backends results agree to floating-point
reduction error (~1e-12 relative), not bitwise.

All kernels take flat arrays: poses ``q (n, 4)``, ``t (n, 3)``, edge
endpoints ``ei, ej (m,) int64``, measurements ``mq (m, 4)``, ``mt (m, 3)``,
data concentrations ``lam (3,)``, inverse translation variance, rotation
prior concentrations/frame, and inverse prior translation variance.  Node 0
is the gauge anchor: sweep kernels never update it (its gradient rows are
still accumulated here; public wrappers zero them).
"""

from __future__ import annotations

import math
import os

import numpy as np

from . import quat

__all__ = [
    "BACKEND_ENV_VAR",
    "active_backend",
    "numba_available",
    "potential_grad",
    "potential_grad_numba",
    "potential_grad_numpy",
    "run_sweeps",
    "run_sweeps_numba",
    "run_sweeps_numpy",
]

BACKEND_ENV_VAR = "POSESYNC_BACKEND"


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------


def potential_grad_numpy(q, t, ei, ej, mq, mt, lam, inv_sigma2, plam, pframe, inv_psigma2):
    """Potential value and its ambient gradient, vectorised over edges.

    Returns ``(u, gq, gt)`` with ``gq (n, 4)`` and ``gt (n, 3)``.  Every
    edge contributes to both endpoint gradient rows (the relative rotation
    depends on both, and so does the predicted relative translation).
    """
    n = q.shape[0]
    gq = np.zeros((n, 4))
    gt = np.zeros((n, 3))
    u = 0.0
    m = ei.shape[0]
    if m:
        qi, qj = q[ei], q[ej]
        ti, tj = t[ei], t[ej]
        r = quat.qmul(qj, quat.conjugate(qi))
        x = mq
        r0, r1, r2, r3 = r[:, 0], r[:, 1], r[:, 2], r[:, 3]
        x0, x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
        k1 = r0 * x1 - r1 * x0 + r2 * x3 - r3 * x2
        k2 = r0 * x2 - r2 * x0 - r1 * x3 + r3 * x1
        k3 = r3 * x0 + r2 * x1 - r1 * x2 - r0 * x3
        u -= lam[0] * (k1 @ k1) + lam[1] * (k2 @ k2) + lam[2] * (k3 @ k3)
        a = (-2.0 * lam[0]) * k1
        b = (-2.0 * lam[1]) * k2
        c = (-2.0 * lam[2]) * k3
        g_r = np.empty((m, 4))
        g_r[:, 0] = a * x1 + b * x2 - c * x3
        g_r[:, 1] = -a * x0 - b * x3 - c * x2
        g_r[:, 2] = a * x3 - b * x0 + c * x1
        g_r[:, 3] = -a * x2 + b * x1 + c * x0

        # Translation residual e = measured - predicted relative translation.
        e = mt - tj + quat.rotate_point(r, ti)
        u += 0.5 * inv_sigma2 * np.sum(e * e)
        np.add.at(gt, ej, (-inv_sigma2) * e)
        np.add.at(gt, ei, inv_sigma2 * quat.rotate_point(quat.conjugate(r), e))

        # Residual's pull on the relative rotation, e^T dR(r) t_i / sigma^2.
        w = r[:, 0:1]
        vr = r[:, 1:]
        e_dot_ti = np.sum(e * ti, axis=1, keepdims=True)
        e_dot_vr = np.sum(e * vr, axis=1, keepdims=True)
        vr_dot_ti = np.sum(vr * ti, axis=1, keepdims=True)
        s0 = 2.0 * (w[:, 0] * e_dot_ti[:, 0] + np.sum(e * np.cross(vr, ti), axis=1))
        svec = 2.0 * (e_dot_vr * ti - e_dot_ti * vr + vr_dot_ti * e - w * np.cross(e, ti))
        g_r[:, 0] += inv_sigma2 * s0
        g_r[:, 1:] += inv_sigma2 * svec

        # Chain rule through r = q_j * conj(q_i) into both endpoints.
        g0, g1, g2, g3 = g_r[:, 0], g_r[:, 1], g_r[:, 2], g_r[:, 3]
        a0, a1, a2, a3 = qj[:, 0], qj[:, 1], qj[:, 2], qj[:, 3]
        contrib_i = np.stack(
            [
                g0 * a0 + g1 * a1 + g2 * a2 + g3 * a3,
                g0 * a1 - g1 * a0 - g2 * a3 + g3 * a2,
                g0 * a2 + g1 * a3 - g2 * a0 - g3 * a1,
                g0 * a3 - g1 * a2 + g2 * a1 - g3 * a0,
            ],
            axis=1,
        )
        c0, c1, c2, c3 = qi[:, 0], qi[:, 1], qi[:, 2], qi[:, 3]
        contrib_j = np.stack(
            [
                g0 * c0 - g1 * c1 - g2 * c2 - g3 * c3,
                g0 * c1 + g1 * c0 + g2 * c3 - g3 * c2,
                g0 * c2 - g1 * c3 + g2 * c0 + g3 * c1,
                g0 * c3 + g1 * c2 - g2 * c1 + g3 * c0,
            ],
            axis=1,
        )
        np.add.at(gq, ei, contrib_i)
        np.add.at(gq, ej, contrib_j)

    if plam[0] != 0.0 or plam[1] != 0.0 or plam[2] != 0.0:
        vcols = pframe[:, 1:]
        kp = q @ vcols
        u -= float(np.sum((kp * kp) * plam))
        gq += (-2.0) * (kp * plam) @ vcols.T
    if inv_psigma2 > 0.0:
        u += 0.5 * inv_psigma2 * np.sum(t * t)
        gt += inv_psigma2 * t
    return float(u), gq, gt


def run_sweeps_numpy(
    q,
    t,
    vq,
    vt,
    ei,
    ej,
    mq,
    mt,
    lam,
    inv_sigma2,
    plam,
    pframe,
    inv_psigma2,
    h,
    damp,
    noise_scale,
    noise_q,
    noise_t,
    u_trace,
    best_q,
    best_t,
    best_u,
    track_best,
):
    """Run ``len(u_trace)`` sampler sweeps in place (vectorised backend).

    Each sweep evaluates the gradient once at the pre-sweep state, records
    that potential in ``u_trace``, then updates every free node: momentum
    damping, a tangent-projected gradient/noise kick, and exact geodesic
    flow for rotations; the Euclidean analogue for translations.  When
    ``track_best`` is set, the lowest-potential iterate seen is kept in
    ``best_q``/``best_t``; the (possibly updated) best potential is
    returned.
    """
    for k in range(u_trace.shape[0]):
        u, gq, gt = potential_grad_numpy(
            q, t, ei, ej, mq, mt, lam, inv_sigma2, plam, pframe, inv_psigma2
        )
        u_trace[k] = u
        if track_best and u < best_u:
            best_u = u
            best_q[...] = q
            best_t[...] = t

        # Rotations: damp, kick (projected), geodesic flow.
        vq[1:] *= damp
        kick = (-h) * gq[1:]
        if noise_scale > 0.0:
            kick = kick + noise_scale * noise_q[k, 1:]
        kick -= np.sum(q[1:] * kick, axis=1, keepdims=True) * q[1:]
        vq[1:] += kick
        alpha = np.linalg.norm(vq[1:], axis=1, keepdims=True)
        safe = np.where(alpha > 0.0, alpha, 1.0)
        ca = np.cos(alpha * h)
        sa = np.sin(alpha * h)
        q_new = q[1:] * ca + (vq[1:] / safe) * sa
        v_new = vq[1:] * ca - q[1:] * (alpha * sa)
        q_new /= np.linalg.norm(q_new, axis=1, keepdims=True)
        v_new -= np.sum(q_new * v_new, axis=1, keepdims=True) * q_new
        q[1:] = q_new
        vq[1:] = v_new

        # Translations: damp, kick, drift.
        vt[1:] *= damp
        tkick = (-h) * gt[1:]
        if noise_scale > 0.0:
            tkick = tkick + noise_scale * noise_t[k, 1:]
        vt[1:] += tkick
        t[1:] += h * vt[1:]
    return best_u


# ---------------------------------------------------------------------------
# Loop twins (JIT-compiled by numba when available).
# ---------------------------------------------------------------------------


def _potential_grad_fill_loops(q, t, ei, ej, mq, mt, lam, inv_sigma2, plam, pframe, inv_psigma2, gq, gt):
    n = q.shape[0]
    m = ei.shape[0]
    for i in range(n):
        gq[i, 0] = 0.0
        gq[i, 1] = 0.0
        gq[i, 2] = 0.0
        gq[i, 3] = 0.0
        gt[i, 0] = 0.0
        gt[i, 1] = 0.0
        gt[i, 2] = 0.0
    u = 0.0
    lam1, lam2, lam3 = lam[0], lam[1], lam[2]
    for e in range(m):
        i = ei[e]
        j = ej[e]
        qi0, qi1, qi2, qi3 = q[i, 0], q[i, 1], q[i, 2], q[i, 3]
        qj0, qj1, qj2, qj3 = q[j, 0], q[j, 1], q[j, 2], q[j, 3]
        # r = q_j * conj(q_i)
        r0 = qj0 * qi0 + qj1 * qi1 + qj2 * qi2 + qj3 * qi3
        r1 = -qj0 * qi1 + qj1 * qi0 - qj2 * qi3 + qj3 * qi2
        r2 = -qj0 * qi2 + qj2 * qi0 - qj3 * qi1 + qj1 * qi3
        r3 = -qj0 * qi3 + qj3 * qi0 - qj1 * qi2 + qj2 * qi1
        x0, x1, x2, x3 = mq[e, 0], mq[e, 1], mq[e, 2], mq[e, 3]
        k1 = r0 * x1 - r1 * x0 + r2 * x3 - r3 * x2
        k2 = r0 * x2 - r2 * x0 - r1 * x3 + r3 * x1
        k3 = r3 * x0 + r2 * x1 - r1 * x2 - r0 * x3
        u -= lam1 * k1 * k1 + lam2 * k2 * k2 + lam3 * k3 * k3
        a = -2.0 * lam1 * k1
        b = -2.0 * lam2 * k2
        c = -2.0 * lam3 * k3
        gr0 = a * x1 + b * x2 - c * x3
        gr1 = -a * x0 - b * x3 - c * x2
        gr2 = a * x3 - b * x0 + c * x1
        gr3 = -a * x2 + b * x1 + c * x0

        # Translation residual e = measured - (t_j - R(r) t_i).
        ti0, ti1, ti2 = t[i, 0], t[i, 1], t[i, 2]
        tj0, tj1, tj2 = t[j, 0], t[j, 1], t[j, 2]
        ww = r0 * r0 - (r1 * r1 + r2 * r2 + r3 * r3)
        dot = r1 * ti0 + r2 * ti1 + r3 * ti2
        rt0 = ww * ti0 + 2.0 * dot * r1 + 2.0 * r0 * (r2 * ti2 - r3 * ti1)
        rt1 = ww * ti1 + 2.0 * dot * r2 + 2.0 * r0 * (r3 * ti0 - r1 * ti2)
        rt2 = ww * ti2 + 2.0 * dot * r3 + 2.0 * r0 * (r1 * ti1 - r2 * ti0)
        e0 = mt[e, 0] - tj0 + rt0
        e1 = mt[e, 1] - tj1 + rt1
        e2 = mt[e, 2] - tj2 + rt2
        u += 0.5 * inv_sigma2 * (e0 * e0 + e1 * e1 + e2 * e2)
        gt[j, 0] -= inv_sigma2 * e0
        gt[j, 1] -= inv_sigma2 * e1
        gt[j, 2] -= inv_sigma2 * e2
        # R(r)^T e = R(conj r) e
        dce = -r1 * e0 - r2 * e1 - r3 * e2
        ce0 = ww * e0 - 2.0 * dce * r1 + 2.0 * r0 * (-r2 * e2 + r3 * e1)
        ce1 = ww * e1 - 2.0 * dce * r2 + 2.0 * r0 * (-r3 * e0 + r1 * e2)
        ce2 = ww * e2 - 2.0 * dce * r3 + 2.0 * r0 * (-r1 * e1 + r2 * e0)
        gt[i, 0] += inv_sigma2 * ce0
        gt[i, 1] += inv_sigma2 * ce1
        gt[i, 2] += inv_sigma2 * ce2

        # e^T dR(r) t_i, folded into the rotation pull.
        e_dot_ti = e0 * ti0 + e1 * ti1 + e2 * ti2
        e_dot_vr = e0 * r1 + e1 * r2 + e2 * r3
        vr_dot_ti = dot
        cvx = r2 * ti2 - r3 * ti1
        cvy = r3 * ti0 - r1 * ti2
        cvz = r1 * ti1 - r2 * ti0
        cex = e1 * ti2 - e2 * ti1
        cey = e2 * ti0 - e0 * ti2
        cez = e0 * ti1 - e1 * ti0
        gr0 += inv_sigma2 * 2.0 * (r0 * e_dot_ti + e0 * cvx + e1 * cvy + e2 * cvz)
        gr1 += inv_sigma2 * 2.0 * (e_dot_vr * ti0 - e_dot_ti * r1 + vr_dot_ti * e0 - r0 * cex)
        gr2 += inv_sigma2 * 2.0 * (e_dot_vr * ti1 - e_dot_ti * r2 + vr_dot_ti * e1 - r0 * cey)
        gr3 += inv_sigma2 * 2.0 * (e_dot_vr * ti2 - e_dot_ti * r3 + vr_dot_ti * e2 - r0 * cez)

        # Chain to q_i and q_j.
        gq[i, 0] += gr0 * qj0 + gr1 * qj1 + gr2 * qj2 + gr3 * qj3
        gq[i, 1] += gr0 * qj1 - gr1 * qj0 - gr2 * qj3 + gr3 * qj2
        gq[i, 2] += gr0 * qj2 + gr1 * qj3 - gr2 * qj0 - gr3 * qj1
        gq[i, 3] += gr0 * qj3 - gr1 * qj2 + gr2 * qj1 - gr3 * qj0
        gq[j, 0] += gr0 * qi0 - gr1 * qi1 - gr2 * qi2 - gr3 * qi3
        gq[j, 1] += gr0 * qi1 + gr1 * qi0 + gr2 * qi3 - gr3 * qi2
        gq[j, 2] += gr0 * qi2 - gr1 * qi3 + gr2 * qi0 + gr3 * qi1
        gq[j, 3] += gr0 * qi3 + gr1 * qi2 - gr2 * qi1 + gr3 * qi0

    if plam[0] != 0.0 or plam[1] != 0.0 or plam[2] != 0.0:
        for i in range(n):
            for kcol in range(3):
                v0 = pframe[0, kcol + 1]
                v1 = pframe[1, kcol + 1]
                v2 = pframe[2, kcol + 1]
                v3 = pframe[3, kcol + 1]
                kp = v0 * q[i, 0] + v1 * q[i, 1] + v2 * q[i, 2] + v3 * q[i, 3]
                u -= plam[kcol] * kp * kp
                w = -2.0 * plam[kcol] * kp
                gq[i, 0] += w * v0
                gq[i, 1] += w * v1
                gq[i, 2] += w * v2
                gq[i, 3] += w * v3
    if inv_psigma2 > 0.0:
        for i in range(n):
            u += 0.5 * inv_psigma2 * (t[i, 0] ** 2 + t[i, 1] ** 2 + t[i, 2] ** 2)
            gt[i, 0] += inv_psigma2 * t[i, 0]
            gt[i, 1] += inv_psigma2 * t[i, 1]
            gt[i, 2] += inv_psigma2 * t[i, 2]
    return u


# Rebound to the JIT-compiled version below when numba is available; the
# sweep loop calls it through this global.
_fill_impl = _potential_grad_fill_loops


def _run_sweeps_loops(
    q,
    t,
    vq,
    vt,
    ei,
    ej,
    mq,
    mt,
    lam,
    inv_sigma2,
    plam,
    pframe,
    inv_psigma2,
    h,
    damp,
    noise_scale,
    noise_q,
    noise_t,
    u_trace,
    best_q,
    best_t,
    best_u,
    track_best,
):
    n = q.shape[0]
    gq = np.zeros((n, 4))
    gt = np.zeros((n, 3))
    for k in range(u_trace.shape[0]):
        u = _fill_impl(q, t, ei, ej, mq, mt, lam, inv_sigma2, plam, pframe, inv_psigma2, gq, gt)
        u_trace[k] = u
        if track_best and u < best_u:
            best_u = u
            for i in range(n):
                best_q[i, 0] = q[i, 0]
                best_q[i, 1] = q[i, 1]
                best_q[i, 2] = q[i, 2]
                best_q[i, 3] = q[i, 3]
                best_t[i, 0] = t[i, 0]
                best_t[i, 1] = t[i, 1]
                best_t[i, 2] = t[i, 2]
        for i in range(1, n):
            w0 = vq[i, 0] * damp
            w1 = vq[i, 1] * damp
            w2 = vq[i, 2] * damp
            w3 = vq[i, 3] * damp
            a0 = -h * gq[i, 0]
            a1 = -h * gq[i, 1]
            a2 = -h * gq[i, 2]
            a3 = -h * gq[i, 3]
            if noise_scale > 0.0:
                a0 += noise_scale * noise_q[k, i, 0]
                a1 += noise_scale * noise_q[k, i, 1]
                a2 += noise_scale * noise_q[k, i, 2]
                a3 += noise_scale * noise_q[k, i, 3]
            q0, q1, q2, q3 = q[i, 0], q[i, 1], q[i, 2], q[i, 3]
            dot = q0 * a0 + q1 * a1 + q2 * a2 + q3 * a3
            w0 += a0 - dot * q0
            w1 += a1 - dot * q1
            w2 += a2 - dot * q2
            w3 += a3 - dot * q3
            alpha = math.sqrt(w0 * w0 + w1 * w1 + w2 * w2 + w3 * w3)
            if alpha > 0.0:
                ca = math.cos(alpha * h)
                sa = math.sin(alpha * h)
                inv_a = 1.0 / alpha
                nq0 = q0 * ca + w0 * inv_a * sa
                nq1 = q1 * ca + w1 * inv_a * sa
                nq2 = q2 * ca + w2 * inv_a * sa
                nq3 = q3 * ca + w3 * inv_a * sa
                nv0 = w0 * ca - q0 * alpha * sa
                nv1 = w1 * ca - q1 * alpha * sa
                nv2 = w2 * ca - q2 * alpha * sa
                nv3 = w3 * ca - q3 * alpha * sa
            else:
                nq0, nq1, nq2, nq3 = q0, q1, q2, q3
                nv0, nv1, nv2, nv3 = w0, w1, w2, w3
            inv_norm = 1.0 / math.sqrt(nq0 * nq0 + nq1 * nq1 + nq2 * nq2 + nq3 * nq3)
            nq0 *= inv_norm
            nq1 *= inv_norm
            nq2 *= inv_norm
            nq3 *= inv_norm
            dot2 = nq0 * nv0 + nq1 * nv1 + nq2 * nv2 + nq3 * nv3
            nv0 -= dot2 * nq0
            nv1 -= dot2 * nq1
            nv2 -= dot2 * nq2
            nv3 -= dot2 * nq3
            q[i, 0], q[i, 1], q[i, 2], q[i, 3] = nq0, nq1, nq2, nq3
            vq[i, 0], vq[i, 1], vq[i, 2], vq[i, 3] = nv0, nv1, nv2, nv3
        for i in range(1, n):
            b0 = vt[i, 0] * damp - h * gt[i, 0]
            b1 = vt[i, 1] * damp - h * gt[i, 1]
            b2 = vt[i, 2] * damp - h * gt[i, 2]
            if noise_scale > 0.0:
                b0 += noise_scale * noise_t[k, i, 0]
                b1 += noise_scale * noise_t[k, i, 1]
                b2 += noise_scale * noise_t[k, i, 2]
            vt[i, 0] = b0
            vt[i, 1] = b1
            vt[i, 2] = b2
            t[i, 0] += h * b0
            t[i, 1] += h * b1
            t[i, 2] += h * b2
    return best_u


# ---------------------------------------------------------------------------
# Backend selection and dispatch.
# ---------------------------------------------------------------------------


def _import_numba():
    try:
        import numba
    except ImportError:
        return None
    return numba


def _select_backend() -> str:
    choice = os.environ.get(BACKEND_ENV_VAR, "").strip().lower()
    if choice not in ("", "numba", "numpy"):
        raise ValueError(
            f"{BACKEND_ENV_VAR} must be 'numba' or 'numpy', got {choice!r}"
        )
    if choice == "numpy":
        return "numpy"
    if _import_numba() is None:
        if choice == "numba":
            raise RuntimeError(f"{BACKEND_ENV_VAR}=numba requested but numba is not importable")
        return "numpy"
    return "numba"


_BACKEND = _select_backend()

potential_grad_numba = None
run_sweeps_numba = None
if _import_numba() is not None:
    from numba import njit

    _fill_impl = njit(cache=True, nogil=True)(_potential_grad_fill_loops)
    run_sweeps_numba = njit(cache=True, nogil=True)(_run_sweeps_loops)

    def potential_grad_numba(q, t, ei, ej, mq, mt, lam, inv_sigma2, plam, pframe, inv_psigma2):
        gq = np.zeros((q.shape[0], 4))
        gt = np.zeros((q.shape[0], 3))
        u = _fill_impl(q, t, ei, ej, mq, mt, lam, inv_sigma2, plam, pframe, inv_psigma2, gq, gt)
        return float(u), gq, gt


def numba_available() -> bool:
    return run_sweeps_numba is not None


def active_backend() -> str:
    """The backend selected at import time: ``"numba"`` or ``"numpy"``."""
    return _BACKEND


def potential_grad(q, t, ei, ej, mq, mt, lam, inv_sigma2, plam, pframe, inv_psigma2):
    """Backend-dispatched potential and ambient gradient."""
    if _BACKEND == "numba":
        return potential_grad_numba(q, t, ei, ej, mq, mt, lam, inv_sigma2, plam, pframe, inv_psigma2)
    return potential_grad_numpy(q, t, ei, ej, mq, mt, lam, inv_sigma2, plam, pframe, inv_psigma2)


def run_sweeps(
    q,
    t,
    vq,
    vt,
    ei,
    ej,
    mq,
    mt,
    lam,
    inv_sigma2,
    plam,
    pframe,
    inv_psigma2,
    h,
    damp,
    noise_scale,
    noise_q,
    noise_t,
    u_trace,
    best_q,
    best_t,
    best_u,
    track_best,
):
    """Backend-dispatched sweep loop; see :func:`run_sweeps_numpy`."""
    fn = run_sweeps_numba if _BACKEND == "numba" else run_sweeps_numpy
    return fn(
        q,
        t,
        vq,
        vt,
        ei,
        ej,
        mq,
        mt,
        lam,
        inv_sigma2,
        plam,
        pframe,
        inv_psigma2,
        h,
        damp,
        noise_scale,
        noise_q,
        noise_t,
        u_trace,
        best_q,
        best_t,
        best_u,
        track_best,
    )
