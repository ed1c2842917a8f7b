# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled recurrent-layer kernels.

Same contracts as the pure-numpy module (pyref): whole-sequence forward
and backward passes per cell type, float64 throughout. The win over numpy
comes from fusing the per-timestep gate math and tiny matmuls into one C
loop nest (hidden sizes here are far too small for BLAS to pay off).
"""

import numpy as np

cimport cython
from libc.math cimport exp, tanh

BACKEND = "fast"


cdef inline double _sigmoid(double x) nogil:
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    cdef double e = exp(x)
    return e / (1.0 + e)


def simple_forward(W, b, X):
    # transposed weights make the inner j-loop contiguous (SIMD-friendly)
    cdef const double[:, ::1] Wt = np.ascontiguousarray(np.asarray(W).T)
    cdef const double[::1] bv = np.ascontiguousarray(b)
    cdef const double[:, :, ::1] Xv = np.ascontiguousarray(X)
    cdef Py_ssize_t B = Xv.shape[0], T = Xv.shape[1], I = Xv.shape[2]
    cdef Py_ssize_t H = Wt.shape[1]
    Hseq = np.zeros((B, T, H))
    acc = np.zeros(H)
    cdef double[:, :, ::1] Hv = Hseq
    cdef double[::1] av = acc
    cdef Py_ssize_t n, t, j, k
    cdef double v
    with nogil:
        for n in range(B):
            for t in range(T):
                for j in range(H):
                    av[j] = bv[j]
                if t > 0:
                    for k in range(H):
                        v = Hv[n, t - 1, k]
                        for j in range(H):
                            av[j] += Wt[k, j] * v
                for k in range(I):
                    v = Xv[n, t, k]
                    for j in range(H):
                        av[j] += Wt[H + k, j] * v
                for j in range(H):
                    Hv[n, t, j] = tanh(av[j])
    return (Hseq,)


def simple_backward(W, b, X, cache, dH):
    cdef const double[:, ::1] Wv = np.ascontiguousarray(W)
    cdef const double[:, :, ::1] Xv = np.ascontiguousarray(X)
    cdef const double[:, :, ::1] Hv = np.ascontiguousarray(cache[0])
    cdef const double[:, :, ::1] dHv = np.ascontiguousarray(dH)
    cdef Py_ssize_t B = Xv.shape[0], T = Xv.shape[1], I = Xv.shape[2]
    cdef Py_ssize_t H = Wv.shape[0]
    dW = np.zeros((H, H + I))
    db = np.zeros(H)
    dX = np.zeros((B, T, I))
    carry = np.zeros((B, H))
    da = np.zeros(H)
    cdef double[:, ::1] dWv = dW
    cdef double[::1] dbv = db
    cdef double[:, :, ::1] dXv = dX
    cdef double[:, ::1] cv = carry
    cdef double[::1] dav = da
    cdef Py_ssize_t n, t, j, k
    cdef double h, g
    with nogil:
        for n in range(B):
            for j in range(H):
                cv[n, j] = 0.0
            for t in range(T - 1, -1, -1):
                for j in range(H):
                    h = Hv[n, t, j]
                    dav[j] = (dHv[n, t, j] + cv[n, j]) * (1.0 - h * h)
                for j in range(H):
                    cv[n, j] = 0.0
                for j in range(H):
                    g = dav[j]
                    dbv[j] += g
                    if t > 0:
                        for k in range(H):
                            dWv[j, k] += g * Hv[n, t - 1, k]
                    for k in range(I):
                        dWv[j, H + k] += g * Xv[n, t, k]
                    for k in range(H):
                        cv[n, k] += g * Wv[j, k]
                    for k in range(I):
                        dXv[n, t, k] += g * Wv[j, H + k]
    return dW, db, dX


def gru_forward(W, b, X):
    cdef const double[:, ::1] Wv = np.ascontiguousarray(W)
    cdef const double[::1] bv = np.ascontiguousarray(b)
    cdef const double[:, :, ::1] Xv = np.ascontiguousarray(X)
    cdef Py_ssize_t B = Xv.shape[0], T = Xv.shape[1], I = Xv.shape[2]
    cdef Py_ssize_t H = Wv.shape[0] // 3
    Hseq = np.zeros((B, T, H))
    Z = np.zeros((B, T, H))
    R = np.zeros((B, T, H))
    N = np.zeros((B, T, H))
    cdef double[:, :, ::1] Hv = Hseq, Zv = Z, Rv = R, Nv = N
    cdef Py_ssize_t n, t, j, k
    cdef double az, ar, an, hp
    with nogil:
        for n in range(B):
            for t in range(T):
                for j in range(H):
                    az = bv[j]
                    ar = bv[H + j]
                    if t > 0:
                        for k in range(H):
                            hp = Hv[n, t - 1, k]
                            az += Wv[j, k] * hp
                            ar += Wv[H + j, k] * hp
                    for k in range(I):
                        az += Wv[j, H + k] * Xv[n, t, k]
                        ar += Wv[H + j, H + k] * Xv[n, t, k]
                    Zv[n, t, j] = _sigmoid(az)
                    Rv[n, t, j] = _sigmoid(ar)
                for j in range(H):
                    an = bv[2 * H + j]
                    if t > 0:
                        for k in range(H):
                            an += Wv[2 * H + j, k] * (Rv[n, t, k] * Hv[n, t - 1, k])
                    for k in range(I):
                        an += Wv[2 * H + j, H + k] * Xv[n, t, k]
                    Nv[n, t, j] = tanh(an)
                for j in range(H):
                    hp = Hv[n, t - 1, j] if t > 0 else 0.0
                    Hv[n, t, j] = (1.0 - Zv[n, t, j]) * hp + Zv[n, t, j] * Nv[n, t, j]
    return Hseq, Z, R, N


def gru_backward(W, b, X, cache, dH):
    cdef const double[:, ::1] Wv = np.ascontiguousarray(W)
    cdef const double[:, :, ::1] Xv = np.ascontiguousarray(X)
    cdef const double[:, :, ::1] Hv = np.ascontiguousarray(cache[0])
    cdef const double[:, :, ::1] Zv = np.ascontiguousarray(cache[1])
    cdef const double[:, :, ::1] Rv = np.ascontiguousarray(cache[2])
    cdef const double[:, :, ::1] Nv = np.ascontiguousarray(cache[3])
    cdef const double[:, :, ::1] dHv = np.ascontiguousarray(dH)
    cdef Py_ssize_t B = Xv.shape[0], T = Xv.shape[1], I = Xv.shape[2]
    cdef Py_ssize_t H = Wv.shape[0] // 3
    dW = np.zeros((3 * H, H + I))
    db = np.zeros(3 * H)
    dX = np.zeros((B, T, I))
    carry = np.zeros(H)
    da_z = np.zeros(H)
    da_r = np.zeros(H)
    da_n = np.zeros(H)
    drh = np.zeros(H)
    cdef double[:, ::1] dWv = dW
    cdef double[::1] dbv = db
    cdef double[:, :, ::1] dXv = dX
    cdef double[::1] cv = carry, dazv = da_z, darv = da_r, danv = da_n, drhv = drh
    cdef Py_ssize_t n, t, j, k
    cdef double dh, z, r, nn, hp, dz, dn, dr, g
    with nogil:
        for n in range(B):
            for j in range(H):
                cv[j] = 0.0
            for t in range(T - 1, -1, -1):
                # gate pre-activation gradients for this timestep
                for j in range(H):
                    dh = dHv[n, t, j] + cv[j]
                    z = Zv[n, t, j]
                    nn = Nv[n, t, j]
                    hp = Hv[n, t - 1, j] if t > 0 else 0.0
                    dz = dh * (nn - hp)
                    dn = dh * z
                    cv[j] = dh * (1.0 - z)  # dh_prev, accumulated below
                    dazv[j] = dz * z * (1.0 - z)
                    danv[j] = dn * (1.0 - nn * nn)
                # candidate block: acts on [r*h_prev; x]
                for j in range(H):
                    g = danv[j]
                    dbv[2 * H + j] += g
                    if t > 0:
                        for k in range(H):
                            dWv[2 * H + j, k] += g * Rv[n, t, k] * Hv[n, t - 1, k]
                    for k in range(I):
                        dWv[2 * H + j, H + k] += g * Xv[n, t, k]
                for k in range(H):
                    drhv[k] = 0.0
                for j in range(H):
                    g = danv[j]
                    for k in range(H):
                        drhv[k] += g * Wv[2 * H + j, k]
                    for k in range(I):
                        dXv[n, t, k] += g * Wv[2 * H + j, H + k]
                for j in range(H):
                    hp = Hv[n, t - 1, j] if t > 0 else 0.0
                    r = Rv[n, t, j]
                    dr = drhv[j] * hp
                    cv[j] += drhv[j] * r
                    darv[j] = dr * r * (1.0 - r)
                # update and reset blocks: act on [h_prev; x]
                for j in range(H):
                    dbv[j] += dazv[j]
                    dbv[H + j] += darv[j]
                    if t > 0:
                        for k in range(H):
                            hp = Hv[n, t - 1, k]
                            dWv[j, k] += dazv[j] * hp
                            dWv[H + j, k] += darv[j] * hp
                    for k in range(I):
                        dWv[j, H + k] += dazv[j] * Xv[n, t, k]
                        dWv[H + j, H + k] += darv[j] * Xv[n, t, k]
                    for k in range(H):
                        cv[k] += dazv[j] * Wv[j, k] + darv[j] * Wv[H + j, k]
                    for k in range(I):
                        dXv[n, t, k] += dazv[j] * Wv[j, H + k] + darv[j] * Wv[H + j, H + k]
    return dW, db, dX


def lstm_forward(W, b, X):
    cdef const double[:, ::1] Wv = np.ascontiguousarray(W)
    cdef const double[::1] bv = np.ascontiguousarray(b)
    cdef const double[:, :, ::1] Xv = np.ascontiguousarray(X)
    cdef Py_ssize_t B = Xv.shape[0], T = Xv.shape[1], I = Xv.shape[2]
    cdef Py_ssize_t H = Wv.shape[0] // 4
    Hseq = np.zeros((B, T, H))
    C = np.zeros((B, T, H))
    GI = np.zeros((B, T, H))
    GF = np.zeros((B, T, H))
    GG = np.zeros((B, T, H))
    GO = np.zeros((B, T, H))
    cdef double[:, :, ::1] Hv = Hseq, Cv = C
    cdef double[:, :, ::1] GIv = GI, GFv = GF, GGv = GG, GOv = GO
    cdef Py_ssize_t n, t, j, k
    cdef double ai, af, ag, ao, cp, hp, x
    with nogil:
        for n in range(B):
            for t in range(T):
                for j in range(H):
                    ai = bv[j]
                    af = bv[H + j]
                    ag = bv[2 * H + j]
                    ao = bv[3 * H + j]
                    if t > 0:
                        for k in range(H):
                            hp = Hv[n, t - 1, k]
                            ai += Wv[j, k] * hp
                            af += Wv[H + j, k] * hp
                            ag += Wv[2 * H + j, k] * hp
                            ao += Wv[3 * H + j, k] * hp
                    for k in range(I):
                        x = Xv[n, t, k]
                        ai += Wv[j, H + k] * x
                        af += Wv[H + j, H + k] * x
                        ag += Wv[2 * H + j, H + k] * x
                        ao += Wv[3 * H + j, H + k] * x
                    GIv[n, t, j] = _sigmoid(ai)
                    GFv[n, t, j] = _sigmoid(af)
                    GGv[n, t, j] = tanh(ag)
                    GOv[n, t, j] = _sigmoid(ao)
                    cp = Cv[n, t - 1, j] if t > 0 else 0.0
                    Cv[n, t, j] = GFv[n, t, j] * cp + GIv[n, t, j] * GGv[n, t, j]
                    Hv[n, t, j] = GOv[n, t, j] * tanh(Cv[n, t, j])
    return Hseq, C, GI, GF, GG, GO


def lstm_backward(W, b, X, cache, dH):
    cdef const double[:, ::1] Wv = np.ascontiguousarray(W)
    cdef const double[:, :, ::1] Xv = np.ascontiguousarray(X)
    cdef const double[:, :, ::1] Hv = np.ascontiguousarray(cache[0])
    cdef const double[:, :, ::1] Cv = np.ascontiguousarray(cache[1])
    cdef const double[:, :, ::1] GIv = np.ascontiguousarray(cache[2])
    cdef const double[:, :, ::1] GFv = np.ascontiguousarray(cache[3])
    cdef const double[:, :, ::1] GGv = np.ascontiguousarray(cache[4])
    cdef const double[:, :, ::1] GOv = np.ascontiguousarray(cache[5])
    cdef const double[:, :, ::1] dHv = np.ascontiguousarray(dH)
    cdef Py_ssize_t B = Xv.shape[0], T = Xv.shape[1], I = Xv.shape[2]
    cdef Py_ssize_t H = Wv.shape[0] // 4
    dW = np.zeros((4 * H, H + I))
    db = np.zeros(4 * H)
    dX = np.zeros((B, T, I))
    carry_h = np.zeros(H)
    carry_c = np.zeros(H)
    da = np.zeros(4 * H)
    cdef double[:, ::1] dWv = dW
    cdef double[::1] dbv = db
    cdef double[:, :, ::1] dXv = dX
    cdef double[::1] chv = carry_h, ccv = carry_c, dav = da
    cdef Py_ssize_t n, t, j, k, g
    cdef double dh, dc, tc, gi, gf, gg, go, cp, val
    with nogil:
        for n in range(B):
            for j in range(H):
                chv[j] = 0.0
                ccv[j] = 0.0
            for t in range(T - 1, -1, -1):
                for j in range(H):
                    gi = GIv[n, t, j]
                    gf = GFv[n, t, j]
                    gg = GGv[n, t, j]
                    go = GOv[n, t, j]
                    tc = tanh(Cv[n, t, j])
                    cp = Cv[n, t - 1, j] if t > 0 else 0.0
                    dh = dHv[n, t, j] + chv[j]
                    dc = dh * go * (1.0 - tc * tc) + ccv[j]
                    dav[j] = (dc * gg) * gi * (1.0 - gi)
                    dav[H + j] = (dc * cp) * gf * (1.0 - gf)
                    dav[2 * H + j] = (dc * gi) * (1.0 - gg * gg)
                    dav[3 * H + j] = (dh * tc) * go * (1.0 - go)
                    ccv[j] = dc * gf
                for j in range(H):
                    chv[j] = 0.0
                for g in range(4):
                    for j in range(H):
                        val = dav[g * H + j]
                        dbv[g * H + j] += val
                        if t > 0:
                            for k in range(H):
                                dWv[g * H + j, k] += val * Hv[n, t - 1, k]
                        for k in range(I):
                            dWv[g * H + j, H + k] += val * Xv[n, t, k]
                        for k in range(H):
                            chv[k] += val * Wv[g * H + j, k]
                        for k in range(I):
                            dXv[n, t, k] += val * Wv[g * H + j, H + k]
    return dW, db, dX
