# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fused recurrent-cell kernels.

Same signatures and semantics as ``_fallback``; loops run row by row so a
batch row's result never depends on the other rows.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, tanh

cnp.import_array()


cdef inline double _sigmoid(double x) nogil:
    cdef double e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def slstm_forward(double[:, :, ::1] pre, double[:, ::1] c, double[:, ::1] n, double[:, ::1] m):
    cdef Py_ssize_t B = pre.shape[0], d = pre.shape[2], b, j
    h_arr = np.empty((B, d))
    c_arr = np.empty((B, d))
    n_arr = np.empty((B, d))
    m_arr = np.empty((B, d))
    cdef double[:, ::1] h = h_arr, cn = c_arr, nn = n_arr, mn = m_arr
    cdef double zt, it, ft, ot, mnew, ig, fg, z, o
    with nogil:
        for b in range(B):
            for j in range(d):
                zt = pre[b, 0, j]
                it = pre[b, 1, j]
                ft = pre[b, 2, j]
                ot = pre[b, 3, j]
                mnew = ft + m[b, j]
                if it > mnew:
                    mnew = it
                ig = exp(it - mnew)
                fg = exp(ft + m[b, j] - mnew)
                z = tanh(zt)
                o = _sigmoid(ot)
                cn[b, j] = fg * c[b, j] + ig * z
                nn[b, j] = fg * n[b, j] + ig
                mn[b, j] = mnew
                h[b, j] = o * (cn[b, j] / nn[b, j])
    return h_arr, c_arr, n_arr, m_arr


def slstm_backward(double[:, :, ::1] pre, double[:, ::1] c, double[:, ::1] n, double[:, ::1] m,
                   double[:, ::1] gh, double[:, ::1] gc, double[:, ::1] gn):
    cdef Py_ssize_t B = pre.shape[0], d = pre.shape[2], b, j
    gpre_arr = np.empty((B, 4, d))
    gc_arr = np.empty((B, d))
    gn_arr = np.empty((B, d))
    cdef double[:, :, ::1] gpre = gpre_arr
    cdef double[:, ::1] gcp = gc_arr, gnp = gn_arr
    cdef double zt, it, ft, ot, mnew, ig, fg, z, o, cnew, nnew, ratio, gct, gnt
    with nogil:
        for b in range(B):
            for j in range(d):
                zt = pre[b, 0, j]
                it = pre[b, 1, j]
                ft = pre[b, 2, j]
                ot = pre[b, 3, j]
                mnew = ft + m[b, j]
                if it > mnew:
                    mnew = it
                ig = exp(it - mnew)
                fg = exp(ft + m[b, j] - mnew)
                z = tanh(zt)
                o = _sigmoid(ot)
                cnew = fg * c[b, j] + ig * z
                nnew = fg * n[b, j] + ig
                ratio = cnew / nnew
                gct = gc[b, j] + gh[b, j] * o / nnew
                gnt = gn[b, j] - gh[b, j] * o * ratio / nnew
                gpre[b, 0, j] = gct * ig * (1.0 - z * z)
                gpre[b, 1, j] = (gct * z + gnt) * ig
                gpre[b, 2, j] = (gct * c[b, j] + gnt * n[b, j]) * fg
                gpre[b, 3, j] = gh[b, j] * ratio * o * (1.0 - o)
                gcp[b, j] = gct * fg
                gnp[b, j] = gnt * fg
    return gpre_arr, gc_arr, gn_arr


def mlstm_forward(double[:, ::1] q, double[:, ::1] k, double[:, ::1] v,
                  double[:, ::1] ig, double[:, ::1] fg, double[:, ::1] og,
                  double[:, :, :, ::1] C, double[:, :, ::1] n, double[:, ::1] m):
    cdef Py_ssize_t B = ig.shape[0], H = ig.shape[1], dh = C.shape[2]
    cdef Py_ssize_t b, hd, a, e, base
    h_arr = np.empty((B, H * dh))
    C_arr = np.empty((B, H, dh, dh))
    n_arr = np.empty((B, H, dh))
    m_arr = np.empty((B, H))
    cdef double[:, ::1] h = h_arr, mn = m_arr
    cdef double[:, :, :, ::1] Cn = C_arr
    cdef double[:, :, ::1] nn = n_arr
    cdef double mnew, ig_, fg_, acc, den, floor_
    with nogil:
        for b in range(B):
            for hd in range(H):
                base = hd * dh
                mnew = fg[b, hd] + m[b, hd]
                if ig[b, hd] > mnew:
                    mnew = ig[b, hd]
                mn[b, hd] = mnew
                ig_ = exp(ig[b, hd] - mnew)
                fg_ = exp(fg[b, hd] + m[b, hd] - mnew)
                den = 0.0
                for e in range(dh):
                    nn[b, hd, e] = fg_ * n[b, hd, e] + ig_ * k[b, base + e]
                    den = den + nn[b, hd, e] * q[b, base + e]
                den = fabs(den)
                floor_ = exp(-mnew)
                if den < floor_:
                    den = floor_
                for a in range(dh):
                    acc = 0.0
                    for e in range(dh):
                        Cn[b, hd, a, e] = fg_ * C[b, hd, a, e] + ig_ * (v[b, base + a] * k[b, base + e])
                        acc = acc + Cn[b, hd, a, e] * q[b, base + e]
                    h[b, base + a] = _sigmoid(og[b, base + a]) * (acc / den)
    return h_arr, C_arr, n_arr, m_arr


def mlstm_backward(double[:, ::1] q, double[:, ::1] k, double[:, ::1] v,
                   double[:, ::1] ig, double[:, ::1] fg, double[:, ::1] og,
                   double[:, :, :, ::1] C, double[:, :, ::1] n, double[:, ::1] m,
                   double[:, ::1] gh, double[:, :, :, ::1] gC, double[:, :, ::1] gn):
    cdef Py_ssize_t B = ig.shape[0], H = ig.shape[1], dh = C.shape[2]
    cdef Py_ssize_t b, hd, a, e, base
    gq_arr = np.zeros((B, H * dh))
    gk_arr = np.zeros((B, H * dh))
    gv_arr = np.zeros((B, H * dh))
    gig_arr = np.empty((B, H))
    gfg_arr = np.empty((B, H))
    gog_arr = np.empty((B, H * dh))
    gCp_arr = np.empty((B, H, dh, dh))
    gnp_arr = np.empty((B, H, dh))
    num_arr = np.empty(dh)
    gnum_arr = np.empty(dh)
    nnew_arr = np.empty(dh)
    gnt_arr = np.empty(dh)
    cdef double[:, ::1] gq = gq_arr, gk = gk_arr, gv = gv_arr, gig = gig_arr, gfg = gfg_arr, gog = gog_arr
    cdef double[:, :, :, ::1] gCp = gCp_arr
    cdef double[:, :, ::1] gnp = gnp_arr
    cdef double[::1] num = num_arr, gnum = gnum_arr, nnew = nnew_arr, gnt = gnt_arr
    cdef double mnew, ig_, fg_, acc, den_raw, den, floor_, o, ht, ght, gden, gden_raw, cnew, gct
    cdef double sum_f, sum_i, sign
    cdef bint use_abs
    with nogil:
        for b in range(B):
            for hd in range(H):
                base = hd * dh
                mnew = fg[b, hd] + m[b, hd]
                if ig[b, hd] > mnew:
                    mnew = ig[b, hd]
                ig_ = exp(ig[b, hd] - mnew)
                fg_ = exp(fg[b, hd] + m[b, hd] - mnew)
                den_raw = 0.0
                for e in range(dh):
                    nnew[e] = fg_ * n[b, hd, e] + ig_ * k[b, base + e]
                    den_raw = den_raw + nnew[e] * q[b, base + e]
                for a in range(dh):
                    acc = 0.0
                    for e in range(dh):
                        acc = acc + (fg_ * C[b, hd, a, e] + ig_ * (v[b, base + a] * k[b, base + e])) * q[b, base + e]
                    num[a] = acc
                floor_ = exp(-mnew)
                use_abs = fabs(den_raw) >= floor_
                den = fabs(den_raw) if use_abs else floor_
                gden = 0.0
                for a in range(dh):
                    o = _sigmoid(og[b, base + a])
                    ht = num[a] / den
                    gog[b, base + a] = gh[b, base + a] * ht * o * (1.0 - o)
                    ght = gh[b, base + a] * o
                    gnum[a] = ght / den
                    gden = gden - ght * num[a]
                gden = gden / (den * den)
                gden_raw = 0.0
                if use_abs:
                    sign = 1.0 if den_raw > 0 else (-1.0 if den_raw < 0 else 0.0)
                    gden_raw = gden * sign
                sum_f = 0.0
                sum_i = 0.0
                for e in range(dh):
                    gnt[e] = gn[b, hd, e] + gden_raw * q[b, base + e]
                    sum_f = sum_f + gnt[e] * n[b, hd, e]
                    sum_i = sum_i + gnt[e] * k[b, base + e]
                    gq[b, base + e] = gden_raw * nnew[e]
                    gk[b, base + e] = ig_ * gnt[e]
                    gnp[b, hd, e] = fg_ * gnt[e]
                for a in range(dh):
                    acc = 0.0
                    for e in range(dh):
                        cnew = fg_ * C[b, hd, a, e] + ig_ * (v[b, base + a] * k[b, base + e])
                        gct = gC[b, hd, a, e] + gnum[a] * q[b, base + e]
                        gq[b, base + e] += cnew * gnum[a]
                        sum_f = sum_f + gct * C[b, hd, a, e]
                        sum_i = sum_i + gct * (v[b, base + a] * k[b, base + e])
                        acc = acc + gct * k[b, base + e]
                        gk[b, base + e] += ig_ * gct * v[b, base + a]
                        gCp[b, hd, a, e] = fg_ * gct
                    gv[b, base + a] = ig_ * acc
                gfg[b, hd] = sum_f * fg_
                gig[b, hd] = sum_i * ig_
    return gq_arr, gk_arr, gv_arr, gig_arr, gfg_arr, gog_arr, gCp_arr, gnp_arr


def lstm_forward(double[:, :, ::1] pre, double[:, ::1] c):
    cdef Py_ssize_t B = pre.shape[0], d = pre.shape[2], b, j
    h_arr = np.empty((B, d))
    c_arr = np.empty((B, d))
    cdef double[:, ::1] h = h_arr, cn = c_arr
    cdef double i, f, g, o
    with nogil:
        for b in range(B):
            for j in range(d):
                i = _sigmoid(pre[b, 0, j])
                f = _sigmoid(pre[b, 1, j])
                g = tanh(pre[b, 2, j])
                o = _sigmoid(pre[b, 3, j])
                cn[b, j] = f * c[b, j] + i * g
                h[b, j] = o * tanh(cn[b, j])
    return h_arr, c_arr


def lstm_backward(double[:, :, ::1] pre, double[:, ::1] c, double[:, ::1] gh, double[:, ::1] gc):
    cdef Py_ssize_t B = pre.shape[0], d = pre.shape[2], b, j
    gpre_arr = np.empty((B, 4, d))
    gc_arr = np.empty((B, d))
    cdef double[:, :, ::1] gpre = gpre_arr
    cdef double[:, ::1] gcp = gc_arr
    cdef double i, f, g, o, tc, gct
    with nogil:
        for b in range(B):
            for j in range(d):
                i = _sigmoid(pre[b, 0, j])
                f = _sigmoid(pre[b, 1, j])
                g = tanh(pre[b, 2, j])
                o = _sigmoid(pre[b, 3, j])
                tc = tanh(f * c[b, j] + i * g)
                gct = gc[b, j] + gh[b, j] * o * (1.0 - tc * tc)
                gpre[b, 0, j] = gct * g * i * (1.0 - i)
                gpre[b, 1, j] = gct * c[b, j] * f * (1.0 - f)
                gpre[b, 2, j] = gct * i * (1.0 - g * g)
                gpre[b, 3, j] = gh[b, j] * tc * o * (1.0 - o)
                gcp[b, j] = gct * f
    return gpre_arr, gc_arr
