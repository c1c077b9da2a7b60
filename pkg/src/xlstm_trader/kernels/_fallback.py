"""Pure numpy implementation of the fused recurrent-cell kernels.

Shapes: ``B`` batch rows, ``d`` cell width, ``H`` heads of width ``dh``.
Backward functions recompute the forward intermediates from the inputs
instead of caching them. The stabiliser ``m`` is treated as a constant in
the backward pass: the cell outputs do not depend on it.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def slstm_forward(pre, c, n, m):
    """pre: (B, 4, d) ordered z, i, f, o preactivations."""
    zt, it, ft, ot = pre[:, 0], pre[:, 1], pre[:, 2], pre[:, 3]
    m_new = np.maximum(ft + m, it)
    i_g = np.exp(it - m_new)
    f_g = np.exp(ft + m - m_new)
    z = np.tanh(zt)
    o = expit(ot)
    c_new = f_g * c + i_g * z
    n_new = f_g * n + i_g
    h = o * (c_new / n_new)
    return h, c_new, n_new, m_new


def slstm_backward(pre, c, n, m, gh, gc, gn):
    zt, it, ft, ot = pre[:, 0], pre[:, 1], pre[:, 2], pre[:, 3]
    m_new = np.maximum(ft + m, it)
    i_g = np.exp(it - m_new)
    f_g = np.exp(ft + m - m_new)
    z = np.tanh(zt)
    o = expit(ot)
    c_new = f_g * c + i_g * z
    n_new = f_g * n + i_g
    ratio = c_new / n_new
    gc_tot = gc + gh * o / n_new
    gn_tot = gn - gh * o * ratio / n_new
    gpre = np.empty_like(pre)
    gpre[:, 0] = gc_tot * i_g * (1.0 - z * z)
    gpre[:, 1] = (gc_tot * z + gn_tot) * i_g
    gpre[:, 2] = (gc_tot * c + gn_tot * n) * f_g
    gpre[:, 3] = gh * ratio * o * (1.0 - o)
    return gpre, gc_tot * f_g, gn_tot * f_g


def mlstm_forward(q, k, v, ig, fg, og, C, n, m):
    """q, k, v, og: (B, d); ig, fg, m: (B, H); C: (B, H, dh, dh); n: (B, H, dh).

    ``k`` is expected to carry its 1/sqrt(dh) scale already.
    """
    B, H = ig.shape
    dh = q.shape[1] // H
    qh = q.reshape(B, H, dh)
    kh = k.reshape(B, H, dh)
    vh = v.reshape(B, H, dh)
    m_new = np.maximum(fg + m, ig)
    i_g = np.exp(ig - m_new)
    f_g = np.exp(fg + m - m_new)
    C_new = f_g[:, :, None, None] * C + i_g[:, :, None, None] * (vh[:, :, :, None] * kh[:, :, None, :])
    n_new = f_g[:, :, None] * n + i_g[:, :, None] * kh
    num = (C_new * qh[:, :, None, :]).sum(axis=-1)
    den_raw = (n_new * qh).sum(axis=-1)
    den = np.maximum(np.abs(den_raw), np.exp(-m_new))
    h_tilde = (num / den[:, :, None]).reshape(B, H * dh)
    h = expit(og) * h_tilde
    return h, C_new, n_new, m_new


def mlstm_backward(q, k, v, ig, fg, og, C, n, m, gh, gC, gn):
    B, H = ig.shape
    dh = q.shape[1] // H
    qh = q.reshape(B, H, dh)
    kh = k.reshape(B, H, dh)
    vh = v.reshape(B, H, dh)
    m_new = np.maximum(fg + m, ig)
    i_g = np.exp(ig - m_new)
    f_g = np.exp(fg + m - m_new)
    vk = vh[:, :, :, None] * kh[:, :, None, :]
    C_new = f_g[:, :, None, None] * C + i_g[:, :, None, None] * vk
    n_new = f_g[:, :, None] * n + i_g[:, :, None] * kh
    num = (C_new * qh[:, :, None, :]).sum(axis=-1)
    den_raw = (n_new * qh).sum(axis=-1)
    floor = np.exp(-m_new)
    use_abs = np.abs(den_raw) >= floor
    den = np.where(use_abs, np.abs(den_raw), floor)
    h_tilde = num / den[:, :, None]
    o = expit(og)

    gh = gh.reshape(B, H, dh)
    o3 = o.reshape(B, H, dh)
    gog = (gh * h_tilde * o3 * (1.0 - o3)).reshape(B, H * dh)
    ght = gh * o3
    gnum = ght / den[:, :, None]
    gden = -(ght * num).sum(axis=-1) / (den * den)
    gden_raw = np.where(use_abs, gden * np.sign(den_raw), 0.0)

    gC_tot = gC + gnum[:, :, :, None] * qh[:, :, None, :]
    gn_tot = gn + gden_raw[:, :, None] * qh
    gq = (C_new * gnum[:, :, :, None]).sum(axis=2) + gden_raw[:, :, None] * n_new

    gfg = ((gC_tot * C).sum(axis=(2, 3)) + (gn_tot * n).sum(axis=2)) * f_g
    gig = ((gC_tot * vk).sum(axis=(2, 3)) + (gn_tot * kh).sum(axis=2)) * i_g
    gv = i_g[:, :, None] * (gC_tot * kh[:, :, None, :]).sum(axis=3)
    gk = i_g[:, :, None] * ((gC_tot * vh[:, :, :, None]).sum(axis=2) + gn_tot)
    return (
        gq.reshape(B, H * dh),
        gk.reshape(B, H * dh),
        gv.reshape(B, H * dh),
        gig,
        gfg,
        gog,
        f_g[:, :, None, None] * gC_tot,
        f_g[:, :, None] * gn_tot,
    )


def lstm_forward(pre, c):
    """pre: (B, 4, d) ordered i, f, g, o preactivations."""
    i = expit(pre[:, 0])
    f = expit(pre[:, 1])
    g = np.tanh(pre[:, 2])
    o = expit(pre[:, 3])
    c_new = f * c + i * g
    h = o * np.tanh(c_new)
    return h, c_new


def lstm_backward(pre, c, gh, gc):
    i = expit(pre[:, 0])
    f = expit(pre[:, 1])
    g = np.tanh(pre[:, 2])
    o = expit(pre[:, 3])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    gc_tot = gc + gh * o * (1.0 - tc * tc)
    gpre = np.empty_like(pre)
    gpre[:, 0] = gc_tot * g * i * (1.0 - i)
    gpre[:, 1] = gc_tot * c * f * (1.0 - f)
    gpre[:, 2] = gc_tot * i * (1.0 - g * g)
    gpre[:, 3] = gh * tc * o * (1.0 - o)
    return gpre, gc_tot * f
