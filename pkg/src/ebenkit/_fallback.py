"""Pure-Python kernels (numpy only), used when the compiled module is absent.

Same signatures and semantics as ``_kernels``.  Results agree to rounding,
not bit-for-bit, because summation order differs.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv1d(x, w, bias, stride=1, dilation=1, pad_left=0, pad_right=0, groups=1):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    c_in, t_in = x.shape
    c_out, cig, ksz = w.shape
    if stride < 1 or dilation < 1 or groups < 1:
        raise ValueError("stride, dilation and groups must be positive")
    if c_in != cig * groups or c_out % groups:
        raise ValueError("channel/group mismatch")
    span = dilation * (ksz - 1) + 1
    t_out = (t_in + pad_left + pad_right - span) // stride + 1
    if t_out <= 0:
        return np.zeros((c_out, 0))
    need = (t_out - 1) * stride + span
    xp = np.zeros((c_in, need))
    src = x[:, :max(0, need - pad_left)]
    xp[:, pad_left:pad_left + src.shape[1]] = src
    win = sliding_window_view(xp, span, axis=1)[:, ::stride, ::dilation]  # (C_in, T_out, K)
    cog = c_out // groups
    y = np.empty((c_out, t_out))
    for g in range(groups):
        xg = win[g * cig:(g + 1) * cig]
        wg = w[g * cog:(g + 1) * cog]
        y[g * cog:(g + 1) * cog] = np.einsum("ctk,ock->ot", xg, wg, optimize=True)
    if bias is not None:
        y += np.asarray(bias, dtype=np.float64)[:, None]
    return y


def conv_transpose1d(x, w, bias, stride, crop_left, out_len):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    c_in, t_in = x.shape
    c_out, wc_in, ksz = w.shape
    if wc_in != c_in:
        raise ValueError("channel mismatch")
    if stride < 1 or crop_left < 0 or out_len < 0:
        raise ValueError("stride must be positive; crop and output length non-negative")
    full = np.zeros((c_out, (t_in - 1) * stride + ksz + max(0, out_len + crop_left)))
    cols = np.einsum("ock,ct->okt", w, x, optimize=True)
    for k in range(ksz):
        full[:, k:k + stride * t_in:stride] += cols[:, k, :]
    y = full[:, crop_left:crop_left + out_len].copy()
    if y.shape[1] < out_len:
        y = np.pad(y, ((0, 0), (0, out_len - y.shape[1])))
    if bias is not None:
        y += np.asarray(bias, dtype=np.float64)[:, None]
    return y


def biquad_filter(b, a, x, zi):
    b0, b1, b2 = (float(v) for v in b)
    a1, a2 = float(a[1]), float(a[2])
    z1, z2 = float(zi[0]), float(zi[1])
    out = []
    append = out.append
    for xi in np.asarray(x, dtype=np.float64).tolist():
        yi = b0 * xi + z1
        z1 = b1 * xi - a1 * yi + z2
        z2 = b2 * xi - a2 * yi
        append(yi)
    return np.array(out, dtype=np.float64)
