"""Numpy kernel backend: im2col gathers plus one BLAS matmul per pass.

All functions take C-contiguous float64 batched arrays (B, C, H, W) and are
shape-trusting; validation lives in the public ops layer. The transposed
convolution is the exact adjoint of the strided convolution linear map
(scatter through the kernel at stride 2, crop 1 from each border).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

K = 4
S = 2
P = 1


def _im2col(xp: np.ndarray, oh: int, ow: int) -> np.ndarray:
    """(B, C, Hp, Wp) padded input -> (B*oh*ow, C*K*K) window matrix."""
    b, c = xp.shape[:2]
    win = sliding_window_view(xp, (K, K), axis=(2, 3))[:, :, ::S, ::S]
    win = win[:, :, :oh, :ow]                      # (B, C, oh, ow, K, K)
    col = win.transpose(0, 2, 3, 1, 4, 5)          # (B, oh, ow, C, K, K)
    return np.ascontiguousarray(col).reshape(b * oh * ow, c * K * K)


def _col2im(col6: np.ndarray, height: int, width: int) -> np.ndarray:
    """Scatter-add (B, C, oh, ow, K, K) windows back onto a (B, C, H, W) grid.

    height/width are the unpadded target sizes; window (i, j) lands at
    (S*i + ki - P, S*j + kj - P).
    """
    b, c, oh, ow = col6.shape[:4]
    grid = np.zeros((b, c, height + 2 * P, width + 2 * P), dtype=col6.dtype)
    for ki in range(K):
        for kj in range(K):
            grid[:, :, ki:ki + S * oh:S, kj:kj + S * ow:S] += col6[..., ki, kj]
    return np.ascontiguousarray(grid[:, :, P:P + height, P:P + width])


def conv_fwd(x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> np.ndarray:
    b, ci, h, wd = x.shape
    co = w.shape[0]
    oh, ow = h // S, wd // S
    xp = np.pad(x, ((0, 0), (0, 0), (P, P), (P, P)))
    col = _im2col(xp, oh, ow)
    y = col @ w.reshape(co, -1).T                  # (B*oh*ow, Co)
    y = y.reshape(b, oh, ow, co).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(y) + bias[None, :, None, None]


def conv_bwd(x: np.ndarray, w: np.ndarray, gy: np.ndarray):
    b, ci, h, wd = x.shape
    co = w.shape[0]
    oh, ow = h // S, wd // S
    gb = gy.sum(axis=(0, 2, 3))
    xp = np.pad(x, ((0, 0), (0, 0), (P, P), (P, P)))
    col = _im2col(xp, oh, ow)
    g = np.ascontiguousarray(gy.transpose(0, 2, 3, 1)).reshape(b * oh * ow, co)
    gw = (g.T @ col).reshape(co, ci, K, K)
    gcol = (g @ w.reshape(co, -1)).reshape(b, oh, ow, ci, K, K)
    gx = _col2im(gcol.transpose(0, 3, 1, 2, 4, 5), h, wd)
    return gx, gw, gb


def deconv_fwd(x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> np.ndarray:
    b, ci, h, wd = x.shape
    co = w.shape[0]
    # wp maps input channels to (co, ki, kj) scatter coefficients
    wp = np.ascontiguousarray(w.transpose(0, 2, 3, 1)).reshape(co * K * K, ci)
    cols = np.matmul(wp, x.reshape(b, ci, h * wd))          # (B, Co*K*K, h*w)
    col6 = cols.reshape(b, co, K, K, h, wd).transpose(0, 1, 4, 5, 2, 3)
    y = _col2im(np.ascontiguousarray(col6), S * h, S * wd)
    return y + bias[None, :, None, None]


def deconv_bwd(x: np.ndarray, w: np.ndarray, gy: np.ndarray):
    b, ci, h, wd = x.shape
    co = w.shape[0]
    gb = gy.sum(axis=(0, 2, 3))
    gyp = np.pad(gy, ((0, 0), (0, 0), (P, P), (P, P)))
    win = sliding_window_view(gyp, (K, K), axis=(2, 3))[:, :, ::S, ::S]
    win = win[:, :, :h, :wd]                                # (B, Co, h, w, K, K)
    gcols = np.ascontiguousarray(win.transpose(0, 1, 4, 5, 2, 3))
    gcols = gcols.reshape(b, co * K * K, h * wd)
    wp = np.ascontiguousarray(w.transpose(0, 2, 3, 1)).reshape(co * K * K, ci)
    gx = np.matmul(wp.T, gcols).reshape(b, ci, h, wd)
    gwp = np.einsum("bkm,bcm->kc", gcols, x.reshape(b, ci, h * wd))
    gw = gwp.reshape(co, K, K, ci).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(gx), np.ascontiguousarray(gw), gb
