# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend: C im2col/col2im gathers around BLAS dgemm.

Same contracts as the numpy backend (_npkernels): batched float64 arrays
(B, C, H, W), kernel 4x4, stride 2, padding 1, transposed convolution as
the exact adjoint (scatter then crop). Single-threaded and deterministic:
every output cell is written by exactly one sequential accumulation.
"""

import numpy as np

from scipy.linalg.cython_blas cimport dgemm

cdef int K = 4
cdef int S = 2
cdef int P = 1


# Row-major matmul wrappers over column-major dgemm. Shapes in comments are
# row-major; the call swaps operands so BLAS sees the transposed picture.

cdef void _mm_nn(double* a, double* b, double* c,
                 int m, int k, int n, double beta) noexcept nogil:
    # C (m,n) = A (m,k) @ B (k,n) + beta*C
    cdef char cn = b'N'
    cdef double alpha = 1.0
    dgemm(&cn, &cn, &n, &m, &k, &alpha, b, &n, a, &k, &beta, c, &n)


cdef void _mm_nt(double* a, double* b, double* c,
                 int m, int k, int n, double beta) noexcept nogil:
    # C (m,n) = A (m,k) @ B^T + beta*C, with B stored (n,k)
    cdef char cn = b'N'
    cdef char ct = b'T'
    cdef double alpha = 1.0
    dgemm(&ct, &cn, &n, &m, &k, &alpha, b, &k, a, &k, &beta, c, &n)


cdef void _mm_tn(double* a, double* b, double* c,
                 int m, int k, int n, double beta) noexcept nogil:
    # C (m,n) = A^T @ B + beta*C, with A stored (k,m)
    cdef char cn = b'N'
    cdef char ct = b'T'
    cdef double alpha = 1.0
    dgemm(&cn, &ct, &n, &m, &k, &alpha, b, &n, a, &m, &beta, c, &n)


cdef void _pad1(double[:, :, ::1] src, double[:, :, ::1] dst) noexcept nogil:
    # dst (C, H+2, W+2) zero-padded copy of src (C, H, W)
    cdef Py_ssize_t c, i, j
    cdef Py_ssize_t nc = src.shape[0], h = src.shape[1], w = src.shape[2]
    dst[:, :, :] = 0.0
    for c in range(nc):
        for i in range(h):
            for j in range(w):
                dst[c, i + 1, j + 1] = src[c, i, j]


cdef void _im2col(double[:, :, ::1] xpad, double[:, ::1] col,
                  Py_ssize_t oh, Py_ssize_t ow) noexcept nogil:
    # col[(c*K+ki)*K+kj, i*ow+j] = xpad[c, S*i+ki, S*j+kj]
    cdef Py_ssize_t c, ki, kj, i, j, r
    cdef Py_ssize_t nc = xpad.shape[0]
    for c in range(nc):
        for ki in range(K):
            for kj in range(K):
                r = (c * K + ki) * K + kj
                for i in range(oh):
                    for j in range(ow):
                        col[r, i * ow + j] = xpad[c, S * i + ki, S * j + kj]


cdef void _col2im(double[:, ::1] col, double[:, :, ::1] gpad,
                  Py_ssize_t oh, Py_ssize_t ow) noexcept nogil:
    # scatter-add transpose of _im2col; gpad must be pre-zeroed
    cdef Py_ssize_t c, ki, kj, i, j, r
    cdef Py_ssize_t nc = gpad.shape[0]
    for c in range(nc):
        for ki in range(K):
            for kj in range(K):
                r = (c * K + ki) * K + kj
                for i in range(oh):
                    for j in range(ow):
                        gpad[c, S * i + ki, S * j + kj] += col[r, i * ow + j]


cdef void _crop1(double[:, :, ::1] src, double[:, :, ::1] dst) noexcept nogil:
    cdef Py_ssize_t c, i, j
    cdef Py_ssize_t nc = dst.shape[0], h = dst.shape[1], w = dst.shape[2]
    for c in range(nc):
        for i in range(h):
            for j in range(w):
                dst[c, i, j] = src[c, i + 1, j + 1]


def _permute_w(w):
    """(Co, Ci, K, K) -> (Co*K*K, Ci) scatter coefficient matrix."""
    co, ci = w.shape[0], w.shape[1]
    return np.ascontiguousarray(w.transpose(0, 2, 3, 1)).reshape(co * K * K, ci)


def conv_fwd(double[:, :, :, ::1] x, double[:, :, :, ::1] w, double[::1] bias):
    cdef Py_ssize_t nb = x.shape[0], ci = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t co = w.shape[0]
    cdef Py_ssize_t oh = h // S, ow = wd // S, m = oh * ow, kdim = ci * K * K
    y_arr = np.empty((nb, co, oh, ow), dtype=np.float64)
    xpad_arr = np.empty((ci, h + 2 * P, wd + 2 * P), dtype=np.float64)
    col_arr = np.empty((kdim, m), dtype=np.float64)
    cdef double[:, :, :, ::1] y = y_arr
    cdef double[:, :, ::1] xpad = xpad_arr
    cdef double[:, ::1] col = col_arr
    cdef Py_ssize_t b, c, i
    for b in range(nb):
        _pad1(x[b], xpad)
        _im2col(xpad, col, oh, ow)
        _mm_nn(&w[0, 0, 0, 0], &col[0, 0], &y[b, 0, 0, 0],
               <int>co, <int>kdim, <int>m, 0.0)
        for c in range(co):
            for i in range(m):
                y[b, c, i // ow, i % ow] += bias[c]
    return y_arr


def conv_bwd(double[:, :, :, ::1] x, double[:, :, :, ::1] w,
             double[:, :, :, ::1] gy):
    cdef Py_ssize_t nb = x.shape[0], ci = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t co = w.shape[0]
    cdef Py_ssize_t oh = h // S, ow = wd // S, m = oh * ow, kdim = ci * K * K
    gx_arr = np.empty((nb, ci, h, wd), dtype=np.float64)
    gw_arr = np.zeros((co, ci, K, K), dtype=np.float64)
    gb_arr = np.zeros(co, dtype=np.float64)
    xpad_arr = np.empty((ci, h + 2 * P, wd + 2 * P), dtype=np.float64)
    gpad_arr = np.empty((ci, h + 2 * P, wd + 2 * P), dtype=np.float64)
    col_arr = np.empty((kdim, m), dtype=np.float64)
    gcol_arr = np.empty((kdim, m), dtype=np.float64)
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef double[:, :, ::1] xpad = xpad_arr
    cdef double[:, :, ::1] gpad = gpad_arr
    cdef double[:, ::1] col = col_arr
    cdef double[:, ::1] gcol = gcol_arr
    cdef Py_ssize_t b, c, i, j
    for b in range(nb):
        for c in range(co):
            for i in range(oh):
                for j in range(ow):
                    gb[c] += gy[b, c, i, j]
        _pad1(x[b], xpad)
        _im2col(xpad, col, oh, ow)
        # gw (Co, kdim) += gy[b] (Co, m) @ col^T
        _mm_nt(&gy[b, 0, 0, 0], &col[0, 0], &gw[0, 0, 0, 0],
               <int>co, <int>m, <int>kdim, 1.0)
        # gcol (kdim, m) = w^T (kdim, Co) @ gy[b]
        _mm_tn(&w[0, 0, 0, 0], &gy[b, 0, 0, 0], &gcol[0, 0],
               <int>kdim, <int>co, <int>m, 0.0)
        gpad[:, :, :] = 0.0
        _col2im(gcol, gpad, oh, ow)
        _crop1(gpad, gx[b])
    return gx_arr, gw_arr, gb_arr


def deconv_fwd(double[:, :, :, ::1] x, w_arr, double[::1] bias):
    cdef Py_ssize_t nb = x.shape[0], ci = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t co = w_arr.shape[0]
    cdef Py_ssize_t m = h * wd, kdim = co * K * K
    cdef Py_ssize_t yh = S * h, yw = S * wd
    p_arr = _permute_w(np.asarray(w_arr))
    y_arr = np.empty((nb, co, yh, yw), dtype=np.float64)
    ypad_arr = np.empty((co, yh + 2 * P, yw + 2 * P), dtype=np.float64)
    col_arr = np.empty((kdim, m), dtype=np.float64)
    cdef double[:, ::1] p = p_arr
    cdef double[:, :, :, ::1] y = y_arr
    cdef double[:, :, ::1] ypad = ypad_arr
    cdef double[:, ::1] col = col_arr
    cdef double[:, :, ::1] xb
    cdef Py_ssize_t b, c, i, j
    for b in range(nb):
        xb = x[b]
        # col (Co*K*K, m) = P @ x[b] (Ci, m)
        _mm_nn(&p[0, 0], &xb[0, 0, 0], &col[0, 0],
               <int>kdim, <int>ci, <int>m, 0.0)
        ypad[:, :, :] = 0.0
        _col2im(col, ypad, h, wd)
        _crop1(ypad, y[b])
        for c in range(co):
            for i in range(yh):
                for j in range(yw):
                    y[b, c, i, j] += bias[c]
    return y_arr


def deconv_bwd(double[:, :, :, ::1] x, w_arr, double[:, :, :, ::1] gy):
    cdef Py_ssize_t nb = x.shape[0], ci = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t co = w_arr.shape[0]
    cdef Py_ssize_t m = h * wd, kdim = co * K * K
    cdef Py_ssize_t yh = S * h, yw = S * wd
    p_arr = _permute_w(np.asarray(w_arr))
    gx_arr = np.empty((nb, ci, h, wd), dtype=np.float64)
    gwp_arr = np.zeros((kdim, ci), dtype=np.float64)
    gb_arr = np.zeros(co, dtype=np.float64)
    gypad_arr = np.empty((co, yh + 2 * P, yw + 2 * P), dtype=np.float64)
    gcol_arr = np.empty((kdim, m), dtype=np.float64)
    cdef double[:, ::1] p = p_arr
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef double[:, ::1] gwp = gwp_arr
    cdef double[::1] gb = gb_arr
    cdef double[:, :, ::1] gypad = gypad_arr
    cdef double[:, ::1] gcol = gcol_arr
    cdef double[:, :, ::1] xb, gxb
    cdef Py_ssize_t b, c, i, j
    for b in range(nb):
        for c in range(co):
            for i in range(yh):
                for j in range(yw):
                    gb[c] += gy[b, c, i, j]
        _pad1(gy[b], gypad)
        _im2col(gypad, gcol, h, wd)
        xb = x[b]
        gxb = gx[b]
        # gx[b] (Ci, m) = P^T @ gcol
        _mm_tn(&p[0, 0], &gcol[0, 0], &gxb[0, 0, 0],
               <int>ci, <int>kdim, <int>m, 0.0)
        # gwp (Co*K*K, Ci) += gcol @ x[b]^T
        _mm_nt(&gcol[0, 0], &xb[0, 0, 0], &gwp[0, 0],
               <int>kdim, <int>m, <int>ci, 1.0)
    gw_arr = gwp_arr.reshape(co, K, K, ci).transpose(0, 3, 1, 2)
    return gx_arr, np.ascontiguousarray(gw_arr), gb_arr
