# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled recurrence kernels (hot backend).

Same contract as _lstm_np: packed gate order forget | input | output |
candidate, time-major (T, B, *) sequences, zero initial states. Matrix
products go through BLAS dgemm; the per-timestep gate math is fused into
plain C loops.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

BACKEND_NAME = "cython"


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef void _rm_gemm(char transa, char transb, int m, int n, int k,
                   double alpha, double* a, int lda, double* b, int ldb,
                   double beta, double* c, int ldc) noexcept nogil:
    # Row-major C(m,n) = alpha*op(A)*op(B) + beta*C via the column-major
    # identity C^T = op(B)^T op(A)^T; leading dims are the stored row widths.
    dgemm(&transb, &transa, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


def lstm_layer_forward(cnp.ndarray[double, ndim=3] x_seq,
                       cnp.ndarray[double, ndim=2] w,
                       cnp.ndarray[double, ndim=2] u,
                       cnp.ndarray[double, ndim=1] b):
    cdef int T = x_seq.shape[0]
    cdef int B = x_seq.shape[1]
    cdef int I = x_seq.shape[2]
    cdef int H = u.shape[0]
    cdef int H4 = 4 * H

    cdef cnp.ndarray[double, ndim=3] gates = np.empty((T, B, H4))
    cdef cnp.ndarray[double, ndim=3] h_seq = np.empty((T, B, H))
    cdef cnp.ndarray[double, ndim=3] c_seq = np.empty((T, B, H))
    cdef cnp.ndarray[double, ndim=3] tanhc_seq = np.empty((T, B, H))

    cdef double* xp = <double*> x_seq.data
    cdef double* wp = <double*> w.data
    cdef double* up = <double*> u.data
    cdef double* bp = <double*> b.data
    cdef double* gp = <double*> gates.data
    cdef double* hp = <double*> h_seq.data
    cdef double* cp = <double*> c_seq.data
    cdef double* tp = <double*> tanhc_seq.data

    cdef int t, r, j
    cdef double* z
    cdef double* hprev
    cdef double* cprev
    cdef double f, i_, o, g, c

    with nogil:
        # Bias prefill, then one big GEMM for the input projections.
        for r in range(T * B):
            for j in range(H4):
                gp[r * H4 + j] = bp[j]
        _rm_gemm(b'N', b'N', T * B, H4, I, 1.0, xp, I, wp, H4, 1.0, gp, H4)

        for t in range(T):
            z = gp + t * B * H4
            if t > 0:
                hprev = hp + (t - 1) * B * H
                cprev = cp + (t - 1) * B * H
                _rm_gemm(b'N', b'N', B, H4, H, 1.0, hprev, H, up, H4, 1.0, z, H4)
            for r in range(B):
                for j in range(H):
                    f = _sigmoid(z[r * H4 + j])
                    i_ = _sigmoid(z[r * H4 + H + j])
                    o = _sigmoid(z[r * H4 + 2 * H + j])
                    g = tanh(z[r * H4 + 3 * H + j])
                    if t > 0:
                        c = f * cprev[r * H + j] + i_ * g
                    else:
                        c = i_ * g
                    z[r * H4 + j] = f
                    z[r * H4 + H + j] = i_
                    z[r * H4 + 2 * H + j] = o
                    z[r * H4 + 3 * H + j] = g
                    cp[(t * B + r) * H + j] = c
                    c = tanh(c)
                    tp[(t * B + r) * H + j] = c
                    hp[(t * B + r) * H + j] = o * c

    return h_seq, c_seq, tanhc_seq, gates


def lstm_layer_backward(cnp.ndarray[double, ndim=3] x_seq,
                        cnp.ndarray[double, ndim=2] w,
                        cnp.ndarray[double, ndim=2] u,
                        cnp.ndarray[double, ndim=3] gates,
                        cnp.ndarray[double, ndim=3] c_seq,
                        cnp.ndarray[double, ndim=3] tanhc_seq,
                        cnp.ndarray[double, ndim=3] h_seq,
                        cnp.ndarray[double, ndim=3] dh_seq):
    cdef int T = x_seq.shape[0]
    cdef int B = x_seq.shape[1]
    cdef int I = x_seq.shape[2]
    cdef int H = u.shape[0]
    cdef int H4 = 4 * H

    cdef cnp.ndarray[double, ndim=3] dz = np.empty((T, B, H4))
    cdef cnp.ndarray[double, ndim=3] dx_seq = np.empty((T, B, I))
    cdef cnp.ndarray[double, ndim=2] dw = np.zeros((I, H4))
    cdef cnp.ndarray[double, ndim=2] du = np.zeros((H, H4))
    cdef cnp.ndarray[double, ndim=1] db = np.zeros(H4)
    cdef cnp.ndarray[double, ndim=2] dh_carry = np.zeros((B, H))
    cdef cnp.ndarray[double, ndim=2] dc_carry = np.zeros((B, H))

    cdef double* xp = <double*> x_seq.data
    cdef double* wp = <double*> w.data
    cdef double* up = <double*> u.data
    cdef double* gp = <double*> gates.data
    cdef double* cp = <double*> c_seq.data
    cdef double* tp = <double*> tanhc_seq.data
    cdef double* hp = <double*> h_seq.data
    cdef double* dhp = <double*> dh_seq.data
    cdef double* dzp = <double*> dz.data
    cdef double* dxp = <double*> dx_seq.data
    cdef double* dwp = <double*> dw.data
    cdef double* dup = <double*> du.data
    cdef double* dbp = <double*> db.data
    cdef double* dhc = <double*> dh_carry.data
    cdef double* dcc = <double*> dc_carry.data

    cdef int t, r, j
    cdef double* zt
    cdef double* dzt
    cdef double f, i_, o, g, tc, cprev, dh, dc

    with nogil:
        for t in range(T - 1, -1, -1):
            zt = gp + t * B * H4
            dzt = dzp + t * B * H4
            for r in range(B):
                for j in range(H):
                    f = zt[r * H4 + j]
                    i_ = zt[r * H4 + H + j]
                    o = zt[r * H4 + 2 * H + j]
                    g = zt[r * H4 + 3 * H + j]
                    tc = tp[(t * B + r) * H + j]
                    if t > 0:
                        cprev = cp[((t - 1) * B + r) * H + j]
                    else:
                        cprev = 0.0
                    dh = dhp[(t * B + r) * H + j] + dhc[r * H + j]
                    dc = dcc[r * H + j] + dh * o * (1.0 - tc * tc)
                    dcc[r * H + j] = dc * f
                    dzt[r * H4 + j] = dc * cprev * f * (1.0 - f)
                    dzt[r * H4 + H + j] = dc * g * i_ * (1.0 - i_)
                    dzt[r * H4 + 2 * H + j] = dh * tc * o * (1.0 - o)
                    dzt[r * H4 + 3 * H + j] = dc * i_ * (1.0 - g * g)
            _rm_gemm(b'N', b'T', B, H, H4, 1.0, dzt, H4, up, H4, 0.0, dhc, H)
            if t > 0:
                # du += h_{t-1}^T dz_t
                _rm_gemm(b'T', b'N', H, H4, B, 1.0, hp + (t - 1) * B * H, H,
                         dzt, H4, 1.0, dup, H4)

        _rm_gemm(b'T', b'N', I, H4, T * B, 1.0, xp, I, dzp, H4, 0.0, dwp, H4)
        _rm_gemm(b'N', b'T', T * B, I, H4, 1.0, dzp, H4, wp, H4, 0.0, dxp, I)
        for r in range(T * B):
            for j in range(H4):
                dbp[j] += dzp[r * H4 + j]

    return dx_seq, dw, du, db
