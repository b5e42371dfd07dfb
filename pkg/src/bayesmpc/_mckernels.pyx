# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Monte Carlo inner loops.

Same contracts as ``bayesmpc._mckernels_py``; scalar loops instead of
vectorized numpy, O(T * (T + m)) scratch per call regardless of the sample
count.  The sample loops release the GIL so callers can run blocks on a
thread pool.
"""

import numpy as np

from libc.math cimport fabs


def _check_theta_matrix(th):
    if th.shape[1] == 0 or th.shape[1] % 2 != 0:
        raise ValueError("theta rows must hold 2m coefficients")


def _check_history(Py_ssize_t m, yp, up):
    # bounds are not checked inside the nogil loops, so reject short
    # history vectors here
    if yp.shape[0] < m:
        raise ValueError(f"y_past must hold at least {m} values")
    if up.shape[0] < m - 1:
        raise ValueError(f"u_past must hold at least {m - 1} values")


def multistep_rows_batch(thetas, horizon):
    """Per-sample predictor matrices, shapes (n,T,T), (n,T,m), (n,T,m-1)."""
    cdef double[:, ::1] th = np.ascontiguousarray(thetas, dtype=np.float64)
    _check_theta_matrix(th)
    cdef Py_ssize_t n = th.shape[0]
    cdef Py_ssize_t m = th.shape[1] // 2
    cdef Py_ssize_t T = horizon
    A_arr = np.zeros((n, T, T))
    B_arr = np.zeros((n, T, m))
    C_arr = np.zeros((n, T, m - 1))
    cdef double[:, :, ::1] A = A_arr
    cdef double[:, :, ::1] B = B_arr
    cdef double[:, :, ::1] C = C_arr
    cdef Py_ssize_t i, k, j, p, idx
    cdef double coef
    with nogil:
        for i in range(n):
            for k in range(T):
                for j in range(m):
                    idx = k - j
                    if idx >= 0:
                        A[i, k, idx] += th[i, j]
                    else:
                        C[i, k, -idx - 1] += th[i, j]
                for j in range(m):
                    idx = k - 1 - j
                    if idx >= 0:
                        coef = th[i, m + j]
                        for p in range(T):
                            A[i, k, p] += coef * A[i, idx, p]
                        for p in range(m):
                            B[i, k, p] += coef * B[i, idx, p]
                        for p in range(m - 1):
                            C[i, k, p] += coef * C[i, idx, p]
                    else:
                        B[i, k, -idx - 1] += th[i, m + j]
    return A_arr, B_arr, C_arr


def moment_sums(thetas, Q, horizon):
    """Sums over samples of A^T Q A, A^T, A^T Q B and A^T Q C."""
    cdef double[:, ::1] th = np.ascontiguousarray(thetas, dtype=np.float64)
    cdef double[:, ::1] q = np.ascontiguousarray(Q, dtype=np.float64)
    _check_theta_matrix(th)
    cdef Py_ssize_t n = th.shape[0]
    cdef Py_ssize_t m = th.shape[1] // 2
    cdef Py_ssize_t T = horizon
    if q.shape[0] != T or q.shape[1] != T:
        raise ValueError("Q must be horizon x horizon")
    s_atqa_arr = np.zeros((T, T))
    s_at_arr = np.zeros((T, T))
    s_atqb_arr = np.zeros((T, m))
    s_atqc_arr = np.zeros((T, m - 1))
    cdef double[:, ::1] s_atqa = s_atqa_arr
    cdef double[:, ::1] s_at = s_at_arr
    cdef double[:, ::1] s_atqb = s_atqb_arr
    cdef double[:, ::1] s_atqc = s_atqc_arr
    # Per-sample scratch
    A_arr = np.zeros((T, T))
    B_arr = np.zeros((T, m))
    C_arr = np.zeros((T, m - 1))
    QA_arr = np.zeros((T, T))
    QB_arr = np.zeros((T, m))
    QC_arr = np.zeros((T, m - 1))
    cdef double[:, ::1] A = A_arr
    cdef double[:, ::1] B = B_arr
    cdef double[:, ::1] C = C_arr
    cdef double[:, ::1] QA = QA_arr
    cdef double[:, ::1] QB = QB_arr
    cdef double[:, ::1] QC = QC_arr
    cdef Py_ssize_t i, k, j, p, r, idx
    cdef double coef, acc
    with nogil:
        for i in range(n):
            # Build A, B, C for this sample.
            for k in range(T):
                for p in range(T):
                    A[k, p] = 0.0
                for p in range(m):
                    B[k, p] = 0.0
                for p in range(m - 1):
                    C[k, p] = 0.0
                for j in range(m):
                    idx = k - j
                    if idx >= 0:
                        A[k, idx] += th[i, j]
                    else:
                        C[k, -idx - 1] += th[i, j]
                for j in range(m):
                    idx = k - 1 - j
                    if idx >= 0:
                        coef = th[i, m + j]
                        for p in range(T):
                            A[k, p] += coef * A[idx, p]
                        for p in range(m):
                            B[k, p] += coef * B[idx, p]
                        for p in range(m - 1):
                            C[k, p] += coef * C[idx, p]
                    else:
                        B[k, -idx - 1] += th[i, m + j]
            # QA = Q @ A, QB = Q @ B, QC = Q @ C.
            for r in range(T):
                for p in range(T):
                    acc = 0.0
                    for k in range(T):
                        acc += q[r, k] * A[k, p]
                    QA[r, p] = acc
                for p in range(m):
                    acc = 0.0
                    for k in range(T):
                        acc += q[r, k] * B[k, p]
                    QB[r, p] = acc
                for p in range(m - 1):
                    acc = 0.0
                    for k in range(T):
                        acc += q[r, k] * C[k, p]
                    QC[r, p] = acc
            # Accumulate A^T (Q X) products and A^T itself.
            for p in range(T):
                for r in range(T):
                    s_at[p, r] += A[r, p]
                for j in range(T):
                    acc = 0.0
                    for r in range(T):
                        acc += A[r, p] * QA[r, j]
                    s_atqa[p, j] += acc
                for j in range(m):
                    acc = 0.0
                    for r in range(T):
                        acc += A[r, p] * QB[r, j]
                    s_atqb[p, j] += acc
                for j in range(m - 1):
                    acc = 0.0
                    for r in range(T):
                        acc += A[r, p] * QC[r, j]
                    s_atqc[p, j] += acc
    return s_atqa_arr, s_at_arr, s_atqb_arr, s_atqc_arr


def multistep_predictions(thetas, u, y_past, u_past):
    """Noise-free multistep predictions, one row of length T per sample."""
    cdef double[:, ::1] th = np.ascontiguousarray(thetas, dtype=np.float64)
    cdef double[:, ::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] yp = np.ascontiguousarray(y_past, dtype=np.float64)
    cdef double[::1] up = np.ascontiguousarray(u_past, dtype=np.float64)
    _check_theta_matrix(th)
    cdef Py_ssize_t n = th.shape[0]
    cdef Py_ssize_t m = th.shape[1] // 2
    cdef Py_ssize_t T = uu.shape[1]
    if uu.shape[0] != n:
        raise ValueError("u must have one row per theta sample")
    _check_history(m, yp, up)
    out = np.empty((n, T))
    cdef double[:, ::1] yhat = out
    cdef Py_ssize_t i, k, j, idx
    cdef double acc
    with nogil:
        for i in range(n):
            for k in range(T):
                acc = 0.0
                for j in range(m):
                    idx = k - j
                    if idx >= 0:
                        acc += th[i, j] * uu[i, idx]
                    else:
                        acc += th[i, j] * up[-idx - 1]
                for j in range(m):
                    idx = k - 1 - j
                    if idx >= 0:
                        acc += th[i, m + j] * yhat[i, idx]
                    else:
                        acc += th[i, m + j] * yp[-idx - 1]
                yhat[i, k] = acc
    return out


def oracle_inputs(thetas, y_ref, y_past, u_past, singular_tol):
    """Per-sample interpolating inputs (n, T) and a validity mask."""
    cdef double[:, ::1] th = np.ascontiguousarray(thetas, dtype=np.float64)
    cdef double[::1] yr = np.ascontiguousarray(y_ref, dtype=np.float64)
    cdef double[::1] yp = np.ascontiguousarray(y_past, dtype=np.float64)
    cdef double[::1] up = np.ascontiguousarray(u_past, dtype=np.float64)
    cdef double tol = singular_tol
    _check_theta_matrix(th)
    cdef Py_ssize_t n = th.shape[0]
    cdef Py_ssize_t m = th.shape[1] // 2
    cdef Py_ssize_t T = yr.shape[0]
    _check_history(m, yp, up)
    u_out = np.zeros((n, T))
    ok_out = np.empty(n, dtype=np.uint8)
    cdef double[:, ::1] uu = u_out
    cdef unsigned char[::1] ok = ok_out
    cdef Py_ssize_t i, k, j, idx
    cdef double acc, lead
    with nogil:
        for i in range(n):
            lead = th[i, 0]
            if fabs(lead) >= tol:
                ok[i] = 1
            else:
                ok[i] = 0
                lead = 1.0
            for k in range(T):
                acc = 0.0
                for j in range(1, m):
                    idx = k - j
                    if idx >= 0:
                        acc += th[i, j] * uu[i, idx]
                    else:
                        acc += th[i, j] * up[-idx - 1]
                for j in range(m):
                    idx = k - 1 - j
                    if idx >= 0:
                        acc += th[i, m + j] * yr[idx]
                    else:
                        acc += th[i, m + j] * yp[-idx - 1]
                uu[i, k] = (yr[k] - acc) / lead
    return u_out, ok_out.astype(bool)
