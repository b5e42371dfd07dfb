"""Pure-numpy implementations of the Monte Carlo inner loops.

Mirrors the compiled module ``bayesmpc._mckernels``; which one is active is
decided in :mod:`bayesmpc.backend`.  All functions are vectorized over the
sample axis and allocate O(samples * T) memory, so callers stream large
sample counts through in blocks.

Sample matrices hold one coefficient vector per row,
``thetas[i] = [b_1 .. b_m, a_1 .. a_m]`` (see :mod:`bayesmpc.predictor` for
the predictor convention).
"""

from __future__ import annotations

import numpy as np


def _check_theta_matrix(thetas: np.ndarray):
    if thetas.ndim != 2 or thetas.shape[1] == 0 or thetas.shape[1] % 2 != 0:
        raise ValueError("theta rows must hold 2m coefficients")


def _check_history(m: int, y_past, u_past):
    if np.asarray(y_past).shape[0] < m:
        raise ValueError(f"y_past must hold at least {m} values")
    if np.asarray(u_past).shape[0] < m - 1:
        raise ValueError(f"u_past must hold at least {m - 1} values")


def multistep_rows_batch(thetas: np.ndarray, horizon: int):
    """Per-sample predictor matrices, shapes (n,T,T), (n,T,m), (n,T,m-1)."""
    thetas = np.ascontiguousarray(thetas, dtype=float)
    _check_theta_matrix(thetas)
    n, two_m = thetas.shape
    m = two_m // 2
    T = int(horizon)
    b = thetas[:, :m]
    a = thetas[:, m:]
    A = np.zeros((n, T, T))
    B = np.zeros((n, T, m))
    C = np.zeros((n, T, m - 1))
    for k in range(T):
        for j in range(m):
            idx = k - j
            if idx >= 0:
                A[:, k, idx] += b[:, j]
            else:
                C[:, k, -idx - 1] += b[:, j]
        for j in range(m):
            idx = k - 1 - j
            if idx >= 0:
                A[:, k, :] += a[:, j, None] * A[:, idx, :]
                B[:, k, :] += a[:, j, None] * B[:, idx, :]
                if m > 1:
                    C[:, k, :] += a[:, j, None] * C[:, idx, :]
            else:
                B[:, k, -idx - 1] += a[:, j]
    return A, B, C


def moment_sums(thetas: np.ndarray, Q: np.ndarray, horizon: int):
    """Sums over samples of A^T Q A, A^T, A^T Q B and A^T Q C.

    Returns four arrays (T,T), (T,T), (T,m), (T,m-1); divide by the sample
    count to get moment estimates.
    """
    A, B, C = multistep_rows_batch(thetas, horizon)
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (horizon, horizon):
        raise ValueError("Q must be horizon x horizon")
    QA = np.einsum("rs,nsp->nrp", Q, A)
    s_atqa = np.einsum("nrp,nrq->pq", A, QA)
    s_at = A.sum(axis=0).T
    s_atqb = np.einsum("nrp,nrq->pq", A, np.einsum("rs,nsp->nrp", Q, B))
    if C.shape[2]:
        s_atqc = np.einsum("nrp,nrq->pq", A, np.einsum("rs,nsp->nrp", Q, C))
    else:
        s_atqc = np.zeros((horizon, 0))
    return s_atqa, s_at, s_atqb, s_atqc


def multistep_predictions(thetas: np.ndarray, u: np.ndarray,
                          y_past: np.ndarray, u_past: np.ndarray) -> np.ndarray:
    """Noise-free multistep predictions, one row of length T per sample.

    ``u`` has shape (n, T): the input sequence applied to each sample.
    """
    thetas = np.ascontiguousarray(thetas, dtype=float)
    u = np.ascontiguousarray(u, dtype=float)
    _check_theta_matrix(thetas)
    n, two_m = thetas.shape
    m = two_m // 2
    T = u.shape[1]
    if u.shape[0] != n:
        raise ValueError("u must have one row per theta sample")
    _check_history(m, y_past, u_past)
    b = thetas[:, :m]
    a = thetas[:, m:]
    yhat = np.empty((n, T))
    for k in range(T):
        acc = np.zeros(n)
        for j in range(m):
            idx = k - j
            if idx >= 0:
                acc += b[:, j] * u[:, idx]
            else:
                acc += b[:, j] * u_past[-idx - 1]
        for j in range(m):
            idx = k - 1 - j
            if idx >= 0:
                acc += a[:, j] * yhat[:, idx]
            else:
                acc += a[:, j] * y_past[-idx - 1]
        yhat[:, k] = acc
    return yhat


def oracle_inputs(thetas: np.ndarray, y_ref: np.ndarray, y_past: np.ndarray,
                  u_past: np.ndarray, singular_tol: float):
    """Per-sample interpolating inputs (n, T) and a validity mask.

    Samples whose leading input coefficient is below ``singular_tol`` in
    magnitude get ``ok = False`` and an undefined input row.
    """
    thetas = np.ascontiguousarray(thetas, dtype=float)
    y_ref = np.asarray(y_ref, dtype=float).ravel()
    _check_theta_matrix(thetas)
    n, two_m = thetas.shape
    m = two_m // 2
    T = y_ref.size
    _check_history(m, y_past, u_past)
    b = thetas[:, :m]
    a = thetas[:, m:]
    ok = np.abs(b[:, 0]) >= singular_tol
    lead = np.where(ok, b[:, 0], 1.0)
    u = np.zeros((n, T))
    # Interpolation forces every prediction to y_ref, so substituted outputs
    # are the references themselves.
    for k in range(T):
        acc = np.zeros(n)
        for j in range(1, m):
            idx = k - j
            if idx >= 0:
                acc += b[:, j] * u[:, idx]
            else:
                acc += b[:, j] * u_past[-idx - 1]
        for j in range(m):
            idx = k - 1 - j
            if idx >= 0:
                acc += a[:, j] * y_ref[idx]
            else:
                acc += a[:, j] * y_past[-idx - 1]
        u[:, k] = (y_ref[k] - acc) / lead
    return u, ok
