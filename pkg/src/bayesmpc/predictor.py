"""Multistep predictor matrices for linear one-step predictors.

A one-step predictor with memory ``m`` and coefficient vector
``theta = [b_1 .. b_m, a_1 .. a_m]`` is

    yhat(t) = sum_j b_j u(t - j + 1) + sum_j a_j y(t - j)

so ``b_1`` weights the current input and ``a_1`` the most recent output.
Iterating it over a horizon T, substituting earlier predictions for unseen
outputs, gives a linear map

    Yhat = A U + B Y_minus + C U_minus

with A (T x T, lower triangular, diagonal b_1), B (T x m) and C (T x (m-1),
empty for m = 1).  Past vectors are ordered most-recent-first:
``Y_minus = [y(t-1), ..., y(t-m)]`` and ``U_minus = [u(t-1), ..., u(t-m+1)]``.

For m = 1 and theta = [th1, th2] the closed forms are A[i, j] = th2^(i-j) th1
(i >= j) and B[k] = th2^(k+1) for 0-based row k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Diagonal entries of A below this magnitude make the interpolation solve
# meaningless; used by oracle_input and the experiment harness.
SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class MultistepMatrices:
    """Stacked k-step-ahead predictor coefficients over a horizon."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    @property
    def horizon(self) -> int:
        return self.A.shape[0]

    @property
    def memory(self) -> int:
        return self.B.shape[1]


def _split_theta(theta) -> tuple[np.ndarray, np.ndarray]:
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size == 0 or theta.size % 2 != 0:
        raise ValueError(
            f"theta must hold 2m coefficients (m inputs then m outputs), got length {theta.size}"
        )
    m = theta.size // 2
    return theta[:m], theta[m:]


def build_multistep(theta, horizon: int) -> MultistepMatrices:
    """Build (A, B, C) by recursive substitution of predicted outputs.

    Row k (0-based) of ``[A B C]`` applied to ``(U, Y_minus, U_minus)`` is the
    (k+1)-step-ahead prediction of y(t+k).
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    b, a = _split_theta(theta)
    m = b.size
    T = int(horizon)
    A = np.zeros((T, T))
    B = np.zeros((T, m))
    C = np.zeros((T, m - 1))
    for k in range(T):
        for j in range(m):
            idx = k - j
            if idx >= 0:
                A[k, idx] += b[j]
            else:
                C[k, -idx - 1] += b[j]
        for j in range(m):
            idx = k - 1 - j
            if idx >= 0:
                A[k] += a[j] * A[idx]
                B[k] += a[j] * B[idx]
                if m > 1:
                    C[k] += a[j] * C[idx]
            else:
                B[k, -idx - 1] += a[j]
    return MultistepMatrices(A=A, B=B, C=C)


def oracle_input(theta, problem) -> np.ndarray:
    """Input sequence that makes the noise-free predictor interpolate y_ref.

    Defined for zero input penalty and nonsingular A (b_1 != 0); solves the
    lower-triangular system A U = y_ref - B Y_minus - C U_minus exactly.
    """
    b, a = _split_theta(theta)
    if abs(b[0]) < SINGULAR_TOL:
        raise ValueError(
            f"predictor matrix A is singular (leading input coefficient {b[0]:.3e})"
        )
    if np.any(problem.r_weights != 0):
        raise ValueError("the interpolating input is only defined for zero input penalty")
    mats = build_multistep(theta, problem.horizon)
    _check_past(problem, b.size)
    rhs = problem.y_ref - mats.B @ problem.y_past[: b.size]
    if mats.C.shape[1]:
        rhs = rhs - mats.C @ problem.u_past[: b.size - 1]
    u = np.zeros(problem.horizon)
    for k in range(problem.horizon):
        u[k] = (rhs[k] - float(mats.A[k, :k] @ u[:k])) / mats.A[k, k]
    return u


def _check_past(problem, m: int):
    if problem.y_past.size < m:
        raise ValueError(f"problem supplies {problem.y_past.size} past outputs, predictor needs {m}")
    if problem.u_past.size < m - 1:
        raise ValueError(f"problem supplies {problem.u_past.size} past inputs, predictor needs {m - 1}")
