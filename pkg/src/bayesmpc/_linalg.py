"""Small shared linear-algebra helpers."""

from __future__ import annotations

import numpy as np


def psd_factor(cov: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    """Matrix L with L @ L.T == cov for a symmetric PSD (possibly singular) cov.

    Tries Cholesky first; singular matrices fall back to an eigenvalue
    factorization with negative eigenvalues clipped at zero.  Raises if cov is
    asymmetric or indefinite beyond ``rtol`` relative to its largest
    eigenvalue.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(cov, cov.T, atol=1e-10, rtol=0.0):
        raise ValueError("covariance must be symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    w, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    scale = max(float(w[-1]), 1.0)
    if w[0] < -rtol * scale:
        raise ValueError(f"covariance is not PSD (min eigenvalue {w[0]:.3e})")
    return vecs * np.sqrt(np.clip(w, 0.0, None))
