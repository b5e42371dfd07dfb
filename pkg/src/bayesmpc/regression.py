"""Gaussian-regression inference for system identification.

Notation and scaling
--------------------
The unknown system is modelled as a zero-mean Gaussian random field with
covariance ``lambda * K``; observations carry additive white Gaussian noise
of variance ``sigma2``.  With ``gamma = sigma2 / lambda`` and the training
Gram matrix ``KK``, the regularized matrix is

    Sigma = KK + gamma * I

and the fitted weights are ``c = Sigma^{-1} Y``.  The predictive law at a new
location ``z*`` is

    mean(z*) = Gamma @ c
    var(z*)  = lambda * (K(z*, z*) - Gamma @ Sigma^{-1} @ Gamma^T)

where ``Gamma`` holds the kernel values between ``z*`` and the training
locations.  The marginal likelihood of the outputs is the zero-mean Gaussian
density with covariance ``lambda * KK + sigma2 * I`` (i.e. the scaled form
``lambda * Sigma``); this module uses that scaled covariance everywhere the
marginal density is involved.  In the dynamic (NARX) setting some training
outputs also appear inside later input locations, so the marginal density is
exact only under the sampled-location reinterpretation of the model; it is
implemented as stated.

The linear specialization (kernel ``x^T M a``, data ``Y = F theta + E``)
admits the explicit parameter posterior

    E[theta | D]   = (F^T F + gamma * M^{-1})^{-1} F^T Y
    Var[theta | D] = sigma2 * (F^T F + gamma * M^{-1})^{-1}

returned as a :class:`ThetaBelief`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .kernels import KernelSpec, cross_kernel, eval_kernel, gram_matrix

# Jitter policy for the SPD factorization of Sigma: start at
# JITTER_REL * trace(Sigma) / N and escalate by x100 at most 3 times.
JITTER_REL = 1e-10
JITTER_GROWTH = 100.0
JITTER_TRIES = 3


@dataclass(frozen=True)
class Dataset:
    """Identification records: input locations (N x d) and outputs (N,)."""

    locations: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        locs = np.atleast_2d(np.asarray(self.locations, dtype=float))
        y = np.asarray(self.outputs, dtype=float).ravel()
        if locs.shape[0] == 0:
            raise ValueError("a dataset needs at least one record")
        if locs.shape[0] != y.shape[0]:
            raise ValueError(
                f"got {locs.shape[0]} locations but {y.shape[0]} outputs"
            )
        if not (np.all(np.isfinite(locs)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "outputs", y)

    def __len__(self) -> int:
        return self.locations.shape[0]


@dataclass(frozen=True)
class ThetaBelief:
    """Gaussian belief over linear predictor coefficients."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mean, dtype=float).ravel()
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (mu.size, mu.size):
            raise ValueError("covariance shape must match the mean dimension")
        if not np.allclose(cov, cov.T, atol=1e-10, rtol=0.0):
            raise ValueError("covariance must be symmetric")
        cov = 0.5 * (cov + cov.T)
        min_eig = float(np.linalg.eigvalsh(cov).min())
        if min_eig < -1e-10:
            raise ValueError(f"covariance is not PSD (min eigenvalue {min_eig:.3e})")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class GpPosterior:
    """Fitted nonparametric model (immutable after :func:`fit_posterior`).

    Attributes
    ----------
    spec : KernelSpec
    locations : (N, d) array of training locations
    weights : (N,) weight vector c = (KK + gamma I)^{-1} Y
    sigma_chol : lower Cholesky factor of KK + gamma I (after jitter, if any)
    lam, sigma2 : prior scale and noise variance; gamma = sigma2 / lam
    """

    spec: KernelSpec
    locations: np.ndarray
    outputs: np.ndarray
    weights: np.ndarray
    sigma_chol: np.ndarray
    lam: float
    sigma2: float

    @property
    def gamma(self) -> float:
        return self.sigma2 / self.lam

    def __len__(self) -> int:
        return self.locations.shape[0]


def _chol_with_jitter(sigma: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of an SPD matrix, with escalating jitter."""
    n = sigma.shape[0]
    jitter = 0.0
    step = JITTER_REL * float(np.trace(sigma)) / n
    for attempt in range(JITTER_TRIES + 1):
        try:
            return cholesky(sigma + jitter * np.eye(n), lower=True)
        except np.linalg.LinAlgError:
            jitter = step if jitter == 0.0 else jitter * JITTER_GROWTH
    raise np.linalg.LinAlgError(
        f"factorization failed even with jitter {jitter:.3e}"
    )


def fit_posterior(data: Dataset, spec: KernelSpec, lam: float, sigma2: float) -> GpPosterior:
    """Fit the Gaussian-regression posterior on a dataset.

    Parameters
    ----------
    data : Dataset
    spec : KernelSpec
    lam : float
        Prior scale (> 0) multiplying the kernel.
    sigma2 : float
        Noise variance (> 0).
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    gamma = sigma2 / lam
    kk = gram_matrix(spec, data.locations)
    sigma = kk + gamma * np.eye(len(data))
    chol = _chol_with_jitter(sigma)
    weights = cho_solve((chol, True), data.outputs)
    resid = float(np.linalg.norm(sigma @ weights - data.outputs))
    if resid > 1e-8 * max(float(np.linalg.norm(data.outputs)), 1e-300):
        raise np.linalg.LinAlgError(
            f"weight solve residual {resid:.3e} exceeds tolerance; "
            "Sigma is too ill-conditioned"
        )
    return GpPosterior(
        spec=spec,
        locations=data.locations,
        outputs=data.outputs,
        weights=weights,
        sigma_chol=chol,
        lam=float(lam),
        sigma2=float(sigma2),
    )


def posterior_mean(post: GpPosterior, z_star) -> float:
    """Predictive mean at a new location: Gamma @ c."""
    gamma_row = cross_kernel(post.spec, z_star, post.locations)
    return float(gamma_row @ post.weights)


def posterior_variance(post: GpPosterior, z_star) -> float:
    """Predictive variance at a new location.

    Returns ``lambda * (K(z*, z*) - Gamma Sigma^{-1} Gamma^T)`` clipped at
    zero; values below -1e-9 (relative) indicate a broken factorization and
    raise.
    """
    gamma_row = cross_kernel(post.spec, z_star, post.locations)
    k_star = eval_kernel(post.spec, z_star, z_star)
    v = solve_triangular(post.sigma_chol, gamma_row, lower=True)
    var = post.lam * (k_star - float(v @ v))
    floor = -1e-9 * max(1.0, post.lam * k_star)
    if var < floor:
        raise np.linalg.LinAlgError(
            f"negative predictive variance {var:.3e}; factorization is unreliable"
        )
    return max(var, 0.0)


def augment_posterior(post: GpPosterior, extra: Dataset | None) -> GpPosterior:
    """Posterior after adding records, refit from scratch with unchanged
    (lambda, sigma2).

    Incremental low-rank updates are deliberately not used; a full recompute
    keeps the result identical to :func:`fit_posterior` on the concatenated
    dataset.
    """
    if extra is None or len(extra) == 0:
        return post
    if extra.locations.shape[1] != post.locations.shape[1]:
        raise ValueError("extra locations have a different dimension")
    merged = Dataset(
        locations=np.vstack([post.locations, extra.locations]),
        outputs=np.concatenate([post.outputs, extra.outputs]),
    )
    return fit_posterior(merged, post.spec, post.lam, post.sigma2)


def linear_posterior(F: np.ndarray, Y: np.ndarray, M: np.ndarray,
                     lam: float, sigma2: float) -> ThetaBelief:
    """Explicit parameter posterior for the linear model Y = F theta + E.

    The prior is theta ~ N(0, lambda * M); the returned belief has
    mean (F^T F + gamma M^{-1})^{-1} F^T Y and covariance
    sigma2 * (F^T F + gamma M^{-1})^{-1}.
    """
    if not lam > 0 or not sigma2 > 0:
        raise ValueError("lambda and sigma2 must be positive")
    F = np.atleast_2d(np.asarray(F, dtype=float))
    Y = np.asarray(Y, dtype=float).ravel()
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if F.shape[0] != Y.size:
        raise ValueError("F and Y have inconsistent row counts")
    if M.shape != (F.shape[1], F.shape[1]):
        raise ValueError("M must be square with the parameter dimension")
    gamma = sigma2 / lam
    try:
        m_inv = np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("structure matrix M is singular") from exc
    normal = F.T @ F + gamma * m_inv
    normal = 0.5 * (normal + normal.T)
    try:
        chol = cholesky(normal, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("normal-equations matrix is singular") from exc
    mean = cho_solve((chol, True), F.T @ Y)
    cov = sigma2 * cho_solve((chol, True), np.eye(F.shape[1]))
    return ThetaBelief(mean=mean, covariance=0.5 * (cov + cov.T))


def log_marginal_likelihood(data: Dataset, spec: KernelSpec,
                            lam: float, sigma2: float) -> float:
    """Log marginal density of the outputs under the scaled covariance
    ``lambda * KK + sigma2 * I``."""
    if not lam > 0 or not sigma2 > 0:
        raise ValueError("lambda and sigma2 must be positive")
    kk = gram_matrix(spec, data.locations)
    cov = lam * kk + sigma2 * np.eye(len(data))
    chol = _chol_with_jitter(cov)
    alpha = cho_solve((chol, True), data.outputs)
    quad = float(data.outputs @ alpha)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return -0.5 * (quad + logdet + len(data) * np.log(2.0 * np.pi))
