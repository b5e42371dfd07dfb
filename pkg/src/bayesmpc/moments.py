"""Posterior expectations of predictor-matrix products.

The uncertainty-aware controller needs E[A^T Q A | D], E[A^T | D],
E[A^T Q B | D] and E[A^T Q C | D] where (A, B, C) are the multistep
predictor matrices of :mod:`bayesmpc.predictor` and theta | D is Gaussian.
Two evaluation paths are provided:

* ``closed_form_moments`` -- exact non-central Gaussian moments for the
  memory-1, horizon-2 case with diagonal Q.  Because
  A^T Q A = sum_i q_i row_i(A)^T row_i(A), a diagonal Q enters linearly and
  the moments assemble row by row from bivariate moments E[th1^p th2^q].
* ``monte_carlo_moments`` -- seeded sample averages for any (memory,
  horizon, Q); deterministic given (seed, samples) independent of the thread
  count, because samples are drawn in fixed-size blocks with per-block
  substreams and block partial sums are combined in block order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import backend
from ._linalg import psd_factor
from .predictor import build_multistep
from .regression import ThetaBelief

BLOCK_SIZE = 1 << 15

_MOMENT_STREAM = 0


@dataclass(frozen=True)
class PredictorMoments:
    """Moment matrices feeding the posterior-mean quadratic cost."""

    e_AtQA: np.ndarray
    e_At: np.ndarray
    e_AtQB: np.ndarray
    e_AtQC: np.ndarray
    source: str
    samples: int | None = None
    seed: int | None = None

    def __post_init__(self):
        sym = 0.5 * (self.e_AtQA + self.e_AtQA.T)
        eigs = np.linalg.eigvalsh(sym)
        scale = max(float(abs(eigs).max()), 1.0)
        if eigs[0] < -1e-8 * scale:
            raise ValueError(
                f"E[A^T Q A] must be PSD, got min eigenvalue {eigs[0]:.3e}"
            )
        object.__setattr__(self, "e_AtQA", sym)

    @property
    def horizon(self) -> int:
        return self.e_AtQA.shape[0]

    @property
    def memory(self) -> int:
        return self.e_AtQB.shape[1]


def bivariate_moment(p: int, q: int, mean, cov) -> float:
    """Non-central moment E[X^p Y^q] of a bivariate Gaussian.

    Uses the Stein recurrence
    E[X^i Y^j] = mu_x E[X^(i-1) Y^j] + (i-1) var_x E[X^(i-2) Y^j]
                 + j cov_xy E[X^(i-1) Y^(j-1)].
    """
    mean = np.asarray(mean, dtype=float).ravel()
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if mean.size != 2 or cov.shape != (2, 2):
        raise ValueError("bivariate_moment expects a 2-dimensional Gaussian")
    mx, my = mean
    vx, vy, cxy = cov[0, 0], cov[1, 1], cov[0, 1]
    memo: dict[tuple[int, int], float] = {}

    def rec(i: int, j: int) -> float:
        if i < 0 or j < 0:
            return 0.0
        if i == 0 and j == 0:
            return 1.0
        key = (i, j)
        if key in memo:
            return memo[key]
        if i > 0:
            val = mx * rec(i - 1, j) + (i - 1) * vx * rec(i - 2, j) + j * cxy * rec(i - 1, j - 1)
        else:
            val = my * rec(i, j - 1) + (j - 1) * vy * rec(i, j - 2)
        memo[key] = val
        return val

    return rec(int(p), int(q))


def _as_q_matrix(Q, horizon: int) -> np.ndarray:
    q = np.asarray(Q, dtype=float)
    if q.ndim == 1:
        q = np.diag(q)
    if q.shape != (horizon, horizon):
        raise ValueError(f"Q must be {horizon}x{horizon}")
    if not np.allclose(q, q.T, atol=1e-12, rtol=0.0):
        raise ValueError("Q must be symmetric")
    return q


def closed_form_moments(belief: ThetaBelief, Q) -> PredictorMoments:
    """Exact moments for memory m=1 over horizon T=2 with diagonal Q.

    With rows r1 = [th1, 0] and r2 = [th2 th1, th1] the entries reduce to
    bivariate moments of (th1, th2); other (m, T, Q) combinations are
    unsupported here and must go through ``monte_carlo_moments``.
    """
    if belief.dim != 2:
        raise ValueError("closed forms cover the memory-1 predictor (2 coefficients) only")
    q = _as_q_matrix(Q, 2)
    if abs(q[0, 1]) > 1e-12:
        raise ValueError("closed forms require a diagonal Q")
    q1, q2 = q[0, 0], q[1, 1]

    def em(p_, q_):
        return bivariate_moment(p_, q_, belief.mean, belief.covariance)

    e_atqa = np.array([
        [q1 * em(2, 0) + q2 * em(2, 2), q2 * em(2, 1)],
        [q2 * em(2, 1), q2 * em(2, 0)],
    ])
    e_at = np.array([
        [em(1, 0), em(1, 1)],
        [0.0, em(1, 0)],
    ])
    e_atqb = np.array([
        [q1 * em(1, 1) + q2 * em(1, 3)],
        [q2 * em(1, 2)],
    ])
    e_atqc = np.zeros((2, 0))
    return PredictorMoments(e_AtQA=e_atqa, e_At=e_at, e_AtQB=e_atqb,
                            e_AtQC=e_atqc, source="closed_form")


def plugin_moments(theta, Q, horizon: int) -> PredictorMoments:
    """Degenerate-belief moments: exact products at a single coefficient vector."""
    theta = np.asarray(theta, dtype=float).ravel()
    mats = build_multistep(theta, horizon)
    q = _as_q_matrix(Q, horizon)
    qa = q @ mats.A
    return PredictorMoments(
        e_AtQA=mats.A.T @ qa,
        e_At=mats.A.T.copy(),
        e_AtQB=mats.A.T @ (q @ mats.B),
        e_AtQC=mats.A.T @ (q @ mats.C),
        source="plugin",
    )


def _block_sizes(samples: int, block: int):
    sizes = []
    left = samples
    while left > 0:
        take = min(block, left)
        sizes.append(take)
        left -= take
    return sizes


def monte_carlo_moments(belief: ThetaBelief, Q, horizon: int, memory: int,
                        samples: int, seed: int, threads: int = 1) -> PredictorMoments:
    """Sample-average moments over draws theta ~ N(mean, covariance).

    A zero covariance short-circuits to the exact plug-in products at the
    mean.  Blocks of ``BLOCK_SIZE`` draws use independent substreams spawned
    from ``seed``, so results are reproducible bit for bit for a given
    (seed, samples) regardless of ``threads``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if belief.dim != 2 * memory:
        raise ValueError(
            f"belief dimension {belief.dim} does not match memory {memory} (expected {2 * memory})"
        )
    q = _as_q_matrix(Q, horizon)
    if not np.any(belief.covariance):
        plug = plugin_moments(belief.mean, q, horizon)
        return PredictorMoments(
            e_AtQA=plug.e_AtQA, e_At=plug.e_At, e_AtQB=plug.e_AtQB,
            e_AtQC=plug.e_AtQC, source="monte_carlo", samples=samples, seed=seed,
        )
    chol = psd_factor(belief.covariance)
    sizes = _block_sizes(samples, BLOCK_SIZE)

    def block_sums(args):
        index, count = args
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(_MOMENT_STREAM, index))
        )
        xi = rng.standard_normal((count, belief.dim))
        thetas = belief.mean + xi @ chol.T
        return backend.impl.moment_sums(thetas, q, horizon)

    jobs = list(enumerate(sizes))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(block_sums, jobs))
    else:
        partials = [block_sums(j) for j in jobs]

    s_atqa = np.zeros((horizon, horizon))
    s_at = np.zeros((horizon, horizon))
    s_atqb = np.zeros((horizon, memory))
    s_atqc = np.zeros((horizon, memory - 1))
    for pa, pt, pb, pc in partials:
        s_atqa += pa
        s_at += pt
        s_atqb += pb
        s_atqc += pc
    inv = 1.0 / samples
    return PredictorMoments(
        e_AtQA=s_atqa * inv, e_At=s_at * inv, e_AtQB=s_atqb * inv,
        e_AtQC=s_atqc * inv, source="monte_carlo", samples=samples, seed=seed,
    )
