"""Kernel families and Gram-matrix construction.

Supported families (``KernelSpec.family``):

* ``"spline"``        -- first-order spline, K(x, a) = min(x, a), scalar
  nonnegative inputs only
* ``"gaussian"``      -- K(x, a) = exp(-||x - a||^2 / eta)
* ``"gaussian_ard"``  -- K(x, a) = exp(-(x - a)^T D (x - a)) with diagonal
  weights D
* ``"polynomial"``    -- K(x, a) = (x^T a + 1)^r
* ``"linear"``        -- K(x, a) = x^T M a with a symmetric PSD structure
  matrix M; exponentially decaying structure can be built with
  :func:`tc_covariance` / :func:`tc_kernel_spec`

All kernels are symmetric and produce positive-semidefinite Gram matrices;
``gram_matrix`` enforces PSD-ness with a relative eigenvalue tolerance and
raises instead of silently repairing a broken matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("spline", "gaussian", "gaussian_ard", "polynomial", "linear")

# Relative tolerance on the most negative Gram eigenvalue.
PSD_RTOL = 1e-8


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of a kernel family plus its hyperparameters.

    Only the fields relevant to ``family`` need to be set: ``eta`` for the
    Gaussian kernel, ``ard_weights`` for the ARD variant, ``degree`` for the
    polynomial kernel and ``structure_matrix`` for the linear kernel.
    ``tc_alpha_y`` / ``tc_alpha_u`` record the decay rates when the structure
    matrix was assembled from exponentially decaying blocks.
    """

    family: str
    eta: float | None = None
    degree: int | None = None
    ard_weights: np.ndarray | None = None
    structure_matrix: np.ndarray | None = None
    tc_alpha_y: float | None = None
    tc_alpha_u: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "gaussian":
            if self.eta is None or not self.eta > 0:
                raise ValueError("gaussian kernel requires eta > 0")
        elif self.family == "gaussian_ard":
            if self.ard_weights is None:
                raise ValueError("gaussian_ard kernel requires ard_weights")
            w = np.asarray(self.ard_weights, dtype=float)
            if w.ndim != 1 or w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("ard_weights must be a 1-d vector of finite nonnegative reals")
            object.__setattr__(self, "ard_weights", w)
        elif self.family == "polynomial":
            if self.degree is None or int(self.degree) < 1:
                raise ValueError("polynomial kernel requires integer degree >= 1")
            object.__setattr__(self, "degree", int(self.degree))
        elif self.family == "linear":
            if self.structure_matrix is None:
                raise ValueError("linear kernel requires a structure matrix")
            m = np.asarray(self.structure_matrix, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError("structure matrix must be square")
            if not np.allclose(m, m.T, atol=1e-12, rtol=0.0):
                raise ValueError("structure matrix must be symmetric")
            min_eig = float(np.linalg.eigvalsh(m).min())
            if min_eig < -1e-10:
                raise ValueError(f"structure matrix is not PSD (min eigenvalue {min_eig:.3e})")
            object.__setattr__(self, "structure_matrix", m)
        for alpha in (self.tc_alpha_y, self.tc_alpha_u):
            if alpha is not None and not 0.0 <= alpha < 1.0:
                raise ValueError("TC decay rates must lie in [0, 1)")


def tc_covariance(alpha: float, n: int) -> np.ndarray:
    """Exponentially decaying structure block with entries alpha^max(i, j).

    Indices are 1-based, so the (1, 1) entry is ``alpha`` itself.  The result
    is positive semidefinite for 0 <= alpha < 1.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"decay rate must lie in [0, 1), got {alpha}")
    if n < 1:
        raise ValueError("block size must be >= 1")
    idx = np.arange(1, n + 1)
    return alpha ** np.maximum.outer(idx, idx).astype(float)


def tc_kernel_spec(alpha_y: float, size_y: int, alpha_u: float, size_u: int) -> KernelSpec:
    """Linear kernel whose structure matrix is blkdiag of two decaying blocks.

    The first block weights the past-output part of an input location, the
    second the input part, mirroring the location layout used by
    :func:`bayesmpc.dataio.build_locations`.
    """
    blocks = []
    if size_y > 0:
        blocks.append(tc_covariance(alpha_y, size_y))
    if size_u > 0:
        blocks.append(tc_covariance(alpha_u, size_u))
    if not blocks:
        raise ValueError("at least one TC block must be non-empty")
    dim = sum(b.shape[0] for b in blocks)
    m = np.zeros((dim, dim))
    off = 0
    for b in blocks:
        k = b.shape[0]
        m[off:off + k, off:off + k] = b
        off += k
    return KernelSpec(family="linear", structure_matrix=m,
                      tc_alpha_y=alpha_y, tc_alpha_u=alpha_u)


def _as_locations(x) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(x, dtype=float))
    if arr.ndim != 2:
        raise ValueError("locations must form a 2-d array (one row per location)")
    return arr


def _check_spline_domain(x: np.ndarray):
    if x.shape[1] != 1:
        raise ValueError("the first-order spline kernel is defined for scalar locations only")
    if np.any(x < 0):
        raise ValueError("the first-order spline kernel requires nonnegative coordinates")


def _pairwise(spec: KernelSpec, x: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Kernel matrix between two stacks of locations, shape (len(x), len(a))."""
    if x.shape[1] != a.shape[1]:
        raise ValueError(f"location dimension mismatch: {x.shape[1]} vs {a.shape[1]}")
    if spec.family == "spline":
        _check_spline_domain(x)
        _check_spline_domain(a)
        return np.minimum.outer(x[:, 0], a[:, 0])
    if spec.family == "gaussian":
        d2 = ((x[:, None, :] - a[None, :, :]) ** 2).sum(axis=2)
        return np.exp(-d2 / spec.eta)
    if spec.family == "gaussian_ard":
        if spec.ard_weights.size != x.shape[1]:
            raise ValueError("ard_weights length must match the location dimension")
        diff = x[:, None, :] - a[None, :, :]
        return np.exp(-(diff ** 2 * spec.ard_weights).sum(axis=2))
    if spec.family == "polynomial":
        return (x @ a.T + 1.0) ** spec.degree
    # linear
    m = spec.structure_matrix
    if m.shape[0] != x.shape[1]:
        raise ValueError("structure matrix size must match the location dimension")
    return x @ m @ a.T


def eval_kernel(spec: KernelSpec, x, a) -> float:
    """Evaluate K(x, a) for a single pair of locations."""
    xv = _as_locations(x)
    av = _as_locations(a)
    if xv.shape[0] != 1 or av.shape[0] != 1:
        raise ValueError("eval_kernel expects single locations; use gram_matrix for batches")
    return float(_pairwise(spec, xv, av)[0, 0])


def cross_kernel(spec: KernelSpec, z_star, locations) -> np.ndarray:
    """Row vector of kernel values between one new location and N training ones."""
    zs = _as_locations(z_star)
    locs = _as_locations(locations)
    if zs.shape[0] != 1:
        raise ValueError("z_star must be a single location")
    return _pairwise(spec, zs, locs)[0]


def gram_matrix(spec: KernelSpec, locations) -> np.ndarray:
    """N x N kernel matrix over a stack of training locations.

    Raises if the result fails the numerical PSD check (most negative
    eigenvalue below ``-PSD_RTOL`` relative to the largest one); a failure
    indicates invalid kernel parameters rather than something to repair.
    """
    locs = _as_locations(locations)
    if locs.shape[0] == 0:
        raise ValueError("at least one location is required")
    gram = _pairwise(spec, locs, locs)
    gram = 0.5 * (gram + gram.T)
    eigs = np.linalg.eigvalsh(gram)
    scale = max(float(eigs[-1]), 1.0)
    if eigs[0] < -PSD_RTOL * scale:
        raise ValueError(
            f"Gram matrix is not numerically PSD: min eigenvalue {eigs[0]:.3e} "
            f"(largest {eigs[-1]:.3e})"
        )
    return gram
