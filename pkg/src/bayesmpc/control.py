"""MPC cost estimators and input optimizers.

Four controller paths share the :class:`MpcProblem` description:

* ``bsp_optimal_input`` -- minimizer of the posterior-mean quadratic cost,
  built from :class:`~bayesmpc.moments.PredictorMoments`:

      U* = (E[A^T Q A] + R)^{-1} (E[A^T] Q y_ref - E[A^T Q B] Y_minus
                                  - E[A^T Q C] U_minus + R u_ref)

* ``nominal_input`` -- certainty equivalence: same formula with the belief
  covariance zeroed (plug-in moments at the posterior mean).
* ``nfir_cost`` -- closed-form cost when the fitted model depends on inputs
  only, so future locations are known given U.
* ``narx_cost`` / ``narx_rollout`` / ``optimize_narx_input`` -- mean
  propagation for models that feed predictions back into later locations,
  with a derivative-free coordinate search over U.

Reported quadratic costs for the bsp/nominal paths omit the U-independent
constant of the expanded objective (they can therefore be negative); the
nfir/narx paths report the full nonnegative value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .moments import PredictorMoments, plugin_moments
from .regression import GpPosterior, ThetaBelief, posterior_mean, posterior_variance

COORD_SEARCH_TOL = 1e-6
COORD_SEARCH_MAX_CYCLES = 20000


@dataclass(frozen=True)
class MpcProblem:
    """Finite-horizon tracking problem with scalar outputs.

    ``q_weights`` and ``r_weights`` are the per-step scalar weights on
    tracking error and input deviation.  ``y_past`` holds
    [y(t-1), ..., y(t-m)] and ``u_past`` holds [u(t-1), ..., u(t-m+1)]
    (most recent first).
    """

    horizon: int
    q_weights: np.ndarray
    r_weights: np.ndarray
    y_ref: np.ndarray
    u_ref: np.ndarray
    y_past: np.ndarray
    u_past: np.ndarray

    def __post_init__(self):
        T = int(self.horizon)
        if T < 1:
            raise ValueError("horizon must be >= 1")
        object.__setattr__(self, "horizon", T)
        for name in ("q_weights", "r_weights", "y_ref", "u_ref", "y_past", "u_past"):
            arr = np.asarray(getattr(self, name), dtype=float).ravel()
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)
        for name in ("q_weights", "r_weights", "y_ref", "u_ref"):
            if getattr(self, name).size != T:
                raise ValueError(f"{name} must have length {T}")
        if np.any(self.q_weights < 0) or np.any(self.r_weights < 0):
            raise ValueError("cost weights must be nonnegative")

    @property
    def memory(self) -> int:
        return self.y_past.size

    def q_matrix(self) -> np.ndarray:
        return np.diag(self.q_weights)

    def r_matrix(self) -> np.ndarray:
        return np.diag(self.r_weights)


@dataclass(frozen=True)
class ControlSolution:
    u: np.ndarray
    predicted_cost: float
    method: str


def _quadratic_terms(moments: PredictorMoments, problem: MpcProblem):
    """Normal matrix and right-hand side of the posterior-mean cost."""
    if moments.horizon != problem.horizon:
        raise ValueError("moments and problem horizons disagree")
    m = moments.memory
    if problem.y_past.size < m:
        raise ValueError(f"problem supplies {problem.y_past.size} past outputs, need {m}")
    if problem.u_past.size < m - 1:
        raise ValueError(f"problem supplies {problem.u_past.size} past inputs, need {m - 1}")
    R = problem.r_matrix()
    normal = moments.e_AtQA + R
    rhs = moments.e_At @ (problem.q_weights * problem.y_ref)
    rhs = rhs - moments.e_AtQB @ problem.y_past[:m]
    if m > 1:
        rhs = rhs - moments.e_AtQC @ problem.u_past[: m - 1]
    rhs = rhs + R @ problem.u_ref
    return normal, rhs


def quadratic_cost(moments: PredictorMoments, problem: MpcProblem, u) -> float:
    """Posterior-mean quadratic cost at u, without the U-independent constant."""
    u = np.asarray(u, dtype=float).ravel()
    normal, rhs = _quadratic_terms(moments, problem)
    return float(u @ normal @ u - 2.0 * u @ rhs)


def bsp_optimal_input(moments: PredictorMoments, problem: MpcProblem,
                      method: str = "bsp") -> ControlSolution:
    """Minimizer of the posterior-mean quadratic cost.

    Raises on a singular normal matrix; verifies stationarity of the
    returned input before handing it back.
    """
    normal, rhs = _quadratic_terms(moments, problem)
    try:
        u = np.linalg.solve(normal, rhs)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "normal matrix E[A^T Q A] + R is singular; the posterior-mean cost "
            "has no unique minimizer"
        ) from exc
    # One step of iterative refinement tightens badly conditioned solves.
    u = u + np.linalg.solve(normal, rhs - normal @ u)
    grad_norm = float(np.linalg.norm(2.0 * (normal @ u - rhs)))
    if grad_norm > 1e-8 * (1.0 + float(np.linalg.norm(u))):
        raise np.linalg.LinAlgError(
            f"stationarity check failed (gradient norm {grad_norm:.3e})"
        )
    return ControlSolution(u=u, predicted_cost=float(u @ normal @ u - 2.0 * u @ rhs),
                           method=method)


def nominal_input(belief: ThetaBelief, problem: MpcProblem) -> ControlSolution:
    """Certainty-equivalent input: plug-in moments at the belief mean."""
    moments = plugin_moments(belief.mean, problem.q_matrix(), problem.horizon)
    sol = bsp_optimal_input(moments, problem, method="nominal")
    return sol


def _input_at(problem: MpcProblem, u: np.ndarray, s: int) -> float:
    """u(t+s), falling back to the problem's past inputs for s < 0."""
    if s >= 0:
        return float(u[s])
    if -s - 1 >= problem.u_past.size:
        raise ValueError(f"input history too short: u(t{s:+d}) requested")
    return float(problem.u_past[-s - 1])


def nfir_locations(problem: MpcProblem, u, memory_u: int) -> np.ndarray:
    """Future input-only locations [u(t+l), ..., u(t+l-m_u+1)] for each step."""
    u = np.asarray(u, dtype=float).ravel()
    if u.size != problem.horizon:
        raise ValueError("input length must equal the horizon")
    locs = np.empty((problem.horizon, memory_u))
    for step in range(problem.horizon):
        for j in range(memory_u):
            locs[step, j] = _input_at(problem, u, step - j)
    return locs


def nfir_cost(post: GpPosterior, problem: MpcProblem, u) -> float:
    """Posterior-mean cost for an input-only (FIR-type) model.

    sum_l q_l (y_ref_l - mean_l)^2 + sum_l q_l var_l
    + sum_l r_l (u_ref_l - u_l)^2, with mean/var evaluated at the future
    input locations.
    """
    u = np.asarray(u, dtype=float).ravel()
    memory_u = post.locations.shape[1]
    locs = nfir_locations(problem, u, memory_u)
    means = np.array([posterior_mean(post, z) for z in locs])
    variances = np.array([posterior_variance(post, z) for z in locs])
    return _assemble_cost(problem, u, means, variances)


def narx_rollout(post: GpPosterior, problem: MpcProblem, u):
    """Mean-propagated predictions for a model with output feedback.

    Future locations are built by substituting previously computed posterior
    means for unavailable outputs; returns (means, variances) over the
    horizon.
    """
    u = np.asarray(u, dtype=float).ravel()
    if u.size != problem.horizon:
        raise ValueError("input length must equal the horizon")
    m_y = problem.y_past.size
    dim = post.locations.shape[1]
    m_u = dim - m_y
    if m_u < 1:
        raise ValueError(
            f"posterior locations have dimension {dim} but the problem carries "
            f"{m_y} past outputs; no input slots remain"
        )
    means = np.empty(problem.horizon)
    variances = np.empty(problem.horizon)
    z = np.empty(dim)
    for step in range(problem.horizon):
        for j in range(m_y):
            back = step - 1 - j
            z[j] = means[back] if back >= 0 else problem.y_past[-back - 1]
        for j in range(m_u):
            z[m_y + j] = _input_at(problem, u, step - j)
        means[step] = posterior_mean(post, z)
        variances[step] = posterior_variance(post, z)
    return means, variances


def narx_cost(post: GpPosterior, problem: MpcProblem, u) -> float:
    """Same assembly as :func:`nfir_cost` on mean-propagated rollouts."""
    u = np.asarray(u, dtype=float).ravel()
    means, variances = narx_rollout(post, problem, u)
    return _assemble_cost(problem, u, means, variances)


def _assemble_cost(problem: MpcProblem, u, means, variances) -> float:
    track = float(np.sum(problem.q_weights * (problem.y_ref - means) ** 2))
    spread = float(np.sum(problem.q_weights * variances))
    effort = float(np.sum(problem.r_weights * (problem.u_ref - u) ** 2))
    return track + spread + effort


def optimize_narx_input(post: GpPosterior, problem: MpcProblem, u0,
                        initial_step: float = 1.0) -> ControlSolution:
    """Derivative-free coordinate search on the mean-propagation cost.

    Compass search with shrinking steps: never accepts an ascent, stops when
    the step falls below ``COORD_SEARCH_TOL``.  The posterior-mean
    composition need not be smooth (spline kernels), so no gradients are
    assumed.
    """
    u = np.asarray(u0, dtype=float).ravel().copy()
    if u.size != problem.horizon:
        raise ValueError("u0 length must equal the horizon")

    def cost_at(v):
        c = narx_cost(post, problem, v)
        if not np.isfinite(c):
            raise ValueError(f"non-finite cost encountered at u = {v.tolist()}")
        return c

    best = cost_at(u)
    step = float(initial_step)
    cycles = 0
    while step > COORD_SEARCH_TOL and cycles < COORD_SEARCH_MAX_CYCLES:
        improved = False
        for i in range(u.size):
            for direction in (step, -step):
                trial = u.copy()
                trial[i] += direction
                c = cost_at(trial)
                if c < best:
                    u, best = trial, c
                    improved = True
                    break
        if not improved:
            step *= 0.5
        cycles += 1
    return ControlSolution(u=u, predicted_cost=best, method="narx")
