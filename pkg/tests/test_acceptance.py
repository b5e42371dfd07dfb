"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Tolerances are fixed here, not tuned: cost bands are +-15% around
the benchmark's reported means, numerical identities use the stated 1e-6 /
1e-8 / 1e-10 levels, and Monte Carlo cross-checks use 3 standard errors.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest

from bayesmpc.control import MpcProblem, bsp_optimal_input, quadratic_cost
from bayesmpc.experiment import ExperimentConfig, run_experiment
from bayesmpc.kernels import KernelSpec, gram_matrix
from bayesmpc.moments import closed_form_moments, monte_carlo_moments
from bayesmpc.regression import (
    Dataset,
    ThetaBelief,
    fit_posterior,
    linear_posterior,
    log_marginal_likelihood,
    posterior_mean,
    posterior_variance,
)
from bayesmpc.tuning import degrees_of_freedom, empirical_bayes

MU = np.array([10.0, 5.0])
COV = np.array([[4.0, 0.9], [0.9, 4.0]])
BELIEF = ThetaBelief(mean=MU, covariance=COV)
BENCH_SEED = 20250810


def _report(criterion: str, detail: str):
    print(f"\n[acceptance] {criterion}: PASS ({detail})")


def benchmark_problem():
    return MpcProblem(
        horizon=2, q_weights=np.ones(2), r_weights=np.zeros(2),
        y_ref=np.array([10.0, 10.0]), u_ref=np.zeros(2),
        y_past=np.array([1.0]), u_past=np.zeros(0),
    )


@pytest.fixture(scope="module")
def benchmark_run():
    config = ExperimentConfig(mu=MU, sigma_theta=COV, problem=benchmark_problem(),
                              runs=10_000, seed=BENCH_SEED)
    t0 = time.perf_counter()
    result = run_experiment(config, threads=1)
    elapsed = time.perf_counter() - t0
    return result, elapsed


class TestCriterion1ExperimentReproduction:
    def test_cost_means_and_runtime(self, benchmark_run):
        result, elapsed = benchmark_run
        ctrl = result.summary["controllers"]
        bsp = ctrl["bsp"]["components"]["J"]
        nominal = ctrl["nominal"]["components"]["J"]
        assert 184.0 <= bsp["mean"] <= 250.0
        assert 795.0 <= nominal["mean"] <= 1075.0
        assert nominal["mean"] / bsp["mean"] >= 3.0
        assert elapsed <= 60.0
        _report(
            "criterion 1 (experiment reproduction)",
            f"bsp mean {bsp['mean']:.1f} +- {bsp['se']:.1f} (SE), "
            f"nominal mean {nominal['mean']:.1f} +- {nominal['se']:.1f} (SE), "
            f"ratio {nominal['mean'] / bsp['mean']:.2f}, {elapsed:.1f}s single-threaded",
        )


class TestCriterion2DirectionalFinding:
    def test_sign_consistent_across_seeds(self):
        seeds = [11, 23, 37, 59, 101]
        for seed in seeds:
            config = ExperimentConfig(mu=MU, sigma_theta=COV,
                                      problem=benchmark_problem(),
                                      runs=10_000, seed=seed)
            ctrl = run_experiment(config).summary["controllers"]
            j1_nom = ctrl["nominal"]["components"]["J1"]["mean"]
            j1_bsp = ctrl["bsp"]["components"]["J1"]["mean"]
            j2_nom = ctrl["nominal"]["components"]["J2"]["mean"]
            j2_bsp = ctrl["bsp"]["components"]["J2"]["mean"]
            assert j1_nom < j1_bsp, f"seed {seed}"
            assert j2_nom > j2_bsp, f"seed {seed}"
        _report("criterion 2 (directional finding)",
                f"J1 nominal < J1 bsp and J2 nominal > J2 bsp at seeds {seeds}")


class TestCriterion3OracleExactness:
    def test_oracle_cost_is_zero(self, benchmark_run):
        result, _ = benchmark_run
        included = 0
        worst = 0.0
        for rec in result.records:
            if "oracle" not in rec.costs:
                continue
            included += 1
            worst = max(worst, rec.costs["oracle"].total)
            assert rec.costs["oracle"].total <= 1e-9
        assert included == result.summary["runs"] - result.summary["oracle_excluded"]
        _report("criterion 3 (oracle exactness)",
                f"max realized cost {worst:.2e} over {included} runs")


class TestCriterion4MomentCrossValidation:
    def test_closed_forms_within_three_standard_errors(self):
        closed = closed_form_moments(BELIEF, np.ones(2))
        n_batches, batch = 25, 400_000  # 1e7 samples total
        fields = ("e_AtQA", "e_At", "e_AtQB")
        sums = {f: [] for f in fields}
        for k in range(n_batches):
            mc = monte_carlo_moments(BELIEF, np.eye(2), 2, 1, samples=batch,
                                     seed=1000 + k)
            for f in fields:
                sums[f].append(getattr(mc, f))
        checked = 0
        for f in fields:
            stack = np.stack(sums[f])
            mean = stack.mean(axis=0)
            se = stack.std(axis=0, ddof=1) / np.sqrt(n_batches)
            target = getattr(closed, f)
            gap = np.abs(target - mean)
            assert np.all(gap <= 3.0 * se + 1e-12), (f, gap, se)
            checked += target.size
        # the transcribed values frozen in the unit tests, re-confirmed here
        assert closed.e_AtQA[0, 0] == pytest.approx(3301.62)
        assert closed.e_AtQA[0, 1] == pytest.approx(538.0)
        assert closed.e_AtQA[1, 1] == pytest.approx(104.0)
        assert closed.e_At[0, 1] == pytest.approx(50.9)
        _report("criterion 4 (moment cross-validation)",
                f"{checked} entries within 3 SE of 1e7-sample estimates; "
                "3301.62 / 538 / 104 / 50.9 confirmed")


class TestCriterion5PosteriorCorrectness:
    def test_kernel_trick_equivalence(self):
        rng = np.random.default_rng(50)
        worst = 0.0
        for _ in range(50):
            n, d = int(rng.integers(2, 9)), int(rng.integers(1, 4))
            F = rng.standard_normal((n, d))
            y = rng.standard_normal(n)
            a = rng.standard_normal((d, d))
            M = a @ a.T + 0.2 * np.eye(d)
            lam = float(rng.uniform(0.2, 3.0))
            sigma2 = float(rng.uniform(0.05, 1.0))
            belief = linear_posterior(F, y, M, lam, sigma2)
            spec = KernelSpec(family="linear", structure_matrix=M)
            post = fit_posterior(Dataset(locations=F, outputs=y), spec, lam, sigma2)
            for _ in range(3):
                z = rng.standard_normal(d)
                dm = abs(posterior_mean(post, z) - float(z @ belief.mean))
                dv = abs(posterior_variance(post, z) - float(z @ belief.covariance @ z))
                worst = max(worst, dm, dv)
                assert dm <= 1e-8 and dv <= 1e-8
        _report("criterion 5a (kernel-trick equivalence)",
                f"max deviation {worst:.2e} over 50 instances")

    def test_marginal_likelihood_oracle(self):
        rng = np.random.default_rng(51)
        worst = 0.0
        for _ in range(20):
            n = int(rng.integers(1, 8))
            spec = KernelSpec(family="gaussian", eta=float(rng.uniform(0.5, 4.0)))
            data = Dataset(locations=rng.uniform(0, 3, (n, 2)),
                           outputs=rng.standard_normal(n))
            lam = float(rng.uniform(0.2, 2.0))
            sigma2 = float(rng.uniform(0.05, 1.0))
            cov = lam * gram_matrix(spec, data.locations) + sigma2 * np.eye(n)
            oracle = -0.5 * (
                data.outputs @ np.linalg.solve(cov, data.outputs)
                + np.linalg.slogdet(2 * np.pi * cov)[1]
            )
            got = log_marginal_likelihood(data, spec, lam, sigma2)
            worst = max(worst, abs(got - oracle))
            assert got == pytest.approx(oracle, abs=1e-10)
        _report("criterion 5b (marginal likelihood)",
                f"max deviation {worst:.2e} vs dense Gaussian density")


class TestCriterion6EmpiricalBayes:
    def test_fixed_point_on_random_datasets(self):
        from bayesmpc._linalg import psd_factor

        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(20):
            n = int(rng.integers(15, 40))
            locs = np.sort(rng.uniform(0.1, 5.0, size=(n, 1)), axis=0)
            gram = gram_matrix(KernelSpec(family="spline"), locs)
            lam_true = float(rng.uniform(0.5, 2.0))
            s2_true = float(rng.uniform(0.05, 0.5))
            f = psd_factor(lam_true * gram) @ rng.standard_normal(n)
            y = f + np.sqrt(s2_true) * rng.standard_normal(n)
            r = empirical_bayes(gram, y)
            assert r.converged
            assert r.residual <= 1e-6
            worst = max(worst, r.residual)
        _report("criterion 6a (empirical Bayes fixed point)",
                f"max residual {worst:.2e} over 20 datasets")

    def test_dof_monotone_and_endpoints(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            n = int(rng.integers(4, 12))
            a = rng.standard_normal((n, n))
            gram = a @ a.T + 0.5 * np.eye(n)
            qs = [degrees_of_freedom(gram, g) for g in np.logspace(-8, 8, 33)]
            assert np.all(np.diff(qs) < 0)
            assert abs(qs[0] - n) <= 1e-3
            assert abs(qs[-1]) <= 1e-3
        _report("criterion 6b (degrees of freedom)",
                "q strictly decreasing; endpoint limits within 1e-3")


class TestCriterion7BspOptimality:
    def test_stationarity_perturbations_gradient(self):
        problem = benchmark_problem()
        moments = closed_form_moments(BELIEF, problem.q_weights)
        sol = bsp_optimal_input(moments, problem)
        normal = moments.e_AtQA + problem.r_matrix()
        rhs = moments.e_At @ (problem.q_weights * problem.y_ref) \
            - moments.e_AtQB @ problem.y_past
        resid = np.linalg.norm(normal @ sol.u - rhs)
        assert resid <= 1e-10 * np.linalg.norm(rhs)

        base = quadratic_cost(moments, problem, sol.u)
        rng = np.random.default_rng(3)
        for _ in range(100):
            delta = rng.standard_normal(2)
            delta /= np.linalg.norm(delta)
            for eps in (1e-2, 1e-1, 1.0):
                assert quadratic_cost(moments, problem, sol.u + eps * delta) > base

        u = rng.standard_normal(2)
        analytic = 2.0 * (normal @ u - rhs)
        h = 1e-5
        fd = np.empty(2)
        for i in range(2):
            up, dn = u.copy(), u.copy()
            up[i] += h
            dn[i] -= h
            fd[i] = (quadratic_cost(moments, problem, up)
                     - quadratic_cost(moments, problem, dn)) / (2 * h)
        np.testing.assert_allclose(fd, analytic, rtol=1e-6)
        _report("criterion 7 (optimal-input stationarity)",
                f"residual {resid:.2e}, 100 perturbations ascend, "
                "finite-difference gradient matches to 1e-6")


class TestCriterion8Determinism:
    def test_bitwise_identical_outputs_across_threads(self, tmp_path):
        cfg = {
            "seed": 77,
            "output": None,
            "belief": {"mu": MU.tolist(), "sigma_theta": COV.tolist()},
            "problem": {
                "horizon": 2, "q_weights": [1.0, 1.0], "r_weights": [0.0, 0.0],
                "y_ref": [10.0, 10.0], "u_ref": [0.0, 0.0],
                "y_past": [1.0], "u_past": [],
            },
            "experiment": {"runs": 10_000},
        }
        files = {}
        for threads in (1, 8):
            out = tmp_path / f"t{threads}"
            cfg["output"] = str(out)
            cfg_path = tmp_path / f"cfg{threads}.json"
            cfg_path.write_text(json.dumps(cfg))
            proc = subprocess.run(
                [sys.executable, "-m", "bayesmpc", "experiment",
                 "--config", str(cfg_path), "--threads", str(threads)],
                capture_output=True, text=True,
            )
            assert proc.returncode == 0, proc.stdout + proc.stderr
            files[threads] = (
                (tmp_path / f"t{threads}.runs.csv").read_bytes(),
                (tmp_path / f"t{threads}.summary.json").read_bytes(),
            )
        assert files[1][0] == files[8][0]
        assert files[1][1] == files[8][1]
        _report("criterion 8 (determinism)",
                "runs CSV and summary JSON byte-identical for 1 and 8 threads")
