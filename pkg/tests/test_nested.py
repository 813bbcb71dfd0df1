import csv
import math
from pathlib import Path

import numpy as np
import pytest
from scipy.special import logsumexp
from scipy.stats import kstest

from marginal_gp.errors import PriorExhausted
from marginal_gp.gp.dataset import Dataset
from marginal_gp.gp.regression import log_marginal_likelihood
from marginal_gp.kernels.spectral_mixture import SmHyperParams
from marginal_gp.priors.hyperpriors import PriorSpec
from marginal_gp.samplers.nested import (
    DeadPoint,
    LivePoint,
    WeightedPosterior,
    constrained_slice_step,
    merge_runs,
    nested_sample,
    reflect_into_unit_cube,
    resample_equal,
    run_nested,
    run_nested_multi,
    write_nested_trace,
)

BOX = 10.0


def gaussian_loglike(theta: np.ndarray) -> float:
    return float(-0.5 * np.sum(theta**2) - 0.5 * theta.shape[0] * math.log(2 * math.pi))


def box_transform(u: np.ndarray) -> np.ndarray:
    return BOX * u - BOX / 2


def test_gaussian_evidence_matches_closed_form() -> None:
    true_log_z = -3 * math.log(BOX)
    errors = []
    for seed in range(10):
        post = nested_sample(gaussian_loglike, box_transform, ndim=3, n_live=100, rng_seed=seed)
        error = post.log_evidence - true_log_z
        errors.append(error)
        assert abs(error) < 3 * math.sqrt(post.information / 100)
        assert post.log_evidence_error == pytest.approx(math.sqrt(post.information / 100))
    assert float(np.mean(np.abs(errors))) < 0.5


def test_weights_are_normalised_and_thresholds_increase() -> None:
    post = nested_sample(gaussian_loglike, box_transform, ndim=2, n_live=50, rng_seed=1)
    assert float(np.sum(post.weights)) == pytest.approx(1.0, abs=1e-10)
    assert np.all(np.diff(post.log_likes) >= 0)
    assert len(post.dead_points) == post.n_iterations + post.n_live
    assert all(point.log_like == pytest.approx(gaussian_loglike(point.params)) for point in post.dead_points)


def test_constant_likelihood_gives_exact_evidence() -> None:
    post = nested_sample(lambda theta: -2.0, box_transform, ndim=2, n_live=20, rng_seed=0)
    assert post.plateau
    assert post.log_evidence == pytest.approx(-2.0, abs=1e-12)
    assert float(np.sum(post.weights)) == pytest.approx(1.0)


def test_identical_seeds_give_identical_runs() -> None:
    first = nested_sample(gaussian_loglike, box_transform, ndim=2, n_live=30, rng_seed=7)
    second = nested_sample(gaussian_loglike, box_transform, ndim=2, n_live=30, rng_seed=7)
    assert first.log_evidence == second.log_evidence
    assert np.array_equal(first.log_likes, second.log_likes)


def test_invalid_settings_are_rejected() -> None:
    with pytest.raises(ValueError):
        nested_sample(gaussian_loglike, box_transform, ndim=2, n_live=1)
    with pytest.raises(ValueError):
        nested_sample(gaussian_loglike, box_transform, ndim=2, stop_frac=1.5)


def test_reflection_folds_back_into_the_cube() -> None:
    assert np.allclose(reflect_into_unit_cube(np.array([1.2, -0.3, 2.5, 0.4])), [0.8, 0.3, 0.5, 0.4])


def test_slice_step_stays_above_threshold() -> None:
    rng = np.random.default_rng(0)

    def evaluate(cube: np.ndarray) -> tuple[np.ndarray, float]:
        theta = box_transform(cube)
        return theta, gaussian_loglike(theta)

    cube = np.full(3, 0.5)
    start = LivePoint(cube=cube, params=box_transform(cube), log_like=gaussian_loglike(box_transform(cube)))
    threshold = start.log_like - 2.0
    for _ in range(50):
        moved = constrained_slice_step(start, evaluate, threshold, n_slices=5, rng=rng)
        assert moved.log_like > threshold
        assert np.all((moved.cube >= 0) & (moved.cube <= 1))


def test_slice_step_reports_exhaustion_on_a_plateau() -> None:
    rng = np.random.default_rng(0)
    start = LivePoint(cube=np.full(2, 0.5), params=None, log_like=0.0)

    def evaluate(cube: np.ndarray) -> tuple[None, float]:
        return None, -1.0 if np.linalg.norm(cube - 0.5) > 1e-15 else 0.0

    with pytest.raises(PriorExhausted):
        constrained_slice_step(start, evaluate, threshold=-1.0, n_slices=1, rng=rng, max_shrinks=1000)


def _posterior(log_weights: list[float], log_evidence: float = 0.0) -> WeightedPosterior:
    points = tuple(
        DeadPoint(cube=np.zeros(1), params=index, log_like=float(index), log_weight=w, log_volume=0.0)
        for index, w in enumerate(log_weights)
    )
    return WeightedPosterior(
        dead_points=points, log_evidence=log_evidence, n_live=2, n_iterations=0, information=0.0, n_calls=0
    )


def test_systematic_resampling_counts() -> None:
    post = _posterior([math.log(0.75), math.log(0.25)])
    draws = resample_equal(post, 4, np.random.default_rng(3))
    assert sorted(draws) == [0, 0, 0, 1]
    many = resample_equal(post, 1000, np.random.default_rng(4))
    assert many.count(0) == 750


def test_merging_runs_averages_evidence() -> None:
    first = _posterior([math.log(0.5), math.log(0.5)], log_evidence=math.log(2.0))
    second = _posterior([math.log(0.5), math.log(0.5)], log_evidence=math.log(4.0))
    merged = merge_runs([first, second])
    assert merged.log_evidence == pytest.approx(math.log(3.0))
    assert float(np.sum(merged.weights)) == pytest.approx(1.0)
    assert len(merged.dead_points) == 4
    assert np.all(np.diff(merged.log_likes) >= 0)
    # points of the run with the larger evidence carry twice the weight
    assert sorted(merged.weights) == pytest.approx([1 / 6, 1 / 6, 1 / 3, 1 / 3])


def test_gp_run_returns_hyperparameter_samples(tmp_path: Path) -> None:
    rng = np.random.default_rng(5)
    X = np.linspace(0.0, 1.0, 12)
    data = Dataset(inputs=X, targets=np.sin(2 * math.pi * 3 * X) + 0.1 * rng.standard_normal(12))
    spec = PriorSpec(q_components=1, dims=1, f_fun=1.0, f_nyq=6.0)
    post = run_nested(lambda params: log_marginal_likelihood(data, params), spec, n_live=25, rng_seed=0)
    assert math.isfinite(post.log_evidence)
    assert all(isinstance(sample, SmHyperParams) for sample in post.samples)
    assert float(np.sum(post.weights)) == pytest.approx(1.0)

    path = write_nested_trace(post, tmp_path / "trace.csv")
    with path.open(encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["iteration", "log_volume", "log_like", "log_evidence"]
    assert len(rows) == post.n_iterations + 1


def test_resampling_concentrated_weight() -> None:
    post = _posterior([0.0, -math.inf])
    assert resample_equal(post, 5, np.random.default_rng(0)) == [0] * 5


def test_resampled_mean_matches_weighted_mean() -> None:
    rng = np.random.default_rng(8)
    values = rng.uniform(1.0, 5.0, 50)
    weights = rng.random(50)
    weights /= weights.sum()
    points = tuple(
        DeadPoint(cube=np.zeros(1), params=float(v), log_like=0.0, log_weight=float(np.log(w)), log_volume=0.0)
        for v, w in zip(values, weights)
    )
    post = WeightedPosterior(
        dead_points=points, log_evidence=0.0, n_live=2, n_iterations=0, information=0.0, n_calls=0
    )
    draws = resample_equal(post, 1000, np.random.default_rng(9))
    assert float(np.mean(draws)) == pytest.approx(float(values @ weights), rel=0.02)


def test_slice_step_without_constraint_preserves_the_prior() -> None:
    rng = np.random.default_rng(11)

    def flat(cube: np.ndarray) -> tuple[np.ndarray, float]:
        return cube, 0.0

    moved = np.array(
        [
            constrained_slice_step(
                LivePoint(cube=start, params=start, log_like=0.0), flat, -math.inf, n_slices=1, rng=rng
            ).cube
            for start in rng.random((10_000, 3))
        ]
    )
    for column in moved.T:
        assert kstest(column, "uniform").statistic < 0.02


def test_chained_slice_steps_decorrelate() -> None:
    rng = np.random.default_rng(12)
    width = 0.1

    def slab(cube: np.ndarray) -> tuple[np.ndarray, float]:
        return cube, float(-0.5 * np.sum((cube - 0.5) ** 2) / width**2)

    # constrained region is the ball of radius 0.3 around the centre
    threshold = -0.5 * (0.3 / width) ** 2
    point = LivePoint(cube=np.full(3, 0.5), params=None, log_like=0.0)
    chain = []
    for _ in range(1000):
        point = constrained_slice_step(point, slab, threshold, n_slices=5, rng=rng)
        chain.append(point.cube)
    chain_array = np.array(chain)
    for column in chain_array.T:
        assert np.corrcoef(column[:-1], column[1:])[0, 1] < 0.5


def test_both_modes_of_a_bimodal_likelihood_share_the_weight() -> None:
    centres = np.array([[0.25, 0.5], [0.75, 0.5]])
    width = 0.05

    def bimodal(theta: np.ndarray) -> float:
        log_terms = -0.5 * np.sum((theta - centres) ** 2, axis=1) / width**2
        return float(logsumexp(log_terms) - math.log(2 * 2 * math.pi * width**2))

    fractions, log_evidences = [], []
    for seed in range(20):
        post = nested_sample(bimodal, lambda u: u, ndim=2, n_live=100, rng_seed=seed)
        left = np.array([point.params[0] < 0.5 for point in post.dead_points])
        fractions.append(float(np.sum(post.weights[left])))
        log_evidences.append(post.log_evidence)
    assert 0.4 <= float(np.mean(fractions)) <= 0.6
    # both Gaussians lie well inside the unit square, so Z is 1
    assert abs(float(np.mean(log_evidences))) < 0.2


def test_merged_runs_agree_with_single_runs() -> None:
    true_log_z = -3 * math.log(BOX)
    runs = [nested_sample(gaussian_loglike, box_transform, ndim=3, n_live=100, rng_seed=seed) for seed in range(4)]
    merged = merge_runs(runs)
    single_evidences = [run.log_evidence for run in runs]
    assert min(single_evidences) <= merged.log_evidence <= max(single_evidences)
    assert merged.log_evidence_error < min(run.log_evidence_error for run in runs)
    assert abs(merged.log_evidence - true_log_z) < 3 * merged.log_evidence_error + 0.05
    assert float(np.sum(merged.weights)) == pytest.approx(1.0, abs=1e-10)
    assert len(merged.dead_points) == sum(len(run.dead_points) for run in runs)


def test_concurrent_runs_pool_like_sequential_ones() -> None:
    rng = np.random.default_rng(6)
    X = np.linspace(0.0, 1.0, 10)
    data = Dataset(inputs=X, targets=np.cos(2 * math.pi * 2 * X) + 0.1 * rng.standard_normal(10))
    spec = PriorSpec(q_components=1, dims=1, f_fun=1.0, f_nyq=5.0)

    def loglike(params: SmHyperParams) -> float:
        return log_marginal_likelihood(data, params)

    pooled = run_nested_multi(loglike, spec, runs=2, rng_seed=3, workers=2, n_live=20)
    seeds = np.random.SeedSequence(3).spawn(2)
    sequential = merge_runs([run_nested(loglike, spec, n_live=20, rng_seed=seed) for seed in seeds])
    assert pooled.log_evidence == sequential.log_evidence
    assert np.array_equal(pooled.log_likes, sequential.log_likes)
    assert pooled.n_live == 40
