import dataclasses

import numpy as np
import pytest

from dsamd.errors import NumericError, ParameterError, ShapeError, StateError
from dsamd.geometry import FeasibleSet
from dsamd.oracle import (
    GroundTruth,
    LogisticTask,
    OracleSample,
    OracleStream,
    SubgradientEstimate,
    batch_gradients,
    build_ground_truth,
    estimate_noise_variance,
    estimate_smoothness,
    evaluate_gap,
    mini_batch,
    negative_log_likelihood,
    sample_stream,
    stochastic_subgradient,
)
from dsamd.utils.file_manager import ArtifactManager


def test_stream_is_deterministic(task):
    first = sample_stream(task, 2, 300)
    second = sample_stream(task, 2, 300)
    assert np.array_equal(first.features, second.features)
    assert first.label == second.label


def test_windows_cross_block_boundaries(task):
    stream = OracleStream(task, block_size=8)
    features, labels = stream.samples(1, 5, 10)
    singles = [stream.samples(1, t, 1) for t in range(5, 15)]
    assert np.array_equal(features, np.vstack([f for f, _ in singles]))
    assert np.array_equal(labels, np.concatenate([lab for _, lab in singles]))


def test_streams_and_holdout_use_distinct_keys(task):
    stream = OracleStream(task)
    assert not np.array_equal(stream.samples(0, 1, 5)[0], stream.samples(1, 1, 5)[0])
    truth = build_ground_truth(task, 5, prepare=False)
    assert not np.array_equal(truth.features, stream.samples(0, 1, 5)[0])


def test_zero_variance_features_equal_class_means():
    task = LogisticTask.from_seed(3, dimension=4, sigma_r2=0.0)
    features, labels = OracleStream(task).samples(0, 1, 50)
    means = np.where(labels[:, None] == 1.0, task.mu1, task.mu0)
    assert np.array_equal(features, means)


def test_label_frequency(task):
    _, labels = OracleStream(task).samples(0, 1, 100_000)
    assert abs(labels.mean() - 0.5) <= 3 * np.sqrt(0.25 / 100_000)


def test_invalid_task_parameters():
    with pytest.raises(ParameterError):
        LogisticTask.from_seed(0, dimension=3, label_prior=1.0)
    with pytest.raises(ParameterError):
        OracleStream(LogisticTask.from_seed(0, dimension=3)).samples(0, 0, 1)


def test_gradient_at_origin(task):
    y = np.array([0.3, -1.2, 2.0])
    grad = stochastic_subgradient(task, np.zeros(task.n), OracleSample(features=y, label=1.0))
    assert grad == pytest.approx(-0.5 * np.append(y, 1.0))


def test_saturated_gradient_vanishes(task):
    y = np.array([1.0, 2.0, -1.0])
    x_aug = np.append(100.0 * y, 0.0)
    grad = stochastic_subgradient(task, x_aug, OracleSample(features=y, label=1.0))
    assert np.abs(grad).max() <= 1e-12


def test_gradient_matches_finite_differences(task):
    rng = np.random.default_rng(4)
    h = 1e-6
    for _ in range(100):
        x_aug = rng.standard_normal(task.n)
        sample = OracleSample(features=rng.standard_normal(task.dimension), label=float(rng.integers(2)))
        grad = stochastic_subgradient(task, x_aug, sample)
        basis = np.eye(task.n)
        numeric = np.array(
            [(negative_log_likelihood(x_aug + h * e, sample) - negative_log_likelihood(x_aug - h * e, sample)) / (2 * h) for e in basis]
        )
        assert np.linalg.norm(grad - numeric) <= 1e-5 * np.linalg.norm(grad) + 1e-9


def test_gradient_rejects_wrong_shape(task):
    with pytest.raises(ShapeError):
        stochastic_subgradient(task, np.zeros(task.n + 1), sample_stream(task, 0, 1))
    with pytest.raises(ShapeError):
        batch_gradients(np.zeros((2, task.n)), np.zeros((3, 4, task.dimension)), np.zeros((3, 4)))


def test_batch_of_one_is_single_sample_gradient(task):
    x_aug = np.linspace(-0.5, 0.5, task.n)
    estimate = mini_batch(task, 1, 7, 1, x_aug)
    assert estimate.batch_size == 1
    assert estimate.vector == pytest.approx(stochastic_subgradient(task, x_aug, sample_stream(task, 1, 7)))


def test_batch_averages_its_window(task):
    x_aug = np.linspace(-0.5, 0.5, task.n)
    estimate = mini_batch(task, 0, 3, 4, x_aug)
    singles = [stochastic_subgradient(task, x_aug, sample_stream(task, 0, t)) for t in range(9, 13)]
    assert estimate.vector == pytest.approx(np.mean(singles, axis=0))


def test_batch_variance_scales_with_batch_size(task):
    stream = OracleStream(task)
    x_aug = np.full(task.n, 0.1)
    reps = 2_000
    singles = np.array([mini_batch(task, 0, s, 1, x_aug, stream).vector for s in range(1, reps + 1)])
    batches = np.array([mini_batch(task, 1, s, 16, x_aug, stream).vector for s in range(1, reps + 1)])
    ratio = batches.var(axis=0).sum() / singles.var(axis=0).sum()
    assert 0.8 / 16 <= ratio <= 1.2 / 16


def test_nodes_see_independent_samples(task):
    x_aug = np.zeros(task.n)
    assert not np.allclose(mini_batch(task, 0, 1, 4, x_aug).vector, mini_batch(task, 1, 1, 4, x_aug).vector)


def test_mini_batch_validation(task):
    with pytest.raises(ParameterError):
        mini_batch(task, 0, 1, 0, np.zeros(task.n))
    with pytest.raises(NumericError):
        SubgradientEstimate(vector=np.array([np.inf]), eval_point=np.zeros(1), batch_size=1)


def test_stream_gradients_are_unbiased(task, truth):
    x_aug = np.array([0.2, -0.1, 0.05, 0.3])
    features, labels = OracleStream(task).samples(0, 1, 100_000)
    stream_grads = (1.0 / (1.0 + np.exp(-(features @ x_aug[:-1] + x_aug[-1]))) - labels)[:, None] * np.hstack(
        [features, np.ones((labels.size, 1))]
    )
    holdout_grads = truth.per_sample_gradients(x_aug)
    stderr = np.sqrt(stream_grads.var(axis=0) / labels.size + holdout_grads.var(axis=0) / truth.labels.size)
    assert np.all(np.abs(stream_grads.mean(axis=0) - truth.gradient(x_aug)) <= 4.5 * stderr)


def test_gap_is_zero_at_minimizer(truth):
    assert evaluate_gap(truth, truth.x_star) == pytest.approx(0.0, abs=1e-9)
    assert np.linalg.norm(truth.gradient(truth.x_star)) <= 1e-8


def test_gap_is_nonnegative(truth):
    points = np.random.default_rng(2).standard_normal((20, truth.task.n))
    gaps = evaluate_gap(truth, points)
    assert gaps.shape == (20,)
    assert np.all(gaps >= 0.0)
    assert gaps[3] == pytest.approx(evaluate_gap(truth, points[3]))


def test_gap_is_not_clamped_below_zero(truth):
    shifted = dataclasses.replace(truth, psi_star=truth.psi_star + 1.0)
    assert evaluate_gap(shifted, truth.x_star) == pytest.approx(-1.0, abs=1e-9)
    rows = np.stack([truth.x_star, np.zeros(truth.task.n)])
    assert evaluate_gap(shifted, rows) == pytest.approx(truth.objective(rows) - truth.psi_star - 1.0)


def test_gap_decreases_along_full_batch_descent(truth):
    step = 1.0 / estimate_smoothness(truth)
    x = np.zeros(truth.task.n)
    gaps = [evaluate_gap(truth, x)]
    for _ in range(50):
        x = x - step * truth.gradient(x)
        gaps.append(evaluate_gap(truth, x))
    assert all(after <= before + 1e-12 for before, after in zip(gaps, gaps[1:], strict=False))
    assert gaps[-1] < gaps[0]


def test_unprepared_truth_cannot_score(task):
    truth = build_ground_truth(task, 100, prepare=False)
    assert not truth.prepared
    with pytest.raises(StateError):
        evaluate_gap(truth, np.zeros(task.n))


def test_constrained_ground_truth_stays_in_domain(task):
    domain = FeasibleSet.ball(np.zeros(task.n), 0.05)
    truth = build_ground_truth(task, 1_000, domain)
    assert domain.contains(truth.x_star)
    free = build_ground_truth(task, 1_000)
    assert truth.psi_star >= free.psi_star - 1e-12


def test_holdout_cache_round_trip(task, tmp_path):
    cache = ArtifactManager(tmp_path)
    first = build_ground_truth(task, 300, cache=cache, prepare=False)
    assert len(list(tmp_path.glob("holdout_*.npz"))) == 1
    second = build_ground_truth(task, 300, cache=cache, prepare=False)
    assert np.array_equal(first.features, second.features)
    assert np.array_equal(first.labels, second.labels)


def test_smoothness_and_noise_estimates(truth):
    expected = 0.25 * np.mean(np.sum(truth.features**2, axis=1) + 1.0)
    assert estimate_smoothness(truth) == pytest.approx(expected)
    assert np.linalg.eigvalsh(truth.hessian(truth.x_star)).max() <= estimate_smoothness(truth)
    assert estimate_noise_variance(truth) > 0.0


def test_ground_truth_objective_on_rows(truth):
    points = np.zeros((3, truth.task.n))
    values = truth.objective(points)
    assert values == pytest.approx([np.log(2.0)] * 3)
    assert isinstance(GroundTruth.objective(truth, points[0]), float)
