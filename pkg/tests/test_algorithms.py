import numpy as np
import pytest

from dsamd.algorithms import (
    Adsamd,
    Dsamd,
    build_baseline,
    consensus_budget,
    corollary_batch_size,
    dgd_period,
    make_schedule,
    run_adsamd,
    run_baseline,
    run_dsamd,
)
from dsamd.config import Algorithm, MixingRule
from dsamd.errors import ConfigError, ScheduleError
from dsamd.geometry import EuclideanGeometry, FeasibleSet
from dsamd.models import CorollaryBatch, ExplicitBatch, GraphFamily, RateSchedule
from dsamd.network import build_mixing_matrix, generate_topology
from dsamd.oracle import LogisticTask, OracleStream, batch_gradients, build_ground_truth


def test_explicit_schedule():
    schedule = make_schedule(0.5, 16, ExplicitBatch(b=2), 0.3, 4)
    assert (schedule.b, schedule.r, schedule.S, schedule.discarded) == (2, 1, 8, 0)


def test_corollary_schedule():
    schedule = make_schedule(0.5, 16, CorollaryBatch(c_mult=0.1), 2 / 3, 16)
    assert schedule.b == 3
    assert schedule.r == 1
    assert schedule.S == 5
    assert schedule.discarded == 1


def test_one_round_per_sample():
    schedule = make_schedule(1.0, 10, ExplicitBatch(b=1), 0.5, 4)
    assert (schedule.r, schedule.S) == (1, 10)


def test_exact_averaging_batch_size():
    assert corollary_batch_size(16, 16, 0.5, 0.0, 0.1) == 2
    assert corollary_batch_size(16, 16, 1.0, 0.0, 0.1) == 1
    assert consensus_budget(3, 1 / 3) == 1


def test_schedule_errors():
    with pytest.raises(ScheduleError):
        make_schedule(0.5, 4, ExplicitBatch(b=5), 0.3, 4)
    with pytest.raises(ScheduleError):
        make_schedule(0.5, 8, ExplicitBatch(b=2), 0.3, 4, r=2)
    with pytest.raises(ScheduleError):
        make_schedule(0.0, 8, ExplicitBatch(b=2), 0.3, 4)
    with pytest.raises(ScheduleError):
        make_schedule(0.5, 8, ExplicitBatch(b=2), 1.0, 4)


def test_schedule_with_no_consensus_round():
    schedule = make_schedule(0.25, 8, ExplicitBatch(b=2), 0.3, 4)
    assert schedule.r == 0


def test_corollary_batch_is_cut_to_the_horizon():
    schedule = make_schedule(0.5, 4, CorollaryBatch(c_mult=0.1), 0.99, 20)
    assert (schedule.b, schedule.r, schedule.S) == (4, 2, 1)
    assert schedule.clamped
    assert not make_schedule(0.5, 16, CorollaryBatch(c_mult=0.1), 2 / 3, 16).clamped


def test_clamped_schedule_is_recorded_in_metadata(task, geometry, path3):
    schedule = make_schedule(0.5, 4, CorollaryBatch(c_mult=0.1), 0.99, 3)
    trace = run_dsamd(task, geometry, path3, schedule, 0.1)
    assert trace.metadata == {"b": 4, "r": 2, "discarded": 0, "b_clamped": 1}


def test_inconsistent_schedule_is_rejected(task, geometry, complete4):
    with pytest.raises(ConfigError):
        Dsamd(task, geometry, complete4, RateSchedule(rho=0.5, T=8, b=2, r=3, S=4), 0.1)
    with pytest.raises(ConfigError):
        Dsamd(task, geometry, complete4, RateSchedule(rho=0.5, T=8, b=2, r=1, S=3), 0.1)


def test_geometry_dimension_must_match_task(task, complete4):
    wrong = EuclideanGeometry(FeasibleSet.ball(np.zeros(task.n + 1), 10.0))
    with pytest.raises(ConfigError):
        Dsamd(task, wrong, complete4, make_schedule(0.5, 8, ExplicitBatch(b=2), 0.0, 4), 0.1)


@pytest.mark.parametrize(("run", "central"), [(run_dsamd, Algorithm.CENTRAL_MD), (run_adsamd, Algorithm.CENTRAL_AMD)])
def test_single_node_matches_centralized(task, geometry, single_node, run, central):
    schedule = make_schedule(0.5, 200, ExplicitBatch(b=2), 0.0, 1, r=0)
    distributed = run(task, geometry, single_node, schedule, 0.2, eval_rounds="all")
    centralized = run_baseline(central, task, geometry, None, schedule, 0.2, eval_rounds="all", m=1, central_batch="mb")
    assert len(distributed.rounds) == schedule.S == 100
    for ours, reference in zip(distributed.reported, centralized.reported, strict=True):
        assert np.abs(ours - reference).max() <= 1e-12


@pytest.mark.parametrize(("run", "central"), [(run_dsamd, Algorithm.CENTRAL_MD), (run_adsamd, Algorithm.CENTRAL_AMD)])
def test_complete_graph_matches_pooled_centralized(task, geometry, complete4, run, central):
    schedule = make_schedule(0.5, 40, ExplicitBatch(b=2), complete4.lambda2, 4)
    assert schedule.r == 1
    distributed = run(task, geometry, complete4, schedule, 0.2, eval_rounds="all")
    centralized = run_baseline(central, task, geometry, complete4, schedule, 0.2, eval_rounds="all", central_batch="mb")
    for ours, points, reference in zip(distributed.reported, distributed.search_points, centralized.reported, strict=True):
        assert np.abs(ours - ours[0]).max() <= 1e-9
        assert np.abs(points - points[0]).max() <= 1e-9
        assert np.abs(ours - reference[0]).max() <= 1e-9


def test_zero_step_keeps_initial_point(task, geometry, path3):
    schedule = make_schedule(1.0, 6, ExplicitBatch(b=2), path3.lambda2, 3)
    trace = run_dsamd(task, geometry, path3, schedule, 0.0, eval_rounds="all")
    for reported in trace.reported:
        assert np.array_equal(reported, np.zeros((3, task.n)))


def test_running_average_starts_with_the_initial_point(task, geometry, path3):
    schedule = make_schedule(1.0, 10, ExplicitBatch(b=2), path3.lambda2, 3)
    trace = run_dsamd(task, geometry, path3, schedule, 0.5, eval_rounds="all")
    iterates = [np.zeros((3, task.n)), *trace.search_points]
    assert np.array_equal(trace.reported[0], iterates[0])
    for k, reported in enumerate(trace.reported):
        assert reported == pytest.approx(np.mean(iterates[: k + 1], axis=0), abs=1e-12)


def test_first_accelerated_round_reports_search_point(task, geometry, path3):
    schedule = make_schedule(1.0, 6, ExplicitBatch(b=2), path3.lambda2, 3)
    trace = run_adsamd(task, geometry, path3, schedule, 0.3, eval_rounds="all")
    assert np.array_equal(trace.reported[0], trace.search_points[0])


def test_trace_bookkeeping(task, geometry, path3, truth):
    schedule = make_schedule(1.0, 9, ExplicitBatch(b=2), path3.lambda2, 3)
    trace = run_dsamd(task, geometry, path3, schedule, 0.1, truth=truth, eval_rounds="all")
    assert trace.rounds == [1, 2, 3, 4]
    assert trace.samples == [6, 12, 18, 24]
    assert trace.metadata == {"b": 2, "r": 2, "discarded": 1}
    record = trace.to_record(per_node=True)
    assert len(record.node_gaps) == 4
    assert all(len(gaps) == 3 for gaps in record.node_gaps)
    assert record.final_gap == pytest.approx(np.mean(record.node_gaps[-1]))
    assert all(gap >= 0 for gap in record.mean_gaps)

    final = run_dsamd(task, geometry, path3, schedule, 0.1, truth=truth)
    assert final.rounds == [4]
    assert final.final_gap == pytest.approx(trace.final_gap)


def test_same_seed_is_reproducible(task, geometry, path3):
    schedule = make_schedule(1.0, 10, ExplicitBatch(b=2), path3.lambda2, 3)
    first = run_adsamd(task, geometry, path3, schedule, 0.3, seed=99)
    second = run_adsamd(task, geometry, path3, schedule, 0.3, seed=99)
    other = run_adsamd(task, geometry, path3, schedule, 0.3, seed=100)
    assert np.array_equal(first.reported[-1], second.reported[-1])
    assert not np.array_equal(first.reported[-1], other.reported[-1])


@pytest.mark.parametrize(
    "kind",
    [Algorithm.DSAMD, Algorithm.ADSAMD, Algorithm.CENTRAL_MD, Algorithm.CENTRAL_AMD, Algorithm.LOCAL_MD, Algorithm.DGD_MINIBATCH],
)
def test_iterates_stay_feasible(task, path3, kind):
    geometry = EuclideanGeometry(FeasibleSet.ball(np.zeros(task.n), 0.05))
    schedule = make_schedule(0.5, 12, ExplicitBatch(b=2), path3.lambda2, 3)
    if kind == Algorithm.DSAMD:
        trace = run_dsamd(task, geometry, path3, schedule, 1.0, eval_rounds="all")
    elif kind == Algorithm.ADSAMD:
        trace = run_adsamd(task, geometry, path3, schedule, 1.0, eval_rounds="all")
    else:
        trace = run_baseline(kind, task, geometry, path3, schedule, 1.0, eval_rounds="all")
    for reported, points in zip(trace.reported, trace.search_points, strict=True):
        assert geometry.domain.contains(reported)
        assert geometry.domain.contains(points)


def test_dgd_period():
    assert dgd_period(1.0) == 1
    assert dgd_period(0.5) == 2
    assert dgd_period(1 / 3) == 3
    assert dgd_period(2.0) == 1


def test_dgd_variants_coincide_at_unit_ratio(task, geometry, path3):
    schedule = make_schedule(1.0, 8, ExplicitBatch(b=1), path3.lambda2, 3)
    naive = run_baseline(Algorithm.DGD_NAIVE, task, geometry, path3, schedule, 0.2, eval_rounds="all")
    batched = run_baseline(Algorithm.DGD_MINIBATCH, task, geometry, path3, schedule, 0.2, eval_rounds="all")
    assert naive.rounds == list(range(1, 9))
    assert naive.metadata["period"] == 1
    assert naive.metadata["discarded"] == 0
    assert np.array_equal(naive.reported[-1], batched.reported[-1])


def test_minibatch_dgd_batches_between_communications(task, geometry, path3):
    schedule = make_schedule(0.5, 9, ExplicitBatch(b=2), path3.lambda2, 3)
    trace = run_baseline(Algorithm.DGD_MINIBATCH, task, geometry, path3, schedule, 0.2, eval_rounds="all")
    assert trace.metadata == {"period": 2, "discarded": 1}
    assert trace.rounds == [1, 2, 3, 4]
    assert trace.samples[-1] == 3 * 2 * 4


def test_naive_dgd_counts_every_dropped_sample(task, geometry, path3):
    schedule = make_schedule(0.5, 9, ExplicitBatch(b=2), path3.lambda2, 3)
    trace = run_baseline(Algorithm.DGD_NAIVE, task, geometry, path3, schedule, 0.2)
    # one sample used per period of 2 over 4 rounds, plus the odd tail sample
    assert trace.metadata == {"period": 2, "discarded": 5}


def test_naive_dgd_uses_last_sample_of_period(task, geometry, path3):
    schedule = make_schedule(0.5, 4, ExplicitBatch(b=2), path3.lambda2, 3)
    stream = OracleStream(task)
    engine = build_baseline(Algorithm.DGD_NAIVE, task, geometry, path3, schedule, 0.2, stream)
    x = np.zeros((3, task.n))
    features, labels = stream.window(range(3), 2, 1)
    assert np.array_equal(engine.gradients(1, x), batch_gradients(x, features, labels))


def test_central_batch_modes(task, geometry, complete4):
    schedule = make_schedule(0.5, 10, ExplicitBatch(b=2), complete4.lambda2, 4)
    per_sample = run_baseline(Algorithm.CENTRAL_MD, task, geometry, complete4, schedule, 0.2, eval_rounds="all")
    per_batch = run_baseline(Algorithm.CENTRAL_MD, task, geometry, complete4, schedule, 0.2, eval_rounds="all", central_batch="mb")
    assert per_sample.rounds[-1] == 10
    assert per_batch.rounds[-1] == 5
    assert per_sample.samples[-1] == per_batch.samples[-1] == 40
    assert per_sample.reported[-1].shape == (1, task.n)


def test_local_methods_run_without_mixing(task, geometry):
    schedule = make_schedule(0.5, 6, ExplicitBatch(b=2), 0.0, 5)
    trace = run_baseline(Algorithm.LOCAL_AMD, task, geometry, None, schedule, 0.2, m=5)
    assert trace.reported[-1].shape == (5, task.n)
    assert trace.rounds == [6]


def test_baseline_errors(task, geometry, complete4):
    schedule = make_schedule(0.5, 6, ExplicitBatch(b=2), 0.0, 4)
    with pytest.raises(ConfigError):
        run_baseline(Algorithm.DSAMD, task, geometry, complete4, schedule, 0.1)
    with pytest.raises(ConfigError):
        run_baseline(Algorithm.DGD_NAIVE, task, geometry, None, schedule, 0.1, m=4)
    with pytest.raises(ConfigError):
        run_baseline(Algorithm.LOCAL_MD, task, geometry, None, schedule, 0.1)


def test_centralized_beats_local_on_average():
    m, T = 8, 60
    W = build_mixing_matrix(generate_topology(GraphFamily(kind="complete"), m, 0), MixingRule.MEAN_FOR_COMPLETE)
    schedule = make_schedule(0.5, T, ExplicitBatch(b=2), W.lambda2, m)
    central, local = [], []
    for seed in range(20):
        task = LogisticTask.from_seed(seed, dimension=5)
        geometry = EuclideanGeometry(FeasibleSet.ball(np.zeros(task.n), 100.0))
        truth = build_ground_truth(task, 2_000, geometry.domain)
        central.append(run_baseline(Algorithm.CENTRAL_MD, task, geometry, W, schedule, 0.5, truth=truth).final_gap)
        local.append(run_baseline(Algorithm.LOCAL_MD, task, geometry, W, schedule, 0.5, truth=truth).final_gap)
    assert np.mean(central) < np.mean(local)


def test_engine_reuse_gives_identical_runs(task, geometry, path3):
    schedule = make_schedule(1.0, 6, ExplicitBatch(b=2), path3.lambda2, 3)
    engine = Adsamd(task, geometry, path3, schedule, 0.3)
    assert np.array_equal(engine.run().reported[-1], engine.run().reported[-1])
