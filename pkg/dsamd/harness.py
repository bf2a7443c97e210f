"""Monte Carlo sweeps over network size, aggregation and artifact emission."""

import json
import math
from collections import defaultdict
from functools import lru_cache, partial
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from .algorithms import make_schedule, run_adsamd, run_baseline, run_dsamd
from .bounds import corollary_conditions, gap_bound_adsamd, gap_bound_dsamd
from .config import CACHE_DIR, DEFAULT_JOBS, Algorithm
from .errors import DataError, DsamdError, ParameterError, UnboundedDomainError
from .geometry import FeasibleSet, MirrorGeometry, make_geometry
from .models import (
    Aggregate,
    AlgorithmSpec,
    BoundInputs,
    BoundOverlay,
    CorollaryBatch,
    CorollaryReport,
    DomainSpec,
    ExperimentConfig,
    InstanceRecord,
    ProblemConstants,
    RateSchedule,
    SweepPoint,
    SweepResult,
    TraceRecord,
)
from .network import MixingMatrix, Topology, build_mixing_matrix, generate_topology
from .oracle import GroundTruth, LogisticTask, build_ground_truth, estimate_noise_variance, estimate_smoothness
from .utils.file_manager import ArtifactManager
from .utils.instance_runner import InstanceRunner

TRACE_COLUMNS = ["algorithm", "m", "T", "instance", "instance_seed", "round", "samples_consumed", "node", "gap"]


def instance_seed(master_seed: int, m: int, instance: int) -> int:
    """Seed of one (m, instance) problem, hashed from the master seed."""
    return int(np.random.SeedSequence([master_seed, m, instance]).generate_state(1)[0])


@lru_cache(maxsize=32)
def _feasible_set(kind: str, n: int, radius: float, lower: float, upper: float) -> FeasibleSet:
    if kind == "ball":
        return FeasibleSet.ball(np.zeros(n), radius)
    if kind == "box":
        return FeasibleSet.box(np.full(n, lower), np.full(n, upper))
    return FeasibleSet.unbounded(n)


def build_geometry(spec: DomainSpec, n: int) -> MirrorGeometry:
    return make_geometry(spec.geometry, _feasible_set(spec.kind, n, spec.radius, spec.lower, spec.upper))


def build_network(config: ExperimentConfig, m: int, seed: int) -> tuple[Topology, MixingMatrix]:
    topology = Topology.single_node() if m == 1 else generate_topology(config.graph, m, seed)
    return topology, build_mixing_matrix(topology, config.mixing_rule())


def run_algorithm(
    config: ExperimentConfig,
    spec: AlgorithmSpec,
    task: LogisticTask,
    geometry: MirrorGeometry,
    W: MixingMatrix,
    schedule: RateSchedule,
    truth: GroundTruth,
    smoothness: float,
) -> TraceRecord:
    """Run one configured algorithm on the instance's shared streams and evaluate its gaps."""
    gamma = config.step_size(spec)
    if spec.clip_gamma:
        gamma = min(gamma, geometry.alpha / (2.0 * smoothness))
    eval_rounds = config.eval.trace_rounds
    if spec.name == Algorithm.DSAMD:
        trace = run_dsamd(task, geometry, W, schedule, gamma, truth=truth, eval_rounds=eval_rounds)
    elif spec.name == Algorithm.ADSAMD:
        trace = run_adsamd(task, geometry, W, schedule, gamma, truth=truth, eval_rounds=eval_rounds)
    else:
        trace = run_baseline(
            spec.name, task, geometry, W, schedule, gamma, truth=truth, eval_rounds=eval_rounds, m=W.m, central_batch=spec.central_batch
        )
    return trace.to_record(per_node=config.eval.per_node)


def run_instance(config: ExperimentConfig, m: int, instance: int) -> InstanceRecord:
    """Build one problem instance and run every configured algorithm on it."""
    seed = instance_seed(config.master_seed, m, instance)
    T = config.horizon(m)
    task = LogisticTask.from_seed(seed, config.task.dimension, config.task.sigma_r2, config.task.label_prior)
    geometry = build_geometry(config.domain, task.n)
    cache = ArtifactManager(Path(CACHE_DIR)) if CACHE_DIR and config.eval.cache_holdout else None
    truth = build_ground_truth(task, config.eval.n_eval, geometry.domain, cache)

    topology, W = build_network(config, m, seed)
    schedule = make_schedule(config.rho, T, config.b_rule, W.lambda2, m)
    smoothness = estimate_smoothness(truth)
    traces = [run_algorithm(config, spec, task, geometry, W, schedule, truth, smoothness) for spec in config.algorithms]

    return InstanceRecord(
        m=m,
        T=T,
        instance=instance,
        instance_seed=seed,
        lambda2=W.lambda2,
        graph_attempts=topology.attempts,
        schedule=schedule,
        sigma2_est=estimate_noise_variance(truth),
        L_est=smoothness,
        mu0=task.mu0.tolist(),
        mu1=task.mu1.tolist(),
        traces=traces,
    )


def aggregate(values: list[float]) -> Aggregate:
    """Mean and standard error (zero for a single value)."""
    data = np.asarray(values, dtype=float)
    stderr = float(data.std(ddof=1) / math.sqrt(data.size)) if data.size > 1 else 0.0
    return Aggregate(mean=float(data.mean()), stderr=stderr, count=int(data.size))


def fit_slope(points: list[tuple[float, float]]) -> float:
    """Least-squares slope of log(gap) against log(mT)."""
    if len(points) < 3:
        raise DataError(f"slope fit needs at least 3 points, got {len(points)}")
    x, y = np.asarray(points, dtype=float).T
    if np.any(x <= 0) or np.any(y <= 0):
        raise DataError("slope fit needs positive mT and gap values")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def ordering_violation_rate(lower: list[float], upper: list[float], resamples: int = 1000, seed: int = 0) -> float:
    """Fraction of paired bootstrap resamples in which mean(lower) > mean(upper)."""
    a = np.asarray(lower, dtype=float)
    b = np.asarray(upper, dtype=float)
    if a.shape != b.shape or a.size == 0:
        raise DataError("ordering check needs two nonempty samples of equal size")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, a.size, size=(resamples, a.size))
    return float(np.mean(a[idx].mean(axis=1) > b[idx].mean(axis=1)))


def problem_constants(config: ExperimentConfig, geometry: MirrorGeometry, record: InstanceRecord) -> ProblemConstants:
    return ProblemConstants(
        L=record.L_est,
        M=config.nonsmooth_lipschitz,
        sigma2=record.sigma2_est,
        alpha=geometry.alpha,
        c_star=geometry.norms.c_star,
        d_omega=geometry.d_omega,
        omega_radius=geometry.omega_radius,
    )


def bound_overlay(config: ExperimentConfig, geometry: MirrorGeometry, record: InstanceRecord) -> BoundOverlay:
    """Reference 1/sqrt(mT) slope plus both gap bounds when X is compact."""
    overlay = BoundOverlay(reference=1.0 / math.sqrt(record.m * record.T))
    schedule = record.schedule
    if not geometry.domain.is_compact or schedule.S < 1:
        return overlay
    try:
        constants = problem_constants(config, geometry, record)
        inputs = BoundInputs(
            m=record.m, lambda2=record.lambda2, r=schedule.r, b=schedule.b, S=schedule.S, gamma=geometry.alpha / (2.0 * record.L_est)
        )
        overlay.dsamd = gap_bound_dsamd(constants, inputs, config.nonsmooth_term)
        overlay.adsamd = gap_bound_adsamd(constants, inputs, config.nonsmooth_term)
    except (ParameterError, UnboundedDomainError) as e:
        logger.debug(f"No bound overlay at m={record.m}: {e}")
    return overlay


class SweepRunner:
    """Runs a full sweep: every m, every instance, every algorithm."""

    def __init__(self, config: ExperimentConfig, jobs: int = DEFAULT_JOBS) -> None:
        self.config = config
        self.runner = InstanceRunner(jobs)
        self.geometry = build_geometry(config.domain, config.task.dimension + 1)

    def run(self) -> SweepResult:
        config = self.config
        jobs = [(m, instance) for m in config.m_list for instance in range(config.instance_count)]
        logger.info(f"Sweep over m={config.m_list} with {config.instance_count} instance(s) each, {len(config.algorithms)} algorithm(s)")
        records = self.runner.run(partial(run_instance, config), jobs)

        by_m: dict[int, list[InstanceRecord]] = defaultdict(list)
        for record in records:
            by_m[record.m].append(record)
        points = [self._sweep_point(group) for group in by_m.values()]
        return SweepResult(config=config, points=points, records=records, slopes=self._slopes(points))

    def _sweep_point(self, records: list[InstanceRecord]) -> SweepPoint:
        first = records[0]
        self._check_step_sizes(first)
        clamped = sum(record.schedule.clamped for record in records)
        if clamped:
            logger.warning(f"m={first.m}: mini-batch size cut to T={first.T} in {clamped} of {len(records)} instance(s)")
        finals: dict[str, list[float]] = defaultdict(list)
        for record in records:
            for trace in record.traces:
                finals[trace.algorithm.value].append(trace.final_gap)
        point = SweepPoint(
            m=first.m,
            T=first.T,
            schedule=first.schedule,
            mean_lambda2=float(np.mean([record.lambda2 for record in records])),
            aggregates={name: aggregate(values) for name, values in finals.items()},
            overlay=bound_overlay(self.config, self.geometry, first),
        )
        summary = ", ".join(f"{name}={agg.mean:.3e}" for name, agg in point.aggregates.items())
        logger.info(f"m={point.m} T={point.T} b={first.schedule.b} r={first.schedule.r}: {summary}")
        return point

    def _check_step_sizes(self, record: InstanceRecord) -> None:
        limit = self.geometry.alpha / (2.0 * record.L_est)
        for trace in record.traces:
            if trace.algorithm in (Algorithm.DSAMD, Algorithm.ADSAMD) and trace.gamma > limit:
                logger.warning(f"m={record.m}: {trace.algorithm.value} gamma={trace.gamma} exceeds alpha/(2 L_est)={limit:.4g}")

    @staticmethod
    def _slopes(points: list[SweepPoint]) -> dict[str, float | None]:
        slopes: dict[str, float | None] = {}
        names = sorted({name for point in points for name in point.aggregates})
        for name in names:
            series = [(point.m * point.T, point.aggregates[name].mean) for point in points if name in point.aggregates]
            try:
                slopes[name] = fit_slope(series)
            except DataError as e:
                logger.debug(f"No slope for {name}: {e}")
                slopes[name] = None
        return slopes


def run_sweep(config: ExperimentConfig, jobs: int = DEFAULT_JOBS) -> SweepResult:
    return SweepRunner(config, jobs).run()


def trace_frame(records: list[InstanceRecord], algorithm: str) -> pd.DataFrame:
    """One row per recorded round: the node-mean gap, then one row per node when per-node gaps were kept."""
    rows = []
    for record in records:
        for trace in record.traces:
            if trace.algorithm.value != algorithm:
                continue
            for k, s in enumerate(trace.rounds):
                base = [algorithm, record.m, record.T, record.instance, record.instance_seed, s, trace.samples[k]]
                rows.append([*base, "mean", trace.mean_gaps[k]])
                if trace.node_gaps:
                    rows.extend([*base, str(node), gap] for node, gap in enumerate(trace.node_gaps[k]))
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def summary_payload(result: SweepResult) -> dict:
    return {
        "config": result.config.model_dump(mode="json"),
        "runs": len(result.records),
        "instances": [
            {
                "m": record.m,
                "T": record.T,
                "instance": record.instance,
                "instance_seed": record.instance_seed,
                "lambda2": record.lambda2,
                "graph_attempts": record.graph_attempts,
                "schedule": record.schedule.model_dump(mode="json"),
                "discarded": record.schedule.discarded,
                "sigma2_est": record.sigma2_est,
                "L_est": record.L_est,
                "mu0": record.mu0,
                "mu1": record.mu1,
                "trace_metadata": {trace.algorithm.value: trace.metadata for trace in record.traces},
            }
            for record in result.records
        ],
        "points": [point.model_dump(mode="json") for point in result.points],
        "slopes": result.slopes,
    }


def emit(result: SweepResult, out_dir: Path) -> list[Path]:
    """Write per-algorithm trace CSVs, summary.json and the gnuplot columns file and script."""
    manager = ArtifactManager(out_dir)
    written = []
    algorithms = [spec.name.value for spec in result.config.algorithms] if result.records else []
    for name in dict.fromkeys(algorithms):
        written.append(manager.write_csv(f"{name}.csv", trace_frame(result.records, name)))

    written.append(manager.write_text("summary.json", json.dumps(summary_payload(result), indent=2) + "\n"))

    if result.points:
        names = sorted({name for point in result.points for name in point.aggregates})
        rows = [
            {
                "mT": point.m * point.T,
                "m": point.m,
                "T": point.T,
                "gaps": [point.aggregates[name].mean if name in point.aggregates else math.nan for name in names],
                "stderrs": [point.aggregates[name].stderr if name in point.aggregates else math.nan for name in names],
                "reference": point.overlay.reference,
                "dsamd_bound": point.overlay.dsamd.total if point.overlay.dsamd else math.nan,
                "adsamd_bound": point.overlay.adsamd.total if point.overlay.adsamd else math.nan,
            }
            for point in result.points
        ]
        written.append(manager.render("columns.dat.jinja2", "loglog.dat", names=names, rows=rows, config=result.config))
        written.append(manager.render("loglog.gp.jinja2", "loglog.gp", names=names, data_file="loglog.dat", config=result.config))
    logger.info(f"Wrote {len(written)} file(s) to {out_dir}")
    return written


def corollary_reports(config: ExperimentConfig, n_eval: int = 10_000) -> list[CorollaryReport]:
    """Sizing-condition reports for every m of the config, on the first instance's problem."""
    c_mult = config.b_rule.c_mult if isinstance(config.b_rule, CorollaryBatch) else None
    geometry = build_geometry(config.domain, config.task.dimension + 1)
    reports = []
    for m in config.m_list:
        seed = instance_seed(config.master_seed, m, 0)
        T = config.horizon(m)
        task = LogisticTask.from_seed(seed, config.task.dimension, config.task.sigma_r2, config.task.label_prior)
        truth = build_ground_truth(task, min(n_eval, config.eval.n_eval), prepare=False)
        _, W = build_network(config, m, seed)
        try:
            d_omega = geometry.d_omega
        except DsamdError:
            d_omega = math.inf
        constants = ProblemConstants(
            L=estimate_smoothness(truth),
            M=config.nonsmooth_lipschitz,
            sigma2=estimate_noise_variance(truth),
            alpha=geometry.alpha,
            c_star=geometry.norms.c_star,
            d_omega=d_omega,
            omega_radius=math.sqrt(2.0 * d_omega**2 / geometry.alpha),
        )
        schedule = make_schedule(config.rho, T, config.b_rule, W.lambda2, m)
        for variant in ("dsamd", "adsamd"):
            extra = {"c_mult": c_mult} if c_mult is not None else {}
            reports.append(corollary_conditions(constants, m, T, config.rho, W.lambda2, variant, b=schedule.b, **extra))
    return reports
