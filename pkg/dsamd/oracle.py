"""Synthetic logistic-regression task, stochastic first-order oracle and holdout ground truth."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from scipy.optimize import minimize
from scipy.special import expit

from .config import HOLDOUT_GRAD_TOL, N_EVAL, STREAM_BLOCK_SIZE, TASK_DIMENSION, TASK_LABEL_PRIOR, TASK_SIGMA_R2
from .errors import NumericError, ParameterError, ShapeError, StateError
from .geometry import FeasibleSet
from .utils.file_manager import ArtifactManager

Vector = NDArray[np.float64]

# Leading words of the generator keys, so task means, node streams and the holdout never share a key
_TASK_KEY = 0
_STREAM_KEY = 1
_HOLDOUT_KEY = 2


@dataclass(frozen=True, eq=False)
class LogisticTask:
    """Two Gaussian classes N(mu_l, sigma_r2 I) with a Bernoulli(label_prior) label."""

    dimension: int
    mu0: Vector
    mu1: Vector
    sigma_r2: float
    label_prior: float
    rng_seed: int

    @classmethod
    def from_seed(
        cls,
        rng_seed: int,
        dimension: int = TASK_DIMENSION,
        sigma_r2: float = TASK_SIGMA_R2,
        label_prior: float = TASK_LABEL_PRIOR,
    ) -> "LogisticTask":
        if sigma_r2 < 0 or not 0 < label_prior < 1 or dimension < 1:
            raise ParameterError(f"invalid task parameters d={dimension}, sigma_r2={sigma_r2}, label_prior={label_prior}")
        rng = np.random.default_rng([rng_seed, _TASK_KEY])
        means = rng.standard_normal((2, dimension))
        return cls(dimension=dimension, mu0=means[0], mu1=means[1], sigma_r2=sigma_r2, label_prior=label_prior, rng_seed=rng_seed)

    @property
    def n(self) -> int:
        """Dimension of the augmented point (coefficients and intercept)."""
        return self.dimension + 1

    def draw(self, rng: np.random.Generator, count: int) -> tuple[Vector, NDArray[np.float64]]:
        labels = (rng.random(count) < self.label_prior).astype(float)
        noise = rng.standard_normal((count, self.dimension))
        means = np.where(labels[:, None] == 1.0, self.mu1, self.mu0)
        return means + np.sqrt(self.sigma_r2) * noise, labels


@dataclass(frozen=True, eq=False)
class OracleSample:
    features: Vector
    label: float


@dataclass(frozen=True, eq=False)
class SubgradientEstimate:
    vector: Vector
    eval_point: Vector
    batch_size: int

    def __post_init__(self):
        if self.batch_size < 1:
            raise ParameterError("batch size must be at least 1")
        if not np.all(np.isfinite(self.vector)):
            raise NumericError("subgradient estimate has non-finite entries")


class OracleStream:
    """Per-node sample streams addressed by (node, t), t starting at 1.

    Samples are drawn in blocks of `block_size` from a generator keyed on
    (task seed, node, block), so any window can be regenerated without storing
    the stream and every algorithm of an instance sees the same samples.
    """

    def __init__(self, task: LogisticTask, block_size: int = STREAM_BLOCK_SIZE, cached_blocks: int = 4096) -> None:
        self.task = task
        self.block_size = block_size
        self._block = lru_cache(maxsize=cached_blocks)(self._draw_block)

    def _draw_block(self, node: int, block: int) -> tuple[Vector, Vector]:
        rng = np.random.default_rng([self.task.rng_seed, _STREAM_KEY, node, block])
        return self.task.draw(rng, self.block_size)

    def samples(self, node: int, t_start: int, count: int) -> tuple[Vector, Vector]:
        """Features and labels for t in [t_start, t_start + count)."""
        if node < 0 or t_start < 1 or count < 1:
            raise ParameterError(f"invalid stream window node={node}, t_start={t_start}, count={count}")
        first = (t_start - 1) // self.block_size
        last = (t_start + count - 2) // self.block_size
        blocks = [self._block(node, block) for block in range(first, last + 1)]
        features = np.concatenate([f for f, _ in blocks])
        labels = np.concatenate([lab for _, lab in blocks])
        offset = (t_start - 1) - first * self.block_size
        return features[offset : offset + count], labels[offset : offset + count]

    def window(self, nodes: range | list[int], t_start: int, count: int) -> tuple[Vector, Vector]:
        """Node-stacked window: features (m, count, d) and labels (m, count)."""
        pairs = [self.samples(node, t_start, count) for node in nodes]
        return np.stack([f for f, _ in pairs]), np.stack([lab for _, lab in pairs])


def sample_stream(task: LogisticTask, node: int, t: int) -> OracleSample:
    features, labels = OracleStream(task).samples(node, t, 1)
    return OracleSample(features=features[0], label=float(labels[0]))


def batch_gradients(points: Vector, features: Vector, labels: Vector) -> Vector:
    """Mean logistic subgradient per node.

    Args:
        points: Node-stacked augmented points, shape (m, d + 1)
        features: Samples per node, shape (m, k, d)
        labels: Labels per node, shape (m, k)

    Returns:
        Array of shape (m, d + 1), row i averaging (sigmoid(y'x + x0) - l) (y, 1) over node i's k samples
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or features.ndim != 3 or features.shape[:2] != labels.shape:
        raise ShapeError(f"incompatible shapes {points.shape}, {features.shape}, {labels.shape}")
    if features.shape[0] != points.shape[0] or features.shape[2] + 1 != points.shape[1]:
        raise ShapeError(f"points {points.shape} do not match features {features.shape}")
    margins = np.einsum("mkd,md->mk", features, points[:, :-1]) + points[:, -1:]
    residual = expit(margins) - labels
    count = labels.shape[1]
    weights = np.einsum("mk,mkd->md", residual, features) / count
    return np.concatenate([weights, residual.sum(axis=1, keepdims=True) / count], axis=1)


def stochastic_subgradient(task: LogisticTask, x_aug: Vector, sample: OracleSample) -> Vector:
    """Gradient of the negative log-likelihood at x_aug for one sample."""
    x_aug = np.asarray(x_aug, dtype=float)
    if x_aug.shape != (task.n,):
        raise ShapeError(f"expected a point of length {task.n}, got {x_aug.shape}")
    features = np.asarray(sample.features, dtype=float)[None, None, :]
    return batch_gradients(x_aug[None, :], features, np.array([[sample.label]]))[0]


def negative_log_likelihood(x_aug: Vector, sample: OracleSample) -> float:
    z = float(np.dot(sample.features, x_aug[:-1]) + x_aug[-1])
    return float(np.logaddexp(0.0, z) - sample.label * z)


def mini_batch(task: LogisticTask, node: int, s: int, b: int, x_aug: Vector, stream: OracleStream | None = None) -> SubgradientEstimate:
    """Average of node `node`'s subgradients over t in ((s - 1) b, s b], all at x_aug."""
    if b < 1 or s < 1:
        raise ParameterError(f"mini-batch needs b >= 1 and s >= 1, got b={b}, s={s}")
    stream = stream or OracleStream(task)
    features, labels = stream.samples(node, (s - 1) * b + 1, b)
    x_aug = np.asarray(x_aug, dtype=float)
    vector = batch_gradients(x_aug[None, :], features[None], labels[None])[0]
    return SubgradientEstimate(vector=vector, eval_point=x_aug.copy(), batch_size=b)


@dataclass(eq=False)
class GroundTruth:
    """Holdout surrogate of psi and its minimizer."""

    task: LogisticTask
    features: Vector
    labels: Vector
    domain: FeasibleSet | None = None
    x_star: Vector | None = field(default=None)
    psi_star: float | None = field(default=None)

    @property
    def prepared(self) -> bool:
        return self.psi_star is not None

    def _augmented(self) -> Vector:
        return np.hstack([self.features, np.ones((self.features.shape[0], 1))])

    def objective(self, x: Vector) -> float | Vector:
        """Holdout-averaged negative log-likelihood of one point or of node-stacked rows."""
        x = np.asarray(x, dtype=float)
        rows = np.atleast_2d(x)
        margins = self.features @ rows[:, :-1].T + rows[:, -1]
        values = np.mean(np.logaddexp(0.0, margins) - self.labels[:, None] * margins, axis=0)
        return float(values[0]) if x.ndim == 1 else values

    def gradient(self, x: Vector) -> Vector:
        margins = self.features @ x[:-1] + x[-1]
        residual = expit(margins) - self.labels
        return np.append(self.features.T @ residual, residual.sum()) / self.labels.size

    def hessian(self, x: Vector) -> Vector:
        margins = self.features @ x[:-1] + x[-1]
        p = expit(margins)
        augmented = self._augmented()
        return (augmented * (p * (1 - p))[:, None]).T @ augmented / self.labels.size

    def per_sample_gradients(self, x: Vector) -> Vector:
        margins = self.features @ x[:-1] + x[-1]
        return (expit(margins) - self.labels)[:, None] * self._augmented()

    def prepare(self) -> "GroundTruth":
        """Minimize the holdout objective to gradient tolerance and record x_star and psi_star."""
        start = np.zeros(self.task.n)
        result = minimize(
            self.objective, start, jac=self.gradient, hess=self.hessian, method="trust-exact", options={"gtol": HOLDOUT_GRAD_TOL}
        )
        if not result.success:
            logger.warning(f"Holdout minimization stopped early: {result.message}")
        x_star = result.x
        if self.domain is not None and self.domain.is_compact and not self.domain.contains(x_star, tol=0.0):
            logger.debug("Unconstrained holdout minimizer lies outside X, solving the constrained problem")
            x_star = self._constrained_minimum(self.domain.project(x_star))
        self.x_star = x_star
        self.psi_star = float(self.objective(x_star))
        logger.debug(f"Holdout psi_star={self.psi_star:.10f}, |grad|={np.linalg.norm(self.gradient(x_star)):.2e}")
        return self

    def _constrained_minimum(self, start: Vector) -> Vector:
        if self.domain.kind == "box":
            bounds = list(zip(self.domain.lower, self.domain.upper, strict=True))
            result = minimize(self.objective, start, jac=self.gradient, method="L-BFGS-B", bounds=bounds, options={"gtol": HOLDOUT_GRAD_TOL})
        else:
            center, radius = self.domain.center, self.domain.radius
            constraint = {
                "type": "ineq",
                "fun": lambda z: radius**2 - np.sum((z - center) ** 2),
                "jac": lambda z: -2.0 * (z - center),
            }
            result = minimize(self.objective, start, jac=self.gradient, method="SLSQP", constraints=[constraint], options={"ftol": 1e-14})
        return self.domain.project(result.x)


def draw_holdout(task: LogisticTask, n_eval: int) -> tuple[Vector, Vector]:
    rng = np.random.default_rng([task.rng_seed, _HOLDOUT_KEY])
    return task.draw(rng, n_eval)


def build_ground_truth(
    task: LogisticTask,
    n_eval: int = N_EVAL,
    domain: FeasibleSet | None = None,
    cache: ArtifactManager | None = None,
    prepare: bool = True,
) -> GroundTruth:
    """Draw (or load) the fixed-seed holdout and optionally minimize over it."""
    key = f"holdout_{task.rng_seed}_{task.dimension}_{task.sigma_r2}_{task.label_prior}_{n_eval}"
    holdout = cache.load_holdout(key) if cache is not None else None
    if holdout is None:
        holdout = draw_holdout(task, n_eval)
        if cache is not None:
            cache.save_holdout(key, *holdout)
    truth = GroundTruth(task=task, features=holdout[0], labels=holdout[1], domain=domain)
    return truth.prepare() if prepare else truth


def evaluate_gap(truth: GroundTruth, x: Vector) -> float | Vector:
    """psi(x) - psi_star on the holdout, for one point or node-stacked rows.

    Not clamped: solver round-off can leave values slightly below zero.
    """
    if not truth.prepared:
        raise StateError("ground truth has not been prepared")
    return truth.objective(x) - truth.psi_star


def estimate_noise_variance(truth: GroundTruth, x: Vector | None = None) -> float:
    """Holdout estimate of E||G(x, xi) - grad psi(x)||^2, at the origin by default."""
    x = np.zeros(truth.task.n) if x is None else np.asarray(x, dtype=float)
    grads = truth.per_sample_gradients(x)
    return float(np.mean(np.sum((grads - grads.mean(axis=0)) ** 2, axis=1)))


def estimate_smoothness(truth: GroundTruth) -> float:
    """L_est = 0.25 E||(y, 1)||^2, a bound on the largest Hessian eigenvalue of psi."""
    return float(0.25 * np.mean(np.sum(truth.features**2, axis=1) + 1.0))
