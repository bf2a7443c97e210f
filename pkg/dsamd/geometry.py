"""Mirror-descent geometry: feasible sets, norm pairs, distance-generating functions and prox maps."""

import math
from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass
from typing import Literal

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from .config import DOMAIN_TOL, PROX_MAX_ITERS, PROX_MIN_STEP, PROX_STALL_RESIDUAL, PROX_STALL_TOL, PROX_TOL
from .errors import DomainViolationError, NumericError, ParameterError, ProxConvergenceError, UnboundedDomainError

Vector = NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    """Convex feasible set X.

    Balls and boxes are compact. The unbounded kind only exists so the logistic
    experiment can run on all of R^n; quantities that need compactness reject it.
    """

    kind: Literal["euclidean_ball", "box", "unbounded"]
    dimension: int
    center: Vector | None = None
    radius: float | None = None
    lower: Vector | None = None
    upper: Vector | None = None

    @classmethod
    def ball(cls, center: Vector, radius: float) -> "FeasibleSet":
        center = np.asarray(center, dtype=float)
        if radius <= 0:
            raise ParameterError(f"ball radius must be positive, got {radius}")
        return cls(kind="euclidean_ball", dimension=center.size, center=center, radius=float(radius))

    @classmethod
    def box(cls, lower: Vector, upper: Vector) -> "FeasibleSet":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if lower.shape != upper.shape or np.any(lower > upper):
            raise ParameterError("box bounds must have equal shapes and lower <= upper")
        return cls(kind="box", dimension=lower.size, lower=lower, upper=upper)

    @classmethod
    def unbounded(cls, dimension: int) -> "FeasibleSet":
        logger.warning(f"Unbounded feasible set of dimension {dimension}: convergence bounds are unavailable")
        return cls(kind="unbounded", dimension=dimension)

    @property
    def is_compact(self) -> bool:
        return self.kind != "unbounded"

    def contains(self, x: Vector, tol: float = DOMAIN_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            return False
        if self.kind == "euclidean_ball":
            return bool(np.all(np.linalg.norm(x - self.center, axis=-1) <= self.radius * (1 + tol) + tol))
        if self.kind == "box":
            return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))
        return bool(np.all(np.isfinite(x)))

    def project(self, x: Vector) -> Vector:
        """Euclidean projection; accepts a single point or node-stacked rows."""
        x = np.asarray(x, dtype=float)
        if self.kind == "euclidean_ball":
            offset = x - self.center
            norms = np.linalg.norm(offset, axis=-1, keepdims=True)
            outside = norms > self.radius
            scale = np.where(outside, self.radius / np.where(outside, norms, 1.0), 1.0)
            return self.center + offset * scale
        if self.kind == "box":
            return np.clip(x, self.lower, self.upper)
        return x.copy()

    def sample(self, rng: np.random.Generator, count: int) -> Vector:
        """Draw points uniformly from the set (standard normal when unbounded)."""
        if self.kind == "euclidean_ball":
            directions = rng.standard_normal((count, self.dimension))
            directions /= np.linalg.norm(directions, axis=1, keepdims=True)
            radii = self.radius * rng.random(count) ** (1.0 / self.dimension)
            return self.center + directions * radii[:, None]
        if self.kind == "box":
            return self.lower + (self.upper - self.lower) * rng.random((count, self.dimension))
        return rng.standard_normal((count, self.dimension))


@dataclass(frozen=True)
class NormPair:
    """A primal norm, its dual under `inner_product`, and the averaging constant C*."""

    primal_norm: Callable[[Vector], float]
    dual_norm: Callable[[Vector], float]
    inner_product: Callable[[Vector, Vector], float]
    c_star: float


def euclidean_norm_pair() -> NormPair:
    # averaging k i.i.d. vectors scales the squared l2 norm by exactly 1/k
    return NormPair(
        primal_norm=lambda v: float(np.linalg.norm(v)),
        dual_norm=lambda v: float(np.linalg.norm(v)),
        inner_product=lambda u, v: float(np.dot(u, v)),
        c_star=1.0,
    )


def lp_norm_pair(p: float, dimension: int) -> NormPair:
    """(l_p, l_q) pair with 1/p + 1/q = 1."""
    if p <= 1:
        raise ParameterError(f"p must exceed 1, got {p}")
    q = p / (p - 1)
    exponent = abs(1.0 - 2.0 / q)
    return NormPair(
        primal_norm=lambda v: float(np.linalg.norm(v, ord=p)),
        dual_norm=lambda v: float(np.linalg.norm(v, ord=q)),
        inner_product=lambda u, v: float(np.dot(u, v)),
        c_star=float(dimension**exponent),
    )


def l1_linf_norm_pair(dimension: int) -> NormPair:
    return NormPair(
        primal_norm=lambda v: float(np.linalg.norm(v, ord=1)),
        dual_norm=lambda v: float(np.linalg.norm(v, ord=np.inf)),
        inner_product=lambda u, v: float(np.dot(u, v)),
        c_star=float(dimension),
    )


class MirrorGeometry(ABC):
    """Distance-generating function on a feasible set together with its prox machinery."""

    name: str = "geometry"

    def __init__(self, domain: FeasibleSet, alpha: float, norms: NormPair) -> None:
        self.domain = domain
        self.alpha = alpha
        self.norms = norms

    @abstractmethod
    def omega(self, x: Vector) -> float: ...

    @abstractmethod
    def grad_omega(self, x: Vector) -> Vector: ...

    @abstractmethod
    def prox_map(self, x: Vector, y: Vector) -> Vector:
        """argmin over X of <y, z - x> + V(x, z)."""

    @abstractmethod
    def _omega_range(self) -> tuple[float, float]:
        """(min, max) of omega over a compact domain."""

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def d_omega(self) -> float:
        if not self.domain.is_compact:
            raise UnboundedDomainError("D_omega is undefined on an unbounded domain")
        low, high = self._omega_range()
        return math.sqrt(max(high - low, 0.0))

    @property
    def omega_radius(self) -> float:
        return math.sqrt(2.0 * self.d_omega**2 / self.alpha)

    @abstractmethod
    def minimizer(self) -> Vector:
        """argmin of omega over X, the common starting point of every engine."""

    def bregman(self, x: Vector, z: Vector) -> float:
        x = _finite(x)
        z = _finite(z)
        for point in (x, z):
            if not self.domain.contains(point):
                raise DomainViolationError(f"point {point} lies outside the {self.domain.kind} domain")
        value = self.omega(z) - self.omega(x) - self.norms.inner_product(self.grad_omega(x), z - x)
        return max(value, 0.0)

    def prox_rows(self, X: Vector, Y: Vector) -> Vector:
        """Row-wise prox map for node-stacked iterates."""
        return np.vstack([self.prox_map(x, y) for x, y in zip(X, Y, strict=True)])


class EuclideanGeometry(MirrorGeometry):
    """omega = 0.5 ||x||_2^2; the prox map is a projected subgradient step."""

    name = "euclidean"

    def __init__(self, domain: FeasibleSet) -> None:
        super().__init__(domain, alpha=1.0, norms=euclidean_norm_pair())

    def omega(self, x: Vector) -> float:
        return 0.5 * float(np.dot(x, x))

    def grad_omega(self, x: Vector) -> Vector:
        return np.asarray(x, dtype=float)

    def prox_map(self, x: Vector, y: Vector) -> Vector:
        return self.domain.project(_finite(x) - _finite(y))

    def prox_rows(self, X: Vector, Y: Vector) -> Vector:
        return self.domain.project(_finite(X) - _finite(Y))

    def minimizer(self) -> Vector:
        return self.domain.project(np.zeros(self.dimension))

    def _omega_range(self) -> tuple[float, float]:
        if self.domain.kind == "euclidean_ball":
            distance = float(np.linalg.norm(self.domain.center))
            return 0.5 * max(distance - self.domain.radius, 0.0) ** 2, 0.5 * (distance + self.domain.radius) ** 2
        lower, upper = self.domain.lower, self.domain.upper
        nearest = np.clip(0.0, lower, upper)
        farthest = np.maximum(lower**2, upper**2)
        return 0.5 * float(nearest @ nearest), 0.5 * float(farthest.sum())


class PNormGeometry(MirrorGeometry):
    """omega = 0.5 ||x||_p^2 for 1 < p <= 2, which is (p - 1)-strongly convex in ||.||_p.

    The unconstrained prox step has a closed form through the conjugate
    0.5 ||u||_q^2; when that point leaves X the step is finished by projected
    gradient with backtracking.
    """

    def __init__(self, p: float, domain: FeasibleSet) -> None:
        if not 1.0 < p <= 2.0:
            raise ParameterError(f"p-norm geometry needs 1 < p <= 2, got {p}")
        super().__init__(domain, alpha=p - 1.0, norms=lp_norm_pair(p, domain.dimension))
        self.p = p
        self.q = p / (p - 1.0)
        self.name = f"pnorm:{p:g}"

    def omega(self, x: Vector) -> float:
        return 0.5 * float(np.linalg.norm(x, ord=self.p)) ** 2

    def grad_omega(self, x: Vector) -> Vector:
        return _norm_power_gradient(np.asarray(x, dtype=float), self.p)

    def _conjugate_gradient(self, u: Vector) -> Vector:
        return _norm_power_gradient(u, self.q)

    def prox_map(self, x: Vector, y: Vector) -> Vector:
        u = self.grad_omega(_finite(x)) - _finite(y)
        z = self._conjugate_gradient(u)
        if self.domain.contains(z, tol=0.0):
            return z
        return self._constrained_argmin(u, self.domain.project(z))

    def minimizer(self) -> Vector:
        zero = np.zeros(self.dimension)
        if self.domain.contains(zero, tol=0.0):
            return zero
        return self._constrained_argmin(zero, self.domain.project(zero))

    def _constrained_argmin(self, u: Vector, start: Vector) -> Vector:
        """Minimize omega(z) - <u, z> over X by projected gradient."""

        def objective(z: Vector) -> float:
            return self.omega(z) - float(u @ z)

        z = start
        step = 1.0
        residual = math.inf
        for _ in range(PROX_MAX_ITERS):
            grad = self.grad_omega(z) - u
            value = objective(z)
            scale = max(1.0, float(np.linalg.norm(z)))
            while True:
                candidate = self.domain.project(z - step * grad)
                diff = candidate - z
                residual = float(np.linalg.norm(diff))
                if residual <= PROX_TOL * scale:
                    return candidate
                new_value = objective(candidate)
                if new_value <= value + float(grad @ diff) + residual**2 / (2.0 * step):
                    break
                step *= 0.5
                if step < PROX_MIN_STEP:
                    # no descent left at working precision
                    logger.debug(f"{self.name} prox backtracking collapsed at residual {residual:.3e}")
                    return z
            # stalled: the objective no longer moves and the step is at round-off size
            if value - new_value <= PROX_STALL_TOL * max(1.0, abs(value)) and residual <= PROX_STALL_RESIDUAL * scale:
                return candidate
            z = candidate
            step *= 2.0
        raise ProxConvergenceError(f"{self.name} prox did not converge in {PROX_MAX_ITERS} iterations", residual)

    def _omega_range(self) -> tuple[float, float]:
        if self.domain.kind == "euclidean_ball":
            if np.any(self.domain.center != 0.0):
                raise ParameterError("p-norm D_omega is only available for balls centred at the origin")
            scale = self.domain.dimension ** (1.0 / self.p - 0.5)
            return 0.0, 0.5 * (self.domain.radius * scale) ** 2
        lower, upper = self.domain.lower, self.domain.upper
        nearest = np.clip(0.0, lower, upper)
        farthest = np.maximum(np.abs(lower), np.abs(upper))
        return self.omega(nearest), self.omega(farthest)


def _norm_power_gradient(x: Vector, p: float) -> Vector:
    """Gradient of 0.5 ||x||_p^2."""
    norm = float(np.linalg.norm(x, ord=p))
    if norm == 0.0:
        return np.zeros_like(x)
    return norm ** (2.0 - p) * np.sign(x) * np.abs(x) ** (p - 1.0)


def _finite(x: Vector) -> Vector:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite input to geometry routine")
    return x


def make_geometry(name: str, domain: FeasibleSet) -> MirrorGeometry:
    """Build a geometry from its config name: "euclidean" or "pnorm:<p>"."""
    if name == "euclidean":
        return EuclideanGeometry(domain)
    if name.startswith("pnorm:"):
        try:
            p = float(name.split(":", 1)[1])
        except ValueError as e:
            raise ParameterError(f"cannot parse p from geometry name {name!r}") from e
        return PNormGeometry(p, domain)
    raise ParameterError(f"unknown geometry {name!r}")


def bregman(geometry: MirrorGeometry, x: Vector, z: Vector) -> float:
    return geometry.bregman(x, z)


def prox_map(geometry: MirrorGeometry, x: Vector, y: Vector) -> Vector:
    return geometry.prox_map(x, y)


@dataclass(frozen=True)
class LipschitzReport:
    max_ratio: float
    trials: int
    skipped: int


def prox_ratio(geometry: MirrorGeometry, x: Vector, x2: Vector, y: Vector, y2: Vector) -> float | None:
    """||P_x(y) - P_x2(y2)|| / (||x - x2|| + ||y - y2||_*); None for coincident pairs."""
    norms = geometry.norms
    denominator = norms.primal_norm(x - x2) + norms.dual_norm(y - y2)
    if denominator == 0.0:
        return None
    return norms.primal_norm(geometry.prox_map(x, y) - geometry.prox_map(x2, y2)) / denominator


def check_prox_lipschitz(geometry: MirrorGeometry, trials: int, rng_seed: int) -> LipschitzReport:
    """Sample quadruples and report the largest Lipschitz ratio of the prox map."""
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    rng = np.random.default_rng(rng_seed)
    points = geometry.domain.sample(rng, 2 * trials)
    scale = 0.5 * geometry.domain.radius if geometry.domain.kind == "euclidean_ball" else 1.0
    directions = scale * rng.standard_normal((2 * trials, geometry.dimension))
    max_ratio = 0.0
    skipped = 0
    for k in range(trials):
        ratio = prox_ratio(geometry, points[2 * k], points[2 * k + 1], directions[2 * k], directions[2 * k + 1])
        if ratio is None:
            skipped += 1
            continue
        max_ratio = max(max_ratio, ratio)
    logger.debug(f"{geometry.name} prox Lipschitz sweep: max ratio {max_ratio:.6f} over {trials} trials")
    return LipschitzReport(max_ratio=max_ratio, trials=trials, skipped=skipped)


def check_strong_convexity(geometry: MirrorGeometry, trials: int, rng_seed: int) -> float:
    """Minimum of <grad w(x) - grad w(y), x - y> - alpha ||x - y||^2 over sampled pairs."""
    rng = np.random.default_rng(rng_seed)
    points = geometry.domain.sample(rng, 2 * trials)
    slack = math.inf
    for x, y in zip(points[0::2], points[1::2], strict=True):
        gap = geometry.norms.inner_product(geometry.grad_omega(x) - geometry.grad_omega(y), x - y)
        slack = min(slack, gap - geometry.alpha * geometry.norms.primal_norm(x - y) ** 2)
    return slack
