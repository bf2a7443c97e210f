"""Links the communications ratio, mini-batch size, consensus rounds and horizon."""

import math

from loguru import logger

from ..errors import ScheduleError
from ..models import BatchRule, CorollaryBatch, ExplicitBatch, RateSchedule

# Absorbs round-off in products like b * rho and 1 / rho before flooring or ceiling
_ROUNDING_SLACK = 1e-9


def consensus_budget(b: int, rho: float) -> int:
    """Largest r allowed by r <= b * rho."""
    return math.floor(b * rho + _ROUNDING_SLACK)


def corollary_batch_size(m: int, T: int, rho: float, lambda2: float, c_mult: float) -> int:
    """b = max(1, ceil(c_mult log(mT) / (rho log(1/lambda2)))), or max(1, ceil(1/rho)) under exact averaging."""
    if lambda2 == 0.0:
        return max(1, math.ceil(1.0 / rho - _ROUNDING_SLACK))
    return max(1, math.ceil(c_mult * math.log(m * T) / (rho * math.log(1.0 / lambda2)) - _ROUNDING_SLACK))


def make_schedule(rho: float, T: int, b_rule: BatchRule, lambda2: float, m: int, r: int | None = None) -> RateSchedule:
    """Build the rate schedule for one run.

    Args:
        rho: Communication rounds per data-acquisition round
        T: Data-acquisition rounds per node
        b_rule: Explicit mini-batch size or the corollary sizing rule
        lambda2: Second-largest eigenvalue magnitude of the mixing matrix
        m: Node count
        r: Consensus rounds; defaults to the full budget floor(b * rho)

    Returns:
        RateSchedule with S = floor(T / b). A corollary size above T is cut to T and
        flagged as clamped; an explicit size above T is an error.
    """
    if rho <= 0:
        raise ScheduleError(f"rho must be positive, got {rho}")
    if T < 1:
        raise ScheduleError(f"T must be at least 1, got {T}")
    if not 0.0 <= lambda2 < 1.0:
        raise ScheduleError(f"lambda2 must lie in [0, 1), got {lambda2}")

    clamped = False
    if isinstance(b_rule, ExplicitBatch):
        b = b_rule.b
    elif isinstance(b_rule, CorollaryBatch):
        b = corollary_batch_size(m, T, rho, lambda2, b_rule.c_mult)
        if b > T:
            logger.debug(f"Corollary batch size {b} exceeds the horizon T={T} at lambda2={lambda2:.4f}; using b=T")
            b, clamped = T, True
    else:
        raise ScheduleError(f"unknown batch rule {b_rule!r}")

    if b > T:
        raise ScheduleError(f"mini-batch size {b} exceeds the horizon T={T}")
    budget = consensus_budget(b, rho)
    if r is None:
        r = budget
    elif not 0 <= r <= budget:
        raise ScheduleError(f"r={r} consensus rounds do not fit in b*rho={b * rho}")

    schedule = RateSchedule(rho=rho, T=T, b=b, r=r, S=T // b, clamped=clamped)
    if schedule.discarded:
        logger.debug(f"Schedule b={b} leaves {schedule.discarded} sample(s) per node unused out of T={T}")
    if r == 0 and m > 1:
        logger.warning(f"No consensus round fits in a mini-batch of {b} at rho={rho}")
    return schedule
