"""Convergence-bound expressions for D-SAMD and AD-SAMD and the order-wise sizing conditions."""

import math
from typing import Literal

from loguru import logger

from .algorithms.schedule import corollary_batch_size
from .config import DEFAULT_C_MULT
from .errors import ParameterError, UnboundedDomainError
from .models import BoundInputs, BoundReport, CorollaryReport, ProblemConstants

NonsmoothTerm = Literal["squared", "verbatim"]

# exp() overflows past this exponent
_MAX_LOG = 709.0


def _power_term(a: float, s: int) -> float:
    """(1 + a)^s - 1 evaluated as expm1(s log1p(a))."""
    exponent = s * math.log1p(a)
    if exponent > _MAX_LOG:
        logger.warning(f"(1 + {a:.4g})^{s} overflows; bound is infinite")
        return math.inf
    return math.expm1(exponent)


def _residual(inputs: BoundInputs) -> float:
    """lambda2^r, with no consensus residual on a single node."""
    return 0.0 if inputs.m == 1 else inputs.lambda2**inputs.r


def _nonsmooth(c: ProblemConstants, form: NonsmoothTerm) -> float:
    return 4.0 * c.M**2 if form == "squared" else 4.0 * c.M


def _check_round(inputs: BoundInputs, s: int) -> None:
    if not 1 <= s <= inputs.S:
        raise ParameterError(f"round s={s} outside 1..{inputs.S}")


def xi_dsamd(c: ProblemConstants, inputs: BoundInputs, s: int) -> float:
    _check_round(inputs, s)
    lam_r = _residual(inputs)
    spread = c.alpha * inputs.m**2 * math.sqrt(c.c_star) * lam_r
    noise = c.M + math.sqrt(c.sigma2 / inputs.b)
    return noise * (1.0 + inputs.m**2 * math.sqrt(c.c_star) * lam_r) * _power_term(spread, s) + 2.0 * c.M


def delta2_dsamd(c: ProblemConstants, inputs: BoundInputs, s: int, nonsmooth: NonsmoothTerm = "squared") -> float:
    _check_round(inputs, s)
    m, b = inputs.m, inputs.b
    lam_r = _residual(inputs)
    spread = c.alpha * m**2 * math.sqrt(c.c_star) * lam_r
    noise = c.M + math.sqrt(c.sigma2 / b)
    return (
        2.0 * noise**2 * (1.0 + m**4 * c.c_star * lam_r**2) * _power_term(spread, s) ** 2
        + 4.0 * c.c_star * c.sigma2 / (m * b)
        + 4.0 * lam_r**2 * c.c_star * c.sigma2 * m**2 / b
        + _nonsmooth(c, nonsmooth)
    )


def _accelerated_spread(c: ProblemConstants, inputs: BoundInputs, s: int) -> float:
    gamma_s = inputs.gamma * (s + 1) / 2
    return 2.0 * gamma_s * inputs.m**2 * math.sqrt(c.c_star) * c.L * _residual(inputs)


def xi_adsamd(c: ProblemConstants, inputs: BoundInputs, s: int) -> float:
    _check_round(inputs, s)
    lam_r = _residual(inputs)
    noise = c.M + math.sqrt(c.sigma2 / inputs.b)
    return noise * (1.0 + math.sqrt(c.c_star) * inputs.m**2 * lam_r) * _power_term(_accelerated_spread(c, inputs, s), s) + 2.0 * c.M


def delta2_adsamd(c: ProblemConstants, inputs: BoundInputs, s: int, nonsmooth: NonsmoothTerm = "squared") -> float:
    _check_round(inputs, s)
    m, b = inputs.m, inputs.b
    lam_r = _residual(inputs)
    noise = c.M + math.sqrt(c.sigma2 / b)
    return (
        2.0 * noise**2 * _power_term(_accelerated_spread(c, inputs, s), s) ** 2
        + 4.0 * c.c_star * c.sigma2 / b * (lam_r**2 * m**2 + 1.0 / m)
        + _nonsmooth(c, nonsmooth)
    )


def _check_compact(c: ProblemConstants) -> None:
    if not math.isfinite(c.d_omega) or c.d_omega <= 0:
        raise UnboundedDomainError("bounds need a compact feasible set with a positive omega-radius")
    if c.L <= 0:
        raise ParameterError("bounds need a positive smoothness constant L")


def _safe_sqrt_ratio(numerator: float, denominator: float) -> float:
    return math.inf if denominator == 0 else math.sqrt(numerator / denominator)


def gap_bound_dsamd(c: ProblemConstants, inputs: BoundInputs, nonsmooth: NonsmoothTerm = "squared") -> BoundReport:
    """Three-term D-SAMD gap bound at S rounds, with the minimizing constant step size."""
    _check_compact(c)
    S = inputs.S
    xi = xi_dsamd(c, inputs, S)
    delta2 = delta2_dsamd(c, inputs, S, nonsmooth)
    noise_moment = 4.0 * c.M**2 + 2.0 * delta2
    terms = [
        2.0 * c.L * c.omega_radius**2 / (c.alpha * S),
        math.sqrt(2.0 * noise_moment / (c.alpha * S)),
        math.sqrt(c.alpha / 2.0) * xi * c.d_omega / c.L,
    ]
    gamma_star = min(c.alpha / (2.0 * c.L), _safe_sqrt_ratio(c.alpha * c.d_omega**2, 2.0 * S * noise_moment))
    return BoundReport(variant="dsamd", S=S, terms=terms, total=sum(terms), gamma_star=gamma_star, xi=xi, delta2=delta2)


def gap_bound_adsamd(c: ProblemConstants, inputs: BoundInputs, nonsmooth: NonsmoothTerm = "squared") -> BoundReport:
    """Three-term AD-SAMD gap bound at S rounds; Xi and Delta use the configured base step size."""
    _check_compact(c)
    S = inputs.S
    xi = xi_adsamd(c, inputs, S)
    delta2 = delta2_adsamd(c, inputs, S, nonsmooth)
    terms = [
        8.0 * c.L * c.d_omega**2 / (c.alpha * S**2),
        4.0 * c.d_omega * math.sqrt((_nonsmooth(c, nonsmooth) + delta2) / (c.alpha * S)),
        math.sqrt(32.0 / c.alpha) * c.d_omega * xi,
    ]
    gamma_star = min(
        c.alpha / (2.0 * c.L),
        _safe_sqrt_ratio(c.alpha * c.d_omega**2, S * (S**2 + 1) * (4.0 * c.M**2 + delta2)),
    )
    return BoundReport(variant="adsamd", S=S, terms=terms, total=sum(terms), gamma_star=gamma_star, xi=xi, delta2=delta2)


def corollary_conditions(
    c: ProblemConstants,
    m: int,
    T: int,
    rho: float,
    lambda2: float,
    variant: Literal["dsamd", "adsamd"],
    c_mult: float = DEFAULT_C_MULT,
    b: int | None = None,
) -> CorollaryReport:
    """Evaluate the order-wise sizing conditions with unit constants (c_mult for the lower batch bound).

    The report is diagnostic: it says which conditions hold for mini-batch size
    `b` (the smallest admissible one when omitted), it never rejects a run.
    """
    if not 0.0 <= lambda2 < 1.0:
        raise ParameterError(f"lambda2 must lie in [0, 1), got {lambda2}")
    sigma = math.sqrt(c.sigma2)
    single = m == 1

    b_min = 1 if single else corollary_batch_size(m, T, rho, lambda2, c_mult)
    log_ratio = math.log(1.0 / lambda2) if lambda2 > 0 else math.inf
    if variant == "dsamd":
        b_max = sigma * math.sqrt(T) / math.sqrt(m)
        rho_scale = math.sqrt(m) / (sigma * math.sqrt(T)) if sigma > 0 else math.inf
        T_min = m / c.sigma2 if c.sigma2 > 0 else math.inf
    else:
        b_max = math.sqrt(sigma) * T**0.75 / m**0.25
        rho_scale = m**0.25 / (sigma * T**0.75) if sigma > 0 else math.inf
        T_min = m ** (1.0 / 3.0) / c.sigma2 if c.sigma2 > 0 else math.inf
    if single or lambda2 == 0.0:
        rho_min = 0.0
    else:
        rho_min = rho_scale * math.log(m * T) / log_ratio
    M_max = min(1.0 / m, 1.0 / math.sqrt(m * c.sigma2 * T)) if c.sigma2 > 0 else 1.0 / m

    b = b_min if b is None else b
    satisfied = {
        "b_lower": single or b >= b_min,
        "b_upper": single or b <= b_max,
        "rho": single or rho >= rho_min,
        "T": single or T >= T_min,
        "M": c.M <= M_max,
    }
    return CorollaryReport(
        variant=variant,
        m=m,
        T=T,
        rho=rho,
        lambda2=lambda2,
        b=b,
        b_min=b_min,
        b_max=b_max,
        rho_min=rho_min,
        T_min=T_min,
        M_max=M_max,
        satisfied=satisfied,
    )
