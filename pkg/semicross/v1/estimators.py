"""Rare-event estimators for P(X_1 + ... + X_d > γ) and their reports."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict
from dataclasses import dataclass
from enum import Enum
from typing import Any
from typing import Optional

import numpy as np

from semicross.v1.distributions import DomainError
from semicross.v1.distributions import LawFamily
from semicross.v1.marginal_mixture import ProductIsDensity
from semicross.v1.marginal_mixture import build_product_density
from semicross.v1.rng import BlockMoments
from semicross.v1.rng import open_uniforms
from semicross.v1.rng import replicate
from semicross.v1.zero_variance_mcmc import ChainSample
from semicross.v1.zero_variance_mcmc import ChainTarget
from semicross.v1.zero_variance_mcmc import RareEventModel
from semicross.v1.zero_variance_mcmc import run_chain

logger = logging.getLogger(__name__)


class Method(str, Enum):
    CRUDE = "crude"
    AK = "ak"
    PARAMETRIC_CE = "ce"
    SEMIPARAMETRIC = "semiparametric"
    DOMINANT_TERM = "dominant"
    COMPOUND = "compound"
    COMPOUND_AK = "compound_ak"
    COMPOUND_CRUDE = "compound_crude"


FIXED_SUM_METHODS = (Method.CRUDE, Method.AK, Method.PARAMETRIC_CE, Method.SEMIPARAMETRIC, Method.DOMINANT_TERM)
COMPOUND_METHODS = (Method.COMPOUND, Method.COMPOUND_AK, Method.COMPOUND_CRUDE)


@dataclass
class EstimateReport:
    method: str
    estimate: float
    std_error: float
    rel_error: float
    m: int
    wall_seconds: float
    seed: int
    n: int = 0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class ComparisonReport:
    baseline: EstimateReport
    candidate: EstimateReport
    ratio: float
    rtvp: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "baseline": self.baseline.to_dict(),
            "candidate": self.candidate.to_dict(),
            "ratio": self.ratio,
            "rtvp": self.rtvp,
        }


def _relative(std_error: float, estimate: float) -> float:
    if estimate > 0.0:
        return std_error / estimate
    return 0.0 if std_error == 0.0 else math.inf


def make_report(
    method: Method | str,
    estimate: float,
    std_error: float,
    m: int,
    wall_seconds: float,
    seed: int,
    n: int = 0,
) -> EstimateReport:
    return EstimateReport(
        method=Method(method).value,
        estimate=float(estimate),
        std_error=float(std_error),
        rel_error=_relative(float(std_error), float(estimate)),
        m=int(m),
        wall_seconds=float(wall_seconds),
        seed=int(seed),
        n=int(n),
    )


def _moments_report(
    method: Method, moments: BlockMoments, offset: float, started: float, seed: int, n: int = 0, extra: float = 0.0
) -> EstimateReport:
    estimate = offset + moments.mean
    return make_report(
        method,
        estimate,
        moments.std_error,
        moments.count,
        time.perf_counter() - started + extra,
        seed,
        n,
    )


def compare(baseline: EstimateReport, candidate: EstimateReport) -> ComparisonReport:
    """Ratio = baseline rel. error / candidate rel. error; RTVP = Ratio² · τ_base / τ_cand."""
    if candidate.rel_error > 0.0:
        ratio = baseline.rel_error / candidate.rel_error
    else:
        ratio = math.inf if baseline.rel_error > 0.0 else 1.0
    if candidate.wall_seconds > 0.0:
        rtvp = ratio**2 * baseline.wall_seconds / candidate.wall_seconds
    else:
        rtvp = math.inf
    return ComparisonReport(baseline=baseline, candidate=candidate, ratio=ratio, rtvp=rtvp)


def _require_fixed_sum(model: RareEventModel) -> None:
    if model.is_compound:
        raise DomainError("this estimator targets fixed-length sums")


def crude_mc(model: RareEventModel, m: int, seed: int, workers: int = 1) -> EstimateReport:
    """Indicator average with the binomial standard error."""
    _require_fixed_sum(model)
    started = time.perf_counter()
    law, d, gamma = model.law, model.d, model.gamma

    def _block(rng: np.random.Generator, size: int) -> np.ndarray:
        return (law.sample(rng, (size, d)).sum(axis=1) > gamma).astype(float)

    moments = replicate(_block, m, seed, "crude", workers)
    p = moments.mean
    std_error = math.sqrt(max(p * (1.0 - p), 0.0) / m)
    return make_report(Method.CRUDE, p, std_error, m, time.perf_counter() - started, seed)


def ak_estimate(model: RareEventModel, m: int, seed: int, workers: int = 1) -> EstimateReport:
    """Conditional estimator d·F̄(max(γ - S_{d-1}, M_{d-1}))."""
    _require_fixed_sum(model)
    started = time.perf_counter()
    law, d, gamma = model.law, model.d, model.gamma
    if d == 1:
        return make_report(Method.AK, float(law.tail(gamma)), 0.0, m, time.perf_counter() - started, seed)

    def _block(rng: np.random.Generator, size: int) -> np.ndarray:
        x = law.sample(rng, (size, d - 1))
        cut = np.maximum(gamma - x.sum(axis=1), x.max(axis=1))
        return d * np.asarray(law.tail(cut))

    moments = replicate(_block, m, seed, "ak", workers)
    return _moments_report(Method.AK, moments, 0.0, started, seed)


def _is_exponential(model: RareEventModel) -> bool:
    return model.law.family is LawFamily.WEIBULL and model.law.alpha == 1.0


def parametric_ce_estimate(
    model: RareEventModel,
    chain: ChainSample,
    m: int,
    seed: int,
    workers: int = 1,
) -> EstimateReport:
    """Exponential tilting with means fitted to the chain (unit-rate exponential jumps only)."""
    _require_fixed_sum(model)
    if not _is_exponential(model):
        raise DomainError("parametric CE is implemented for exponential jumps (Weibull alpha=1)")
    started = time.perf_counter()
    d, gamma = model.d, model.gamma
    if model.event_is_certain:
        tilt = np.ones(d)
    else:
        tilt = np.asarray(chain.coordinate_means()[:d], dtype=float)
    log_tilt = np.log(tilt)
    logger.debug("CE tilt means: %s", np.array2string(tilt, precision=4))

    def _block(rng: np.random.Generator, size: int) -> np.ndarray:
        y = -tilt * np.log1p(-open_uniforms(rng, (size, d)))
        log_lr = np.sum(log_tilt + y / tilt - y, axis=1)
        return np.where(y.sum(axis=1) > gamma, np.exp(log_lr), 0.0)

    moments = replicate(_block, m, seed, "ce", workers)
    return _moments_report(Method.PARAMETRIC_CE, moments, 0.0, started, seed, chain.n, chain.wall_seconds)


def semiparam_is_estimate(
    model: RareEventModel,
    g: ProductIsDensity,
    m: int,
    seed: int,
    workers: int = 1,
) -> EstimateReport:
    """Importance sampling with the product of marginal mixtures.

    ``wall_seconds`` includes the chain and mixture build recorded in ``g``.
    """
    _require_fixed_sum(model)
    if g.residual:
        raise DomainError("residual densities belong to dominant_term_estimate")
    started = time.perf_counter()
    law, gamma = model.law, model.gamma
    n = g.marginals[0].n if g.marginals else 0
    if model.d == 1:
        return make_report(Method.SEMIPARAMETRIC, float(law.tail(gamma)), 0.0, m, g.build_seconds, seed, n)

    def _block(rng: np.random.Generator, size: int) -> np.ndarray:
        y, log_g = g.sample(rng, size)
        log_f = np.asarray(law.log_density(y)).sum(axis=1)
        return np.where(y.sum(axis=1) > gamma, np.exp(log_f - log_g), 0.0)

    moments = replicate(_block, m, seed, "semiparametric", workers)
    return _moments_report(Method.SEMIPARAMETRIC, moments, 0.0, started, seed, n, g.build_seconds)


def semiparametric_pipeline(
    model: RareEventModel,
    n: int,
    m: int,
    seed: int,
    burn_in: Optional[int] = None,
    workers: int = 1,
) -> EstimateReport:
    _require_fixed_sum(model)
    if model.d == 1:
        return make_report(Method.SEMIPARAMETRIC, float(model.law.tail(model.gamma)), 0.0, m, 0.0, seed, n)
    chain = run_chain(model, n, burn_in=burn_in, seed=seed)
    report = semiparam_is_estimate(model, build_product_density(chain), m, seed, workers)
    report.n = n
    return report


def dominant_term(model: RareEventModel) -> float:
    """1 - F(γ)^d, evaluated without cancellation."""
    tail = float(model.law.tail(model.gamma))
    return float(-np.expm1(model.d * np.log1p(-tail)))


def dominant_term_estimate(
    model: RareEventModel,
    n: int,
    m: int,
    seed: int,
    burn_in: Optional[int] = None,
    workers: int = 1,
) -> EstimateReport:
    """ℓ = 1 - F(γ)^d + P(S > γ, M_d < γ), the residual estimated by semiparametric IS.

    The residual chain targets {S > γ, M_d < γ, X_d = M_d}; by exchangeability
    the residual probability is d times the mass of that set. The standard
    error comes from the residual alone.
    """
    _require_fixed_sum(model)
    started = time.perf_counter()
    law, d, gamma = model.law, model.d, model.gamma
    head = dominant_term(model)
    if d == 1 or float(law.cdf(gamma)) == 0.0:
        return make_report(Method.DOMINANT_TERM, head, 0.0, m, time.perf_counter() - started, seed)

    chain = run_chain(model, n, burn_in=burn_in, seed=seed, target=ChainTarget.RESIDUAL_MAX_LAST)
    g = build_product_density(chain)

    def _block(rng: np.random.Generator, size: int) -> np.ndarray:
        y, log_g = g.sample(rng, size)
        log_f = np.asarray(law.log_density(y)).sum(axis=1)
        top = y.max(axis=1)
        inside = (y.sum(axis=1) > gamma) & (top < gamma) & (y[:, -1] >= top)
        return np.where(inside, d * np.exp(log_f - log_g), 0.0)

    moments = replicate(_block, m, seed, "dominant", workers)
    report = _moments_report(Method.DOMINANT_TERM, moments, head, started, seed, n)
    logger.debug("Dominant term %.6e, residual %.6e", head, moments.mean)
    return report


def method_problems(model: RareEventModel, method: Method | str) -> list[str]:
    """Reasons ``method`` cannot run on ``model`` (empty when it can)."""
    try:
        method = Method(method)
    except ValueError:
        return [f"unknown method {method!r}"]
    problems: list[str] = []
    if model.is_compound and method not in COMPOUND_METHODS:
        problems.append(f"method {method.value} does not apply to compound sums")
    if not model.is_compound and method in COMPOUND_METHODS:
        problems.append(f"method {method.value} needs the compound model")
    if method is Method.PARAMETRIC_CE and not _is_exponential(model):
        problems.append("method ce needs family=weibull with alpha=1")
    if method is Method.DOMINANT_TERM and model.law.family is LawFamily.TRUNCATED_WEIBULL:
        problems.append("method dominant needs an untruncated jump law")
    return problems


def estimate_method(
    model: RareEventModel,
    method: Method | str,
    *,
    n: int,
    m: int,
    seed: int,
    burn_in: Optional[int] = None,
    workers: int = 1,
) -> EstimateReport:
    """Run one method end to end, chain construction included."""
    problems = method_problems(model, method)
    if problems:
        raise DomainError("; ".join(problems))
    method = Method(method)
    if method is Method.CRUDE:
        return crude_mc(model, m, seed, workers)
    if method is Method.AK:
        return ak_estimate(model, m, seed, workers)
    if method is Method.PARAMETRIC_CE:
        chain = run_chain(model, n, burn_in=burn_in, seed=seed)
        return parametric_ce_estimate(model, chain, m, seed, workers)
    if method is Method.SEMIPARAMETRIC:
        return semiparametric_pipeline(model, n, m, seed, burn_in, workers)
    if method is Method.DOMINANT_TERM:
        return dominant_term_estimate(model, n, m, seed, burn_in, workers)

    from semicross.v1 import compound

    if method is Method.COMPOUND:
        return compound.compound_estimate(model, n, m, seed, burn_in=burn_in, workers=workers)
    if method is Method.COMPOUND_AK:
        return compound.compound_ak_estimate(model, m, seed, workers)
    return compound.compound_crude_mc(model, m, seed, workers)


__all__ = [
    "COMPOUND_METHODS",
    "ComparisonReport",
    "EstimateReport",
    "FIXED_SUM_METHODS",
    "Method",
    "ak_estimate",
    "compare",
    "crude_mc",
    "dominant_term",
    "dominant_term_estimate",
    "estimate_method",
    "make_report",
    "method_problems",
    "parametric_ce_estimate",
    "semiparam_is_estimate",
    "semiparametric_pipeline",
]
