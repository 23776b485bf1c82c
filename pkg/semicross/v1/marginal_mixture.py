"""Rao-Blackwellized marginal mixtures and the product importance density.

Each marginal is the average of the chain's full conditionals for one
coordinate: an n-component mixture of the jump law truncated above the
per-state thresholds c_k. Sorting the thresholds and keeping a running
log-sum-exp of the weights 1/F̄(c_k) makes a density evaluation one binary
search.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import logsumexp

from semicross.v1.distributions import DomainError
from semicross.v1.distributions import JumpLaw
from semicross.v1.rng import open_uniforms
from semicross.v1.zero_variance_mcmc import ChainSample
from semicross.v1.zero_variance_mcmc import ChainTarget
from semicross.v1.zero_variance_mcmc import RareEventModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MarginalMixture:
    law: JumpLaw
    thresholds: np.ndarray
    log_cum_weights: np.ndarray

    @property
    def n(self) -> int:
        return int(self.thresholds.size)


def build_marginal(law: JumpLaw, thresholds: ArrayLike) -> MarginalMixture:
    c = np.sort(np.asarray(thresholds, dtype=float).ravel())
    if c.size == 0:
        raise DomainError("a marginal mixture needs at least one threshold")
    log_weights = -np.asarray(law.log_tail(c), dtype=float)
    if not np.all(np.isfinite(log_weights)):
        raise DomainError("threshold outside the support of the jump law")
    return MarginalMixture(law=law, thresholds=c, log_cum_weights=np.logaddexp.accumulate(log_weights))


def mixture_log_density(mix: MarginalMixture, y: ArrayLike) -> np.ndarray | float:
    """log ĥ(y) = log f(y) + log Σ_{c_k < y} 1/F̄(c_k) - log n."""
    y = np.asarray(y, dtype=float)
    k = np.searchsorted(mix.thresholds, y, side="left") - 1
    covered = k >= 0
    log_cum = mix.log_cum_weights[np.where(covered, k, 0)]
    values = np.asarray(mix.law.log_density(y)) + log_cum - math.log(mix.n)
    values = np.where(covered, values, -np.inf)
    return float(values) if values.ndim == 0 else values


def naive_log_density(mix: MarginalMixture, y: ArrayLike) -> np.ndarray:
    """O(n) reference evaluation of the same mixture."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    log_weights = -np.asarray(mix.law.log_tail(mix.thresholds), dtype=float)
    active = y[:, None] > mix.thresholds[None, :]
    masked = np.where(active, log_weights[None, :], -np.inf)
    with np.errstate(divide="ignore"):
        log_sum = logsumexp(masked, axis=1)
    return np.asarray(mix.law.log_density(y)) + log_sum - math.log(mix.n)


def mixture_sample(mix: MarginalMixture, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray | float:
    """Composition: pick a component uniformly, then invert its truncated law."""
    components = rng.integers(mix.n, size=size)
    return mix.law.sample_truncated_above(mix.thresholds[components], open_uniforms(rng, size))


def exact_last_conditional(
    model: RareEventModel,
    prefix: np.ndarray,
    u: ArrayLike,
    *,
    residual: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw the last coordinate from π(y_d | y_1..y_{d-1}) and return its log density.

    ``prefix`` has shape (m, d-1). Under ``residual`` the law is cut at γ and
    the last coordinate must also dominate the prefix.
    """
    prefix = np.atleast_2d(np.asarray(prefix, dtype=float))
    law = model.law.truncated(model.gamma) if residual else model.law
    lower = model.gamma - prefix.sum(axis=1)
    if residual and prefix.shape[1]:
        lower = np.maximum(lower, prefix.max(axis=1))
    lower = np.maximum(lower, 0.0)
    last = np.asarray(law.sample_truncated_above(lower, u), dtype=float)
    log_dens = np.asarray(law.log_density(last)) - np.asarray(law.log_tail(lower))
    return last, log_dens


def _last_conditional_log_density(model: RareEventModel, y: np.ndarray, residual: bool) -> np.ndarray:
    prefix = y[:, :-1]
    law = model.law.truncated(model.gamma) if residual else model.law
    lower = model.gamma - prefix.sum(axis=1)
    if residual and prefix.shape[1]:
        lower = np.maximum(lower, prefix.max(axis=1))
    lower = np.maximum(lower, 0.0)
    values = np.asarray(law.log_density(y[:, -1])) - np.asarray(law.log_tail(lower))
    return np.where(y[:, -1] > lower, values, -np.inf)


@dataclass(frozen=True)
class ProductIsDensity:
    """ĝ(y) = Π_{i<d} ĥ_i(y_i) · π(y_d | y_1..y_{d-1})."""

    model: RareEventModel
    marginals: tuple[MarginalMixture, ...]
    residual: bool = False
    build_seconds: float = 0.0

    @property
    def d(self) -> int:
        return self.model.d

    def sample(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        points = np.empty((size, self.d))
        log_dens = np.zeros(size)
        for i, mix in enumerate(self.marginals):
            points[:, i] = mixture_sample(mix, rng, size)
            log_dens += mixture_log_density(mix, points[:, i])
        last, last_log = exact_last_conditional(
            self.model, points[:, :-1], open_uniforms(rng, size), residual=self.residual
        )
        points[:, -1] = last
        return points, log_dens + last_log

    def log_density(self, y: ArrayLike) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if y.shape[1] != self.d:
            raise DomainError(f"expected points of dimension {self.d}, got {y.shape[1]}")
        total = _last_conditional_log_density(self.model, y, self.residual)
        for i, mix in enumerate(self.marginals):
            total = total + mixture_log_density(mix, y[:, i])
        return total


def is_log_density(g: ProductIsDensity, y: ArrayLike) -> np.ndarray:
    return g.log_density(y)


def build_product_density(chain: ChainSample) -> ProductIsDensity:
    """Marginal mixtures for coordinates 1..d-1 plus the exact last conditional."""
    model = chain.model
    if model.is_compound:
        raise DomainError("compound chains use compound.build_compound_density")
    started = time.perf_counter()
    residual = chain.target is ChainTarget.RESIDUAL_MAX_LAST
    law = model.law.truncated(model.gamma) if residual else model.law
    marginals = tuple(build_marginal(law, chain.thresholds(i)) for i in range(model.d - 1))
    elapsed = time.perf_counter() - started
    logger.debug("Built %d marginal mixtures over %d states in %.3fs", len(marginals), chain.n, elapsed)
    return ProductIsDensity(
        model=model,
        marginals=marginals,
        residual=residual,
        build_seconds=chain.wall_seconds + elapsed,
    )


__all__ = [
    "MarginalMixture",
    "ProductIsDensity",
    "build_marginal",
    "build_product_density",
    "exact_last_conditional",
    "is_log_density",
    "mixture_log_density",
    "mixture_sample",
    "naive_log_density",
]
