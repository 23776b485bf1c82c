"""Gibbs samplers for the zero-variance density π ∝ f·1{S > γ}."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional

import numpy as np

from semicross.v1.config import DEFAULT_INIT_ATTEMPTS
from semicross.v1.config import LENGTH_TAIL_CUTOFF
from semicross.v1.config import default_burn_in
from semicross.v1.distributions import DomainError
from semicross.v1.distributions import JumpLaw
from semicross.v1.distributions import LawFamily
from semicross.v1.rng import open_uniforms
from semicross.v1.rng import replication_stream

logger = logging.getLogger(__name__)


class ChainVariant(str, Enum):
    FIXED_SUM = "fixed_sum"
    COMPOUND_GEOMETRIC = "compound_geometric"


class ChainTarget(str, Enum):
    """Which conditional density the chain samples.

    ``ZERO_VARIANCE`` is f·1{S>γ}. ``RESIDUAL_MAX_LAST`` restricts further to
    {max < γ, last coordinate is the max}, the residual part of the
    dominant-term decomposition.
    """

    ZERO_VARIANCE = "zero_variance"
    RESIDUAL_MAX_LAST = "residual_max_last"


@dataclass(frozen=True)
class RareEventModel:
    law: JumpLaw
    gamma: float
    variant: ChainVariant = ChainVariant.FIXED_SUM
    d: int = 1
    rho: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", ChainVariant(self.variant))
        if not math.isfinite(self.gamma):
            raise DomainError(f"gamma must be finite, got {self.gamma}")
        if self.law.is_discrete:
            raise DomainError("jump laws must be continuous")
        if self.variant is ChainVariant.FIXED_SUM:
            if int(self.d) != self.d or self.d < 1:
                raise DomainError(f"d must be a positive integer, got {self.d}")
            object.__setattr__(self, "d", int(self.d))
            return
        if self.rho is None or not 0.0 < self.rho <= 1.0:
            raise DomainError(f"compound models need rho in (0, 1], got {self.rho}")
        if self.law.family is not LawFamily.WEIBULL:
            raise DomainError("compound models use an untruncated Weibull jump law")

    @classmethod
    def fixed_sum(cls, law: JumpLaw, d: int, gamma: float) -> RareEventModel:
        return cls(law=law, gamma=float(gamma), variant=ChainVariant.FIXED_SUM, d=d)

    @classmethod
    def compound(cls, law: JumpLaw, rho: float, gamma: float) -> RareEventModel:
        return cls(law=law, gamma=float(gamma), variant=ChainVariant.COMPOUND_GEOMETRIC, rho=float(rho))

    @property
    def is_compound(self) -> bool:
        return self.variant is ChainVariant.COMPOUND_GEOMETRIC

    @property
    def event_is_certain(self) -> bool:
        """S > γ almost surely (every jump is at least the support minimum)."""
        if self.is_compound:
            return self.gamma <= 0.0
        return self.gamma <= self.d * self.law.support_min

    # Compound quantities under the tilted measure {every jump < γ}.

    @cached_property
    def jump_law(self) -> JumpLaw:
        if self.gamma <= 0.0:
            raise DomainError("the truncated jump law needs gamma > 0")
        return self.law.truncated(self.gamma)

    @cached_property
    def tilted_success(self) -> float:
        cdf = float(self.law.cdf(self.gamma))
        return float(self.law.tail(self.gamma)) + self.rho * cdf

    @cached_property
    def length_law(self) -> JumpLaw:
        """Law of R - 1 under the tilted measure, R >= 2."""
        return JumpLaw.geometric(min(1.0, self.tilted_success))

    @cached_property
    def max_length(self) -> int:
        return 1 + int(self.length_law.quantile(1.0 - LENGTH_TAIL_CUTOFF))


@dataclass(frozen=True)
class ChainSample:
    """Post-burn-in chain states.

    Fixed-sum chains store an (n, d) matrix. Compound chains store jump
    vectors left-aligned and NaN-padded, with their lengths alongside.
    """

    model: RareEventModel
    states: np.ndarray
    burn_in: int
    seed: int
    target: ChainTarget = ChainTarget.ZERO_VARIANCE
    lengths: Optional[np.ndarray] = None
    wall_seconds: float = 0.0

    @property
    def n(self) -> int:
        return int(self.states.shape[0])

    def state(self, k: int) -> np.ndarray:
        row = self.states[k]
        if self.lengths is None:
            return row.copy()
        return row[: int(self.lengths[k])].copy()

    def sums(self) -> np.ndarray:
        return np.nansum(self.states, axis=1)

    def thresholds(self, i: int) -> np.ndarray:
        """Per-state truncation points (γ - Σ_{j≠i} x_j)⁺ for coordinate ``i``."""
        rest = self.sums() - self.states[:, i]
        return np.maximum(self.model.gamma - rest, 0.0)

    def coordinate_means(self) -> np.ndarray:
        return np.nanmean(self.states, axis=0)


def _clear_boundary(rest: float, value: float, gamma: float) -> float:
    """Nudge ``value`` so that rest + value > gamma survives rounding."""
    if rest + value > gamma:
        return value
    value = max(value, gamma - rest)
    step = np.spacing(max(abs(gamma), 1.0))
    while rest + value <= gamma:
        value += step
        step *= 2.0
    return value


def _draw_interval(law: JumpLaw, lo: float, hi: float, u: float, current: float) -> float:
    if not lo < hi:
        return current
    try:
        return float(law.sample_truncated_interval(lo, hi, u))
    except DomainError:
        # the interval collapsed under rounding
        return current


def initial_state(
    model: RareEventModel,
    rng: np.random.Generator,
    max_attempts: int = DEFAULT_INIT_ATTEMPTS,
    target: ChainTarget = ChainTarget.ZERO_VARIANCE,
) -> np.ndarray:
    """A starting point inside the event, by rejection then a deterministic fallback."""
    target = ChainTarget(target)
    if model.is_compound:
        return _compound_initial(model, rng, max_attempts)
    if target is ChainTarget.RESIDUAL_MAX_LAST:
        return _residual_initial(model, rng, max_attempts)

    law, gamma, d = model.law, model.gamma, model.d
    draws = law.sample(rng, (max_attempts, d))
    hits = np.flatnonzero(draws.sum(axis=1) > gamma)
    if hits.size:
        state = draws[hits[0]].copy()
    else:
        logger.debug("Rejection start failed after %d attempts; inflating last coordinate", max_attempts)
        state = draws[0].copy()
        rest = math.fsum(state[:-1])
        value = float(law.sample_truncated_above(gamma - rest, open_uniforms(rng)))
        state[-1] = _clear_boundary(rest, value, gamma)
    # jumps are exchangeable; the largest one is parked in the last slot
    top = int(np.argmax(state))
    state[top], state[-1] = state[-1], state[top]
    return state


def _residual_initial(model: RareEventModel, rng: np.random.Generator, max_attempts: int) -> np.ndarray:
    law, gamma, d = model.law, model.gamma, model.d
    if d < 2 or gamma <= law.support_min:
        raise DomainError("the residual event is empty for this model")
    truncated = law.truncated(gamma)
    draws = truncated.sample(rng, (max_attempts, d))
    hits = np.flatnonzero(draws.sum(axis=1) > gamma)
    if hits.size:
        state = draws[hits[0]].copy()
        top = int(np.argmax(state))
        state[top], state[-1] = state[-1], state[top]
        return state
    logger.debug("Residual rejection start failed after %d attempts; using the flat start", max_attempts)
    level = max(gamma * (d + 1) / d**2, law.support_min)
    state = np.full(d, level)
    if not (math.fsum(state) > gamma and level < gamma):
        raise DomainError("the residual event is empty for this model")
    return state


def _compound_initial(model: RareEventModel, rng: np.random.Generator, max_attempts: int) -> np.ndarray:
    gamma, jump_law = model.gamma, model.jump_law
    for _ in range(max_attempts):
        r = min(1 + int(model.length_law.sample(rng, 1)[0]), model.max_length)
        jumps = jump_law.sample(rng, r)
        if math.fsum(jumps) > gamma:
            return jumps
    logger.debug("Compound rejection start failed after %d attempts; filling the last jump", max_attempts)
    jumps = jump_law.sample(rng, 2)
    rest = float(jumps[0])
    value = float(jump_law.sample_truncated_above(gamma - rest, open_uniforms(rng)))
    jumps[1] = _clear_boundary(rest, value, gamma)
    return jumps


def gibbs_sweep(
    model: RareEventModel,
    x: np.ndarray,
    rng: np.random.Generator,
    target: ChainTarget = ChainTarget.ZERO_VARIANCE,
) -> np.ndarray:
    """One systematic scan. Returns the new state (compound states may change length)."""
    if model.is_compound:
        return _compound_sweep(model, x, rng)
    if ChainTarget(target) is ChainTarget.RESIDUAL_MAX_LAST:
        return _residual_sweep(model, x, rng)

    law, gamma = model.law, model.gamma
    u = open_uniforms(rng, x.size)
    total = math.fsum(x)
    for i in range(x.size):
        rest = total - x[i]
        value = float(law.sample_truncated_above(gamma - rest, u[i]))
        x[i] = _clear_boundary(rest, value, gamma)
        total = rest + x[i]
    _settle(x, gamma)
    return x


def _residual_sweep(model: RareEventModel, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    law, gamma = model.law, model.gamma
    last = x.size - 1
    u = open_uniforms(rng, x.size)
    total = math.fsum(x)
    for i in range(last):
        rest = total - x[i]
        value = _draw_interval(law, gamma - rest, min(gamma, x[last]), u[i], x[i])
        x[i] = _clear_boundary(rest, value, gamma)
        total = rest + x[i]
    rest = total - x[last]
    lo = max(gamma - rest, float(np.max(x[:last])))
    value = _draw_interval(law, lo, gamma, u[last], x[last])
    x[last] = _clear_boundary(rest, value, gamma)
    _settle(x, gamma)
    return x


def _compound_sweep(model: RareEventModel, y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    gamma, jump_law = model.gamma, model.jump_law
    r = y.size
    u = open_uniforms(rng, r + 1)
    total = math.fsum(y)
    for j in range(r):
        rest = total - y[j]
        value = _draw_interval(jump_law, gamma - rest, gamma, u[j], y[j])
        y[j] = _clear_boundary(rest, value, gamma)
        total = rest + y[j]
    _settle(y, gamma)

    # length update: π(r | Y) ∝ f_R(r)·1{r >= r*(Y)}
    crossed = np.flatnonzero(np.cumsum(y) > gamma)
    r_star = max(int(crossed[0]) + 1, 2) if crossed.size else r
    cap = model.max_length - 1
    r_new = 1 + int(model.length_law.sample_truncated_interval(r_star - 2, cap + 1, u[r]))
    if r_new > r:
        return np.concatenate([y, jump_law.sample(rng, r_new - r)])
    return y[:r_new].copy()


def _settle(x: np.ndarray, gamma: float) -> None:
    # exact-rounded check of the stored state
    while not math.fsum(x) > gamma:
        x[-1] += np.spacing(max(abs(gamma), 1.0))


def run_chain(
    model: RareEventModel,
    n: int,
    burn_in: Optional[int] = None,
    seed: int = 0,
    target: ChainTarget = ChainTarget.ZERO_VARIANCE,
    max_attempts: int = DEFAULT_INIT_ATTEMPTS,
) -> ChainSample:
    """Run the systematic-scan Gibbs sampler and keep ``n`` post-burn-in states."""
    if n < 1:
        raise DomainError(f"chain length must be positive, got {n}")
    target = ChainTarget(target)
    burn_in = default_burn_in(n) if burn_in is None else int(burn_in)
    if burn_in < 0:
        raise DomainError(f"burn-in must be nonnegative, got {burn_in}")

    started = time.perf_counter()
    rng = replication_stream(seed, f"chain:{model.variant.value}:{target.value}", 0)
    x = initial_state(model, rng, max_attempts=max_attempts, target=target)
    kept: list[np.ndarray] = []
    for step in range(burn_in + n):
        x = gibbs_sweep(model, x, rng, target=target)
        if step >= burn_in:
            kept.append(x.copy())

    lengths = None
    if model.is_compound:
        lengths = np.array([state.size for state in kept], dtype=int)
        states = np.full((n, int(lengths.max())), np.nan)
        for k, state in enumerate(kept):
            states[k, : state.size] = state
    else:
        states = np.vstack(kept)

    elapsed = time.perf_counter() - started
    logger.info(
        "Chain done: variant=%s target=%s n=%d burn_in=%d seconds=%.3f",
        model.variant.value,
        target.value,
        n,
        burn_in,
        elapsed,
    )
    return ChainSample(
        model=model,
        states=states,
        burn_in=burn_in,
        seed=seed,
        target=target,
        lengths=lengths,
        wall_seconds=elapsed,
    )


__all__ = [
    "ChainSample",
    "ChainTarget",
    "ChainVariant",
    "RareEventModel",
    "gibbs_sweep",
    "initial_state",
    "run_chain",
]
