"""Geometric compound sums S_R = X_1 + ... + X_R with Weibull jumps.

The probability splits into an exact dominant term (some jump alone exceeds
γ) and a residual term under the tilted measure where every jump is below γ.
There R - 1 is geometric with success probability F̄(γ) + ρF(γ) (so R >= 2)
and jumps follow the Weibull law truncated to (0, γ). The residual is
estimated by importance sampling from a transdimensional Rao-Blackwellized
density built on the Gibbs chain over (r, y_1..y_r).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from semicross.v1.config import DEFENSIVE_WEIGHT
from semicross.v1.distributions import DomainError
from semicross.v1.distributions import JumpLaw
from semicross.v1.estimators import EstimateReport
from semicross.v1.estimators import Method
from semicross.v1.estimators import make_report
from semicross.v1.marginal_mixture import MarginalMixture
from semicross.v1.marginal_mixture import build_marginal
from semicross.v1.marginal_mixture import mixture_log_density
from semicross.v1.marginal_mixture import mixture_sample
from semicross.v1.rng import open_uniforms
from semicross.v1.rng import replicate
from semicross.v1.zero_variance_mcmc import ChainSample
from semicross.v1.zero_variance_mcmc import RareEventModel
from semicross.v1.zero_variance_mcmc import run_chain

logger = logging.getLogger(__name__)


def compound_model(alpha: float, rho: float, gamma: float) -> RareEventModel:
    return RareEventModel.compound(JumpLaw.weibull(alpha), rho, gamma)


def _require_compound(model: RareEventModel) -> None:
    if not model.is_compound:
        raise DomainError("this operation needs a compound model")


def compound_dominant_term(model: RareEventModel) -> float:
    """F̄(γ) / (F̄(γ) + ρF(γ))."""
    _require_compound(model)
    return float(model.law.tail(model.gamma)) / model.tilted_success


def compound_residual_coefficient(model: RareEventModel) -> float:
    """ρ(1 - ρ)F(γ)² / (F̄(γ) + ρF(γ))."""
    _require_compound(model)
    cdf = float(model.law.cdf(model.gamma))
    return model.rho * (1.0 - model.rho) * cdf * cdf / model.tilted_success


def _first_crossing(jumps: np.ndarray, gamma: float) -> np.ndarray:
    """1-based index of the first prefix sum above γ, per row (NaN padding ignored)."""
    crossed = np.nancumsum(jumps, axis=1) > gamma
    crossed &= ~np.isnan(jumps)
    return np.argmax(crossed, axis=1) + 1


@dataclass(frozen=True)
class CompoundIsDensity:
    """ĝ = (1 - ε)·ĝ_chain + ε·q₀ over states (r, y_1..y_r).

    ĝ_chain(r, y) = ĥ_R(r) · Π_{i<r} ĥ_i(y_i) · π(y_r | y_1..y_{r-1}) is built
    on the chain; q₀ draws r - 1 from the length law, the first r - 1 jumps
    from the jump law and the last jump from the same exact conditional, so
    the weight f/ĝ never exceeds 1/ε on {S_r > γ}.

    ``length_mixture`` lives on G = R - 1; sampled lengths are capped at
    ``model.max_length`` with the excess mass folded onto the cap.
    """

    model: RareEventModel
    length_mixture: MarginalMixture
    jump_marginals: tuple[MarginalMixture, ...]
    fallback: MarginalMixture
    defensive_weight: float = DEFENSIVE_WEIGHT
    build_seconds: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.defensive_weight < 1.0:
            raise DomainError(f"defensive weight must lie in [0, 1), got {self.defensive_weight}")

    @property
    def length_cap(self) -> int:
        return self.model.max_length - 1

    def marginal(self, position: int) -> MarginalMixture:
        if position < len(self.jump_marginals):
            return self.jump_marginals[position]
        return self.fallback

    def length_log_mass(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        values = np.asarray(mixture_log_density(self.length_mixture, g), dtype=float)
        at_cap = g >= self.length_cap
        if np.any(at_cap):
            values = np.where(at_cap, self._folded_log_mass(), values)
        return values

    def _folded_log_mass(self) -> float:
        mix = self.length_mixture
        cap = self.length_cap
        k = int(np.searchsorted(mix.thresholds, cap, side="left")) - 1
        above = mix.n - (k + 1)
        parts = []
        if k >= 0:
            parts.append(float(mix.law.log_tail(cap - 1)) + float(mix.log_cum_weights[k]))
        if above:
            parts.append(math.log(above))
        return float(np.logaddexp.reduce(parts)) - math.log(mix.n)

    def _prior_length_log_mass(self, g: np.ndarray) -> np.ndarray:
        law = self.model.length_law
        g = np.asarray(g, dtype=float)
        values = np.asarray(law.log_density(np.minimum(g, self.length_cap)), dtype=float)
        return np.where(g >= self.length_cap, float(law.log_tail(self.length_cap - 1)), values)

    def _fill_jumps(self, rng: np.random.Generator, lengths: np.ndarray, from_chain: bool) -> np.ndarray:
        jump_law = self.model.jump_law
        jumps = np.full((lengths.size, int(lengths.max())), np.nan)
        for position in range(int(lengths.max()) - 1):
            rows = np.flatnonzero(lengths - 1 > position)
            if from_chain:
                values = mixture_sample(self.marginal(position), rng, rows.size)
            else:
                values = jump_law.sample(rng, rows.size)
            jumps[rows, position] = values
        lower = np.maximum(self.model.gamma - np.nansum(jumps, axis=1), 0.0)
        last = jump_law.sample_truncated_above(lower, open_uniforms(rng, lengths.size))
        jumps[np.arange(lengths.size), lengths - 1] = last
        return jumps

    def sample(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Draw ``size`` states; returns (lengths, NaN-padded jumps, log ĝ)."""
        defensive = open_uniforms(rng, size) < self.defensive_weight
        g = np.empty(size)
        picks = ((np.flatnonzero(~defensive), True), (np.flatnonzero(defensive), False))
        for rows, from_chain in picks:
            if not rows.size:
                continue
            if from_chain:
                g[rows] = mixture_sample(self.length_mixture, rng, rows.size)
            else:
                g[rows] = self.model.length_law.sample(rng, rows.size)
        lengths = np.minimum(g, self.length_cap).astype(int) + 1
        jumps = np.full((size, int(lengths.max())), np.nan)
        for rows, from_chain in picks:
            if rows.size:
                part = self._fill_jumps(rng, lengths[rows], from_chain)
                jumps[rows, : part.shape[1]] = part
        return lengths, jumps, self.log_density(lengths, jumps)

    def _last_jump_log(self, lengths: np.ndarray, jumps: np.ndarray, prefix: np.ndarray) -> np.ndarray:
        jump_law = self.model.jump_law
        last = jumps[np.arange(lengths.size), lengths - 1]
        lower = np.maximum(self.model.gamma - prefix, 0.0)
        values = np.asarray(jump_law.log_density(last)) - np.asarray(jump_law.log_tail(lower))
        return np.where(last >= lower, values, -np.inf)

    def chain_log_density(self, lengths: np.ndarray, jumps: np.ndarray) -> np.ndarray:
        """log ĝ_chain at given states."""
        lengths = np.asarray(lengths, dtype=int)
        jumps = np.atleast_2d(np.asarray(jumps, dtype=float))
        total = self.length_log_mass(lengths - 1)
        prefix = np.zeros(lengths.size)
        for position in range(jumps.shape[1]):
            active = lengths - 1 > position
            if not np.any(active):
                break
            values = np.where(active, jumps[:, position], 1.0)
            part = np.asarray(mixture_log_density(self.marginal(position), values))
            total = total + np.where(active, part, 0.0)
            prefix = prefix + np.where(active, jumps[:, position], 0.0)
        return total + self._last_jump_log(lengths, jumps, prefix)

    def defensive_log_density(self, lengths: np.ndarray, jumps: np.ndarray) -> np.ndarray:
        """log q₀ at given states."""
        lengths = np.asarray(lengths, dtype=int)
        jumps = np.atleast_2d(np.asarray(jumps, dtype=float))
        width = np.arange(jumps.shape[1])[None, :]
        free = width < (lengths - 1)[:, None]
        values = np.where(free, jumps, 1.0)
        logs = np.where(free, np.asarray(self.model.jump_law.log_density(values)), 0.0).sum(axis=1)
        prefix = np.where(free, jumps, 0.0).sum(axis=1)
        return self._prior_length_log_mass(lengths - 1) + logs + self._last_jump_log(lengths, jumps, prefix)

    def log_density(self, lengths: np.ndarray, jumps: np.ndarray) -> np.ndarray:
        """Re-evaluate log ĝ at given states."""
        chain_part = self.chain_log_density(lengths, jumps)
        if self.defensive_weight == 0.0:
            return chain_part
        with np.errstate(divide="ignore"):
            return np.logaddexp(
                math.log1p(-self.defensive_weight) + chain_part,
                math.log(self.defensive_weight) + self.defensive_log_density(lengths, jumps),
            )


def position_thresholds(chain: ChainSample, position: int) -> np.ndarray:
    """Thresholds (γ - Σ_{j≠i} y_j)⁺ of every chain state at one jump position.

    States shorter than ``position + 1`` carry their unused positions as free
    draws from the jump law, so their threshold is 0.
    """
    lengths = np.asarray(chain.lengths, dtype=int)
    thresholds = np.zeros(lengths.size)
    rows = np.flatnonzero(lengths > position)
    rest = chain.sums()[rows] - chain.states[rows, position]
    thresholds[rows] = np.maximum(chain.model.gamma - rest, 0.0)
    return thresholds


def build_compound_density(chain: ChainSample, defensive_weight: float = DEFENSIVE_WEIGHT) -> CompoundIsDensity:
    """Length mixture over r*(Y_k) and per-position jump mixtures over every chain state."""
    model = chain.model
    _require_compound(model)
    started = time.perf_counter()
    lengths = np.asarray(chain.lengths, dtype=int)

    crossings = _first_crossing(chain.states, model.gamma)
    length_mixture = build_marginal(model.length_law, np.maximum(crossings, 2) - 2)
    jump_marginals = tuple(
        build_marginal(model.jump_law, position_thresholds(chain, position)) for position in range(int(lengths.max()))
    )
    fallback = build_marginal(model.jump_law, [0.0])

    elapsed = time.perf_counter() - started
    logger.debug("Compound density: %d jump mixtures, defensive weight %g", len(jump_marginals), defensive_weight)
    return CompoundIsDensity(
        model=model,
        length_mixture=length_mixture,
        jump_marginals=jump_marginals,
        fallback=fallback,
        defensive_weight=defensive_weight,
        build_seconds=chain.wall_seconds + elapsed,
    )


def _residual_block(g: CompoundIsDensity):
    model = g.model
    length_law, jump_law, gamma = model.length_law, model.jump_law, model.gamma

    def _block(rng: np.random.Generator, size: int) -> np.ndarray:
        lengths, jumps, log_g = g.sample(rng, size)
        present = ~np.isnan(jumps)
        jump_logs = np.asarray(jump_law.log_density(np.where(present, jumps, 1.0)))
        log_target = np.asarray(length_law.log_density(lengths - 1)) + np.where(present, jump_logs, 0.0).sum(axis=1)
        inside = np.nansum(jumps, axis=1) > gamma
        return np.where(inside, np.exp(log_target - log_g), 0.0)

    return _block


def compound_estimate(
    model: RareEventModel,
    n: int,
    m: int,
    seed: int,
    burn_in: Optional[int] = None,
    workers: int = 1,
) -> EstimateReport:
    """Dominant term plus coefficient × semiparametric IS estimate of the tilted residual."""
    _require_compound(model)
    started = time.perf_counter()
    head = compound_dominant_term(model)
    coefficient = compound_residual_coefficient(model)
    if coefficient == 0.0:
        return make_report(Method.COMPOUND, head, 0.0, m, time.perf_counter() - started, seed)

    chain = run_chain(model, n, burn_in=burn_in, seed=seed)
    g = build_compound_density(chain)
    moments = replicate(_residual_block(g), m, seed, "compound", workers)
    estimate = head + coefficient * moments.mean
    logger.debug("Compound head %.6e, residual probability %.6e", head, moments.mean)
    return make_report(
        Method.COMPOUND,
        estimate,
        coefficient * moments.std_error,
        m,
        time.perf_counter() - started,
        seed,
        n,
    )


def _geometric_counts(rho: float, rng: np.random.Generator, size: int) -> np.ndarray:
    return JumpLaw.geometric(rho).sample(rng, size).astype(int)


def compound_crude_mc(model: RareEventModel, m: int, seed: int, workers: int = 1) -> EstimateReport:
    """Indicator average over simulated compound sums (verification oracle)."""
    _require_compound(model)
    started = time.perf_counter()
    law, rho, gamma = model.law, model.rho, model.gamma

    def _block(rng: np.random.Generator, size: int) -> np.ndarray:
        counts = _geometric_counts(rho, rng, size)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        sums = np.add.reduceat(law.sample(rng, int(counts.sum())), starts)
        return (sums > gamma).astype(float)

    moments = replicate(_block, m, seed, "compound_crude", workers)
    p = moments.mean
    std_error = math.sqrt(max(p * (1.0 - p), 0.0) / m)
    return make_report(Method.COMPOUND_CRUDE, p, std_error, m, time.perf_counter() - started, seed)


def compound_ak_estimate(model: RareEventModel, m: int, seed: int, workers: int = 1) -> EstimateReport:
    """Conditional estimator R·F̄(max(γ - S_{R-1}, M_{R-1})) for geometric sums."""
    _require_compound(model)
    started = time.perf_counter()
    law, rho, gamma = model.law, model.rho, model.gamma

    def _block(rng: np.random.Generator, size: int) -> np.ndarray:
        counts = _geometric_counts(rho, rng, size)
        previous = counts - 1
        x = law.sample(rng, int(previous.sum()))
        offsets = np.concatenate([[0], np.cumsum(previous)])
        running = np.concatenate([[0.0], np.cumsum(x)])
        sums = running[offsets[1:]] - running[offsets[:-1]]
        padded = np.append(x, 0.0)
        maxima = np.where(previous > 0, np.maximum.reduceat(padded, offsets[:-1]), 0.0)
        cut = np.maximum(gamma - sums, maxima)
        return counts * np.asarray(law.tail(cut))

    moments = replicate(_block, m, seed, "compound_ak", workers)
    return make_report(
        Method.COMPOUND_AK,
        moments.mean,
        moments.std_error,
        m,
        time.perf_counter() - started,
        seed,
    )


__all__ = [
    "CompoundIsDensity",
    "build_compound_density",
    "compound_ak_estimate",
    "compound_crude_mc",
    "compound_dominant_term",
    "compound_estimate",
    "compound_model",
    "compound_residual_coefficient",
    "position_thresholds",
]
