"""Jump laws: densities, tails and inverse-transform truncated sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np
from numpy.typing import ArrayLike
from scipy import special

from semicross.v1.rng import open_uniforms

# Geometric quantiles round up; this absorbs float noise on exact integers.
_CEIL_SLACK = 1e-12


class DomainError(ValueError):
    """Raised when an operation is called outside its mathematical domain."""


class LawFamily(str, Enum):
    WEIBULL = "weibull"
    PARETO = "pareto"
    TRUNCATED_WEIBULL = "truncated_weibull"
    GEOMETRIC = "geometric"


def _out(values: np.ndarray) -> np.ndarray | float:
    return float(values) if np.ndim(values) == 0 else values


def _check_uniform(u: np.ndarray) -> None:
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise DomainError("uniform variates must lie strictly inside (0, 1)")


@dataclass(frozen=True)
class JumpLaw:
    """Law of a single nonnegative jump.

    Continuous families may carry a finite ``upper`` cut-off; the law is then
    the base law conditioned on ``X < upper``. ``TRUNCATED_WEIBULL`` is the
    Weibull law with such a cut-off. ``GEOMETRIC`` lives on {1, 2, ...} with
    success probability ``rho``.
    """

    family: LawFamily
    alpha: float = 1.0
    rho: float = 1.0
    upper: float = math.inf

    def __post_init__(self) -> None:
        try:
            family = LawFamily(self.family)
        except ValueError as exc:
            raise DomainError(f"unknown law family: {self.family!r}") from exc
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "upper", float(self.upper))

        if family is LawFamily.GEOMETRIC:
            if not 0.0 < self.rho <= 1.0:
                raise DomainError(f"geometric rho must lie in (0, 1], got {self.rho}")
            if math.isfinite(self.upper):
                raise DomainError("geometric laws do not take an upper cut-off")
            return
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise DomainError(f"shape alpha must be positive, got {self.alpha}")
        if family is LawFamily.WEIBULL and math.isfinite(self.upper):
            raise DomainError("use the truncated_weibull family for a finite upper cut-off")
        if family is LawFamily.TRUNCATED_WEIBULL and not (0.0 < self.upper < math.inf):
            raise DomainError(f"truncated_weibull needs a finite positive upper, got {self.upper}")
        if family is LawFamily.PARETO and not self.upper > 1.0:
            raise DomainError(f"pareto upper cut-off must exceed 1, got {self.upper}")

    # -- constructors -------------------------------------------------------

    @classmethod
    def weibull(cls, alpha: float) -> JumpLaw:
        return cls(LawFamily.WEIBULL, alpha=alpha)

    @classmethod
    def pareto(cls, alpha: float, upper: float = math.inf) -> JumpLaw:
        return cls(LawFamily.PARETO, alpha=alpha, upper=upper)

    @classmethod
    def truncated_weibull(cls, alpha: float, upper: float) -> JumpLaw:
        return cls(LawFamily.TRUNCATED_WEIBULL, alpha=alpha, upper=upper)

    @classmethod
    def geometric(cls, rho: float) -> JumpLaw:
        return cls(LawFamily.GEOMETRIC, rho=rho)

    def truncated(self, upper: float) -> JumpLaw:
        """The same law conditioned on ``X < upper``."""
        if self.family in (LawFamily.WEIBULL, LawFamily.TRUNCATED_WEIBULL):
            return JumpLaw.truncated_weibull(self.alpha, min(upper, self.upper))
        if self.family is LawFamily.PARETO:
            return JumpLaw.pareto(self.alpha, min(upper, self.upper))
        raise DomainError("geometric laws cannot be truncated from above")

    # -- properties ---------------------------------------------------------

    @property
    def is_discrete(self) -> bool:
        return self.family is LawFamily.GEOMETRIC

    @property
    def is_truncated(self) -> bool:
        return math.isfinite(self.upper)

    @property
    def support_min(self) -> float:
        return 0.0 if self.family in (LawFamily.WEIBULL, LawFamily.TRUNCATED_WEIBULL) else 1.0

    @property
    def _weibull_like(self) -> bool:
        return self.family in (LawFamily.WEIBULL, LawFamily.TRUNCATED_WEIBULL)

    # -- untruncated base law -----------------------------------------------

    def _base_log_tail(self, x: np.ndarray) -> np.ndarray:
        if self._weibull_like:
            return -np.power(np.maximum(x, 0.0), self.alpha)
        return -self.alpha * np.log(np.maximum(x, 1.0))

    def _base_inverse_log_tail(self, log_t: np.ndarray) -> np.ndarray:
        if self._weibull_like:
            return np.power(np.maximum(-log_t, 0.0), 1.0 / self.alpha)
        return np.exp(-log_t / self.alpha)

    def _base_log_density(self, x: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            if self._weibull_like:
                positive = x > 0.0
                safe = np.where(positive, x, 1.0)
                values = math.log(self.alpha) + (self.alpha - 1.0) * np.log(safe) - np.power(safe, self.alpha)
                return np.where(positive, values, -np.inf)
            inside = x >= 1.0
            safe = np.where(inside, x, 1.0)
            values = math.log(self.alpha) - (self.alpha + 1.0) * np.log(safe)
            return np.where(inside, values, -np.inf)

    @property
    def _log_norm(self) -> float:
        """log P(X_base < upper); zero without a cut-off."""
        if not self.is_truncated:
            return 0.0
        return float(np.log(-np.expm1(self._base_log_tail(np.asarray(self.upper)))))

    # -- public operations --------------------------------------------------

    def log_density(self, x: ArrayLike) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        if self.is_discrete:
            return _out(self._geometric_log_pmf(x))
        values = self._base_log_density(x) - self._log_norm
        if self.is_truncated:
            values = np.where(x < self.upper, values, -np.inf)
        return _out(values)

    def density(self, x: ArrayLike) -> np.ndarray | float:
        return _out(np.exp(np.asarray(self.log_density(x))))

    def log_tail(self, x: ArrayLike) -> np.ndarray | float:
        """log P(X > x), exact in the far tail."""
        x = np.asarray(x, dtype=float)
        if self.is_discrete:
            return _out(self._geometric_log_tail(x))
        lt = self._base_log_tail(x)
        if not self.is_truncated:
            return _out(lt)
        lt_upper = float(self._base_log_tail(np.asarray(self.upper)))
        below = x < self.upper
        with np.errstate(divide="ignore", invalid="ignore"):
            gap = np.where(below, lt_upper - lt, -1.0)
            values = lt + np.log(-np.expm1(gap)) - self._log_norm
        return _out(np.where(below, values, -np.inf))

    def tail(self, x: ArrayLike) -> np.ndarray | float:
        return _out(np.exp(np.asarray(self.log_tail(x))))

    def cdf(self, x: ArrayLike) -> np.ndarray | float:
        return _out(-np.expm1(np.asarray(self.log_tail(x))))

    def quantile(self, u: ArrayLike) -> np.ndarray | float:
        u = np.asarray(u, dtype=float)
        _check_uniform(u)
        if self.is_discrete:
            return _out(self._geometric_quantile(u))
        return _out(self._continuous_interval(np.full_like(u, self.support_min), np.full_like(u, self.upper), u))

    def sample_truncated_above(self, c: ArrayLike, u: ArrayLike) -> np.ndarray | float:
        """Draw from the law conditioned on X > c by inversion."""
        c = np.asarray(c, dtype=float)
        u = np.asarray(u, dtype=float)
        _check_uniform(u)
        if self.is_discrete:
            return _out(np.maximum(np.floor(c), 0.0) + self._geometric_quantile(u))
        return _out(self._continuous_interval(c, np.full_like(c, self.upper), u))

    def sample_truncated_interval(self, lo: ArrayLike, hi: ArrayLike, u: ArrayLike) -> np.ndarray | float:
        """Draw from the law conditioned on lo < X < hi by inversion."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        u = np.asarray(u, dtype=float)
        _check_uniform(u)
        if self.is_discrete:
            return _out(self._geometric_interval(lo, hi, u))
        return _out(self._continuous_interval(lo, hi, u))

    def sample(self, rng: np.random.Generator, size: int | tuple[int, ...]) -> np.ndarray:
        return np.asarray(self.quantile(open_uniforms(rng, size)))

    def mean(self) -> float:
        alpha = self.alpha
        if self.family is LawFamily.GEOMETRIC:
            return 1.0 / self.rho
        if self._weibull_like:
            shape = 1.0 + 1.0 / alpha
            if not self.is_truncated:
                return float(special.gamma(shape))
            partial = special.gamma(shape) * special.gammainc(shape, self.upper**alpha)
            return float(partial / math.exp(self._log_norm))
        if alpha <= 1.0 and not self.is_truncated:
            return math.inf
        if not self.is_truncated:
            return alpha / (alpha - 1.0)
        if alpha == 1.0:
            partial = math.log(self.upper)
        else:
            partial = alpha * (1.0 - self.upper ** (1.0 - alpha)) / (alpha - 1.0)
        return partial / math.exp(self._log_norm)

    # -- internals ----------------------------------------------------------

    def _continuous_interval(self, lo: np.ndarray, hi: np.ndarray, u: np.ndarray) -> np.ndarray:
        a = np.maximum(lo, self.support_min)
        b = np.minimum(hi, self.upper)
        if np.any(a >= b):
            raise DomainError("empty truncation interval")
        lt_a = self._base_log_tail(a)
        lt_b = self._base_log_tail(b)
        kept = -np.expm1(lt_b - lt_a)
        draws = self._base_inverse_log_tail(lt_a + np.log1p(-u * kept))
        return np.clip(draws, a, b)

    def _geometric_log_pmf(self, r: np.ndarray) -> np.ndarray:
        valid = (r >= 1.0) & (r == np.floor(r))
        if self.rho == 1.0:
            return np.where(valid & (r == 1.0), 0.0, -np.inf)
        safe = np.where(valid, r, 1.0)
        values = math.log(self.rho) + (safe - 1.0) * math.log1p(-self.rho)
        return np.where(valid, values, -np.inf)

    def _geometric_log_tail(self, x: np.ndarray) -> np.ndarray:
        k = np.maximum(np.floor(x), 0.0)
        if self.rho == 1.0:
            return np.where(k < 1.0, 0.0, -np.inf)
        return k * math.log1p(-self.rho)

    def _geometric_quantile(self, u: np.ndarray) -> np.ndarray:
        if self.rho == 1.0:
            return np.ones_like(u)
        ratio = np.log1p(-u) / math.log1p(-self.rho)
        return np.maximum(np.ceil(ratio - _CEIL_SLACK), 1.0)

    def _geometric_interval(self, lo: np.ndarray, hi: np.ndarray, u: np.ndarray) -> np.ndarray:
        base = np.maximum(np.floor(lo), 0.0)
        top = np.ceil(hi) - 1.0
        width = top - base
        if np.any(width < 1.0):
            raise DomainError("empty truncation interval")
        if self.rho == 1.0:
            if np.any(base > 0.0):
                raise DomainError("empty truncation interval")
            return np.ones_like(u)
        log_q = math.log1p(-self.rho)
        with np.errstate(over="ignore"):
            kept = -np.expm1(width * log_q)
        steps = np.ceil(np.log1p(-u * kept) / log_q - _CEIL_SLACK)
        return base + np.clip(steps, 1.0, width)

    # -- flat key/value codec -------------------------------------------------

    def to_pairs(self) -> dict[str, str]:
        pairs = {"family": self.family.value}
        if self.family is LawFamily.GEOMETRIC:
            pairs["rho"] = repr(self.rho)
        else:
            pairs["alpha"] = repr(self.alpha)
        if self.is_truncated:
            pairs["upper"] = repr(self.upper)
        return pairs

    @classmethod
    def from_pairs(cls, pairs: Mapping[str, str]) -> JumpLaw:
        if "family" not in pairs:
            raise DomainError("missing 'family'")
        try:
            return cls(
                pairs["family"],
                alpha=float(pairs.get("alpha", 1.0)),
                rho=float(pairs.get("rho", 1.0)),
                upper=float(pairs.get("upper", math.inf)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, DomainError):
                raise
            raise DomainError(f"malformed law parameters: {exc}") from exc


__all__ = ["DomainError", "JumpLaw", "LawFamily"]
