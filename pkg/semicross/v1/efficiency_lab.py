"""Numerical checks of efficiency properties.

Covers convolution tails F̄*ᵈ, the second moment of the ideal semiparametric
estimator, the φ function and its candidate minimizer, the Iₙ integrals
behind the Pareto efficiency argument, and the CE-optimality check on a
discrete 3×3 law.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from functools import lru_cache
from typing import Any
from typing import Optional
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy import special

from semicross.v1.distributions import DomainError
from semicross.v1.distributions import JumpLaw
from semicross.v1.distributions import LawFamily
from semicross.v1.estimators import ak_estimate
from semicross.v1.estimators import semiparametric_pipeline
from semicross.v1.rng import replication_stream
from semicross.v1.zero_variance_mcmc import RareEventModel
from semicross.v1.zero_variance_mcmc import run_chain

logger = logging.getLogger(__name__)

QUAD_REL_TOL = 1e-10
MAX_I_ORDER = 4


# -- convolution tails -------------------------------------------------------


@dataclass(frozen=True)
class TailValue:
    value: float
    error: float
    method: str


def _is_exponential(law: JumpLaw) -> bool:
    return law.family is LawFamily.WEIBULL and law.alpha == 1.0


def convolution_tail(law: JumpLaw, d: int, x: float, *, m: int = 100_000, seed: int = 0) -> TailValue:
    """F̄*ᵈ(x) = P(X_1 + ... + X_d > x).

    Exact for d = 1 and for exponential jumps (Erlang tail), adaptive
    quadrature for d = 2, conditional Monte Carlo otherwise with a 3σ error.
    """
    if d < 0:
        raise DomainError(f"d must be nonnegative, got {d}")
    if d == 0:
        return TailValue(1.0 if x < 0.0 else 0.0, 0.0, "exact")
    if x < d * law.support_min:
        return TailValue(1.0, 0.0, "exact")
    if d == 1:
        return TailValue(float(law.tail(x)), 0.0, "exact")
    if _is_exponential(law):
        return TailValue(float(special.gammaincc(d, x)), 0.0, "erlang")
    if d == 2:
        value, error = _two_fold_tail(law, x)
        return TailValue(value, error, "quadrature")
    report = ak_estimate(RareEventModel.fixed_sum(law, d, x), m, seed)
    return TailValue(report.estimate, 3.0 * report.std_error, "monte_carlo")


def _two_fold_tail(law: JumpLaw, x: float) -> tuple[float, float]:
    low = law.support_min
    high = x - low
    head = float(law.tail(high))
    if high <= low:
        return head, 0.0

    def integrand(y: float) -> float:
        return float(law.density(y)) * float(law.tail(x - y))

    value, error = integrate.quad(integrand, low, high, points=[0.5 * x], epsabs=0.0, epsrel=QUAD_REL_TOL, limit=200)
    return head + value, error


@dataclass(frozen=True)
class ConvolutionTail:
    """F̄*ᵈ tabulated on a grid and interpolated in log scale."""

    law: JumpLaw
    d: int
    grid: np.ndarray
    log_values: np.ndarray

    def log_tail(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        values = np.interp(x, self.grid, self.log_values)
        return np.where(x < self.d * self.law.support_min, 0.0, values)


def build_convolution_tail(
    law: JumpLaw,
    d: int,
    grid: Sequence[float],
    *,
    m: int = 100_000,
    seed: int = 0,
) -> ConvolutionTail:
    points = np.asarray(sorted(set(float(g) for g in grid)))
    with np.errstate(divide="ignore"):
        log_values = np.log([convolution_tail(law, d, float(g), m=m, seed=seed).value for g in points])
    return ConvolutionTail(law=law, d=d, grid=points, log_values=log_values)


# -- second moment of the ideal estimator -------------------------------------


@dataclass(frozen=True)
class SecondMomentRatio:
    value: float
    std_error: float


def second_moment_ratio(
    model: RareEventModel,
    m: int,
    seed: int,
    *,
    grid_points: int = 400,
    batches: int = 20,
) -> SecondMomentRatio:
    """E Z² / ℓ² for Z = 1{S>γ} Π_i F̄*ᵈ(γ) / F̄*⁽ᵈ⁻¹⁾(γ - X_i), X ~ f.

    Evaluated as ℓ^{d-1} · E_π[Π_i 1/F̄*⁽ᵈ⁻¹⁾(γ - X_i)] over a zero-variance
    chain of length ``m``; the error is from batch means.
    """
    d, law, gamma = model.d, model.law, model.gamma
    if d == 1:
        return SecondMomentRatio(1.0, 0.0)
    ell = convolution_tail(law, d, gamma, seed=seed).value
    grid = np.linspace(0.0, max(gamma, 0.0), grid_points)
    inner = build_convolution_tail(law, d - 1, grid, seed=seed)

    chain = run_chain(model, m, seed=seed)
    log_terms = -inner.log_tail(gamma - chain.states).sum(axis=1) + (d - 1) * math.log(ell)
    terms = np.exp(log_terms)
    usable = max(1, min(batches, terms.size))
    batch_means = np.array([part.mean() for part in np.array_split(terms, usable)])
    std_error = float(batch_means.std(ddof=1) / math.sqrt(usable)) if usable > 1 else math.nan
    return SecondMomentRatio(float(terms.mean()), std_error)


# -- φ ---------------------------------------------------------------------


def _check_phi_domain(u: np.ndarray) -> None:
    if np.any(u < 0.0) or np.any(u > 1.0) or u.sum() < 1.0 - 1e-12:
        raise DomainError("phi is defined on {u in [0,1]^d : sum(u) >= 1}")


def phi(u: Sequence[float], alpha: float) -> float:
    """φ(u) = d - 2 + Σ (u_i^α - (1 - u_i)^α)."""
    u = np.asarray(u, dtype=float)
    _check_phi_domain(u)
    return float(u.size - 2 + np.sum(u**alpha - (1.0 - u) ** alpha))


def phi_gradient(u: Sequence[float], alpha: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        return alpha * (u ** (alpha - 1.0) + (1.0 - u) ** (alpha - 1.0))


def phi_star(d: int, alpha: float) -> float:
    """φ at u* = (1/d, ..., 1/d)."""
    return d - 2 + d ** (1.0 - alpha) - d ** (1.0 - alpha) * (d - 1) ** alpha


@dataclass(frozen=True)
class PhiSearch:
    minimum: float
    argmin: tuple[float, ...]
    phi_star: float
    points: int

    @property
    def undercuts_center(self) -> bool:
        return self.minimum < self.phi_star - 1e-9


def phi_min_search(d: int, alpha: float, n_points: int = 100_000, seed: int = 0) -> PhiSearch:
    """Brute-force minimum of φ over uniform points of D̄ (rejection from the unit cube)."""
    rng = replication_stream(seed, "phi_search", 0)
    kept: list[np.ndarray] = []
    count = 0
    while count < n_points:
        batch = rng.random((max(n_points, 1024), d))
        batch = batch[batch.sum(axis=1) >= 1.0]
        kept.append(batch)
        count += batch.shape[0]
    points = np.vstack(kept)[:n_points]
    values = d - 2 + np.sum(points**alpha - (1.0 - points) ** alpha, axis=1)
    best = int(np.argmin(values))
    return PhiSearch(
        minimum=float(values[best]),
        argmin=tuple(float(v) for v in points[best]),
        phi_star=phi_star(d, alpha),
        points=n_points,
    )


# -- Iₙ integrals ------------------------------------------------------------


def L(y: float, alpha: float) -> float:
    return (1.0 - y) ** alpha * y ** (-(alpha + 1.0))


def _I1(lower: float, alpha: float) -> float:
    """∫_lower^1 (1-y)^α y^{-(α+1)} dy for 0 < lower."""
    if lower >= 1.0:
        return 0.0
    if alpha == 1.0:
        return 1.0 / lower - 1.0 + math.log(lower)
    if alpha < 1.0:
        # by parts, then a regularized incomplete beta
        head = ((1.0 - lower) / lower) ** alpha / alpha
        beta = math.pi / math.sin(math.pi * alpha)
        return head - beta * float(special.betaincc(1.0 - alpha, alpha, lower))
    value, _ = integrate.quad(lambda t: t**alpha / (1.0 + t), 0.0, (1.0 - lower) / lower, epsabs=0.0, epsrel=1e-13)
    return value


def I_n_with_error(
    gamma: float,
    zeta: float,
    n: int,
    alpha: float,
    rel_tol: float = QUAD_REL_TOL,
) -> tuple[float, float]:
    """Iₙ(γ, ζ) by nested adaptive quadrature in log y, with an error estimate.

    I₁(γ,ζ) = ∫_{ζ∨γ⁻¹}^1 L(y) dy and
    Iₙ(γ,ζ) = ∫_{γ⁻¹}^{ζ-(n-2)γ⁻¹} L(y) Iₙ₋₁(γ, ζ-y) dy.
    """
    if not 1 <= n <= MAX_I_ORDER:
        raise DomainError(f"I_n is supported for 1 <= n <= {MAX_I_ORDER}, got {n}")
    if gamma <= 1.0 or alpha <= 0.0:
        raise DomainError("I_n needs gamma > 1 and alpha > 0")
    a = 1.0 / gamma
    if n >= 2 and zeta < n * a:
        raise DomainError(f"zeta must be at least n/gamma = {n * a}")
    errors: list[float] = []

    @lru_cache(maxsize=None)
    def _inner(order: int, z: float) -> float:
        if order == 1:
            return _I1(max(z, a), alpha)
        upper = z - (order - 2) * a
        if upper <= a:
            return 0.0

        def integrand(s: float) -> float:
            y = math.exp(s)
            return L(y, alpha) * y * _inner(order - 1, z - y)

        lo, hi = math.log(a), math.log(upper)
        cuts = [math.log(z - a)] if a < z - a < upper else []
        value, error = integrate.quad(integrand, lo, hi, points=cuts or None, epsabs=0.0, epsrel=rel_tol, limit=200)
        if order == n:
            errors.append(error)
        return value

    value = _inner(n, float(zeta))
    return value, sum(errors) + rel_tol * abs(value)


def I_n(gamma: float, zeta: float, n: int, alpha: float, rel_tol: float = QUAD_REL_TOL) -> float:
    return I_n_with_error(gamma, zeta, n, alpha, rel_tol)[0]


def H_n(gamma: float, n: int, alpha: float) -> float:
    """Hₙ = αⁿ γ^{-nα} Iₙ(γ, 1)."""
    return alpha**n * gamma ** (-n * alpha) * I_n(gamma, 1.0, n, alpha)


@dataclass(frozen=True)
class DerivativeCheck:
    finite_difference: float
    identity: float
    residual: float


def check_derivative_identity(gamma: float, zeta: float, n: int, alpha: float) -> DerivativeCheck:
    """Compare a central difference of Iₙ in γ with n L(γ⁻¹) Iₙ₋₁(γ, ζ-γ⁻¹) γ⁻²."""
    if n < 2:
        raise DomainError("the derivative identity relates orders n >= 2")
    h = gamma * 1e-5
    forward = I_n(gamma + h, zeta, n, alpha, rel_tol=1e-12)
    backward = I_n(gamma - h, zeta, n, alpha, rel_tol=1e-12)
    fd = (forward - backward) / (2.0 * h)
    a = 1.0 / gamma
    rhs = n * L(a, alpha) * I_n(gamma, zeta - a, n - 1, alpha, rel_tol=1e-12) * a * a
    residual = abs(fd - rhs) / abs(rhs) if rhs != 0.0 else abs(fd)
    return DerivativeCheck(finite_difference=fd, identity=rhs, residual=residual)


# -- efficiency trends -------------------------------------------------------


@dataclass
class TrendPoint:
    gamma: float
    value: float
    estimate: Optional[float] = None
    rel_error: Optional[float] = None

    def to_dict(self) -> dict[str, Any]:
        return {key: value for key, value in asdict(self).items() if value is not None}


@dataclass
class Trend:
    name: str
    points: list[TrendPoint] = field(default_factory=list)
    decreasing: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "decreasing": self.decreasing, "points": [p.to_dict() for p in self.points]}


def _tail_is_monotone(values: Sequence[float], strict: bool) -> bool:
    last = list(values)[-3:]
    if len(last) < 2:
        return True
    pairs = zip(last, last[1:])
    return all(b < a for a, b in pairs) if strict else all(b <= a * (1.0 + 1e-12) for a, b in pairs)


def pareto_log_efficiency_trend(n: int, alpha: float, grid: Sequence[float] = (10.0, 100.0, 1000.0)) -> Trend:
    """Iₙ(γ,1) / (γ^{α(n-2)} ln γ) along ``grid``; decreasing means the bound tightens."""
    points = []
    for gamma in grid:
        ratio = I_n(gamma, 1.0, n, alpha) / (gamma ** (alpha * (n - 2)) * math.log(gamma))
        points.append(TrendPoint(gamma=float(gamma), value=ratio))
    trend = Trend(name=f"pareto_I{n}_alpha{alpha:g}", points=points)
    trend.decreasing = _tail_is_monotone([p.value for p in points], strict=True)
    return trend


def lighttail_relative_error_trend(
    law: JumpLaw,
    d: int,
    grid: Sequence[float],
    *,
    n: int = 1000,
    m: int = 100_000,
    seed: int = 0,
) -> Trend:
    """Relative error of the semiparametric pipeline times ℓ̂^{1/4} along ``grid``."""
    if law.family is not LawFamily.WEIBULL or law.alpha < 1.0:
        raise DomainError("the light-tail trend needs a Weibull law with alpha >= 1")
    points = []
    for gamma in grid:
        model = RareEventModel.fixed_sum(law, d, gamma)
        report = semiparametric_pipeline(model, n, m, seed)
        scaled = report.rel_error * report.estimate**0.25 if report.estimate > 0.0 else math.inf
        point = TrendPoint(gamma=float(gamma), value=scaled, estimate=report.estimate, rel_error=report.rel_error)
        points.append(point)
    trend = Trend(name=f"lighttail_d{d}_alpha{law.alpha:g}", points=points)
    trend.decreasing = _tail_is_monotone([p.value for p in points], strict=False)
    return trend


# -- CE optimality on a discrete law ----------------------------------------

PRODUCT_FIXTURE = np.outer([0.2, 0.3, 0.5], [0.6, 0.1, 0.3])
DIAGONAL_FIXTURE = np.diag([0.2, 0.3, 0.5])
UNIFORM_FIXTURE = np.full((3, 3), 1.0 / 9.0)


def kl_divergence(pi: np.ndarray, q: np.ndarray) -> float:
    pi = np.asarray(pi, dtype=float)
    q = np.asarray(q, dtype=float)
    mask = pi > 0.0
    with np.errstate(divide="ignore"):
        return float(np.sum(pi[mask] * (np.log(pi[mask]) - np.log(q[mask]))))


def ce_optimality_check(pi: np.ndarray, n_random: int = 10_000, seed: int = 0) -> bool:
    """True iff the product of π's marginals beats every random product law in KL(π ‖ q)."""
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 2 or np.any(pi < 0.0) or not math.isclose(pi.sum(), 1.0, rel_tol=1e-12):
        raise DomainError("pi must be a probability matrix")
    best = kl_divergence(pi, np.outer(pi.sum(axis=1), pi.sum(axis=0)))
    rng = replication_stream(seed, "ce_optimality", 0)
    rows = rng.dirichlet(np.ones(pi.shape[0]), size=n_random)
    cols = rng.dirichlet(np.ones(pi.shape[1]), size=n_random)
    for row, col in zip(rows, cols):
        if kl_divergence(pi, np.outer(row, col)) < best - 1e-12:
            return False
    return True


__all__ = [
    "ConvolutionTail",
    "DerivativeCheck",
    "H_n",
    "I_n",
    "I_n_with_error",
    "L",
    "PhiSearch",
    "SecondMomentRatio",
    "TailValue",
    "Trend",
    "TrendPoint",
    "build_convolution_tail",
    "ce_optimality_check",
    "check_derivative_identity",
    "convolution_tail",
    "kl_divergence",
    "lighttail_relative_error_trend",
    "pareto_log_efficiency_trend",
    "phi",
    "phi_gradient",
    "phi_min_search",
    "phi_star",
    "second_moment_ratio",
]
