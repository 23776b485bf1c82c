"""Experiment configuration: flat key=value files validated with pydantic."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any
from typing import Literal
from typing import Optional

from pydantic import BaseModel
from pydantic import Field
from pydantic import ValidationError
from pydantic import field_validator
from pydantic import model_validator

from semicross.v1.config import default_workers
from semicross.v1.distributions import DomainError
from semicross.v1.distributions import JumpLaw
from semicross.v1.distributions import LawFamily
from semicross.v1.estimators import Method
from semicross.v1.estimators import method_problems
from semicross.v1.zero_variance_mcmc import RareEventModel

logger = logging.getLogger(__name__)

LIST_FIELDS = {"gammas", "methods", "seeds"}

KEY_ALIASES = {
    "gamma": "gammas",
    "method": "methods",
    "seed": "seeds",
    "burn-in": "burn_in",
    "burnin": "burn_in",
}


class ConfigError(ValueError):
    """Invalid experiment configuration, optionally tied to a config-file line."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ExperimentConfig(BaseModel):
    """One experiment: a model family, a γ grid, methods, sizes and seeds."""

    model: Literal["fixed", "compound"] = Field(default="fixed", description="Fixed-length or geometric compound sum")
    family: LawFamily = Field(default=LawFamily.WEIBULL, description="Jump law family")
    alpha: float = Field(default=1.0, gt=0.0, description="Jump law shape")
    rho: Optional[float] = Field(default=None, gt=0.0, le=1.0, description="Geometric success probability")
    d: int = Field(default=2, ge=1, description="Number of jumps in a fixed-length sum")
    gammas: list[float] = Field(min_length=1, description="Thresholds γ")
    methods: list[Method] = Field(default_factory=lambda: [Method.AK, Method.DOMINANT_TERM], min_length=1)
    baseline: Optional[Method] = Field(default=None, description="Method the others are compared against")
    n: int = Field(default=1000, ge=1, description="Chain length after burn-in")
    burn_in: Optional[int] = Field(default=None, ge=0, description="Burn-in sweeps (default 10% of n, at least 100)")
    m: int = Field(default=100_000, ge=1, description="Importance-sampling replications")
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    workers: int = Field(default_factory=default_workers, ge=1)
    out: Optional[Path] = None
    format: Literal["csv", "json"] = "csv"

    @field_validator("family", mode="before")
    @classmethod
    def _lower_family(cls, value: Any) -> Any:
        return value.lower().replace("-", "_") if isinstance(value, str) else value

    @field_validator("n", "m", "burn_in", "d", "workers", mode="before")
    @classmethod
    def _integral_text(cls, value: Any) -> Any:
        # accepts 1e6 style counts from config files
        if isinstance(value, str):
            try:
                number = float(value)
            except ValueError:
                return value
            if number.is_integer():
                return int(number)
        return value

    @model_validator(mode="after")
    def _check_model(self) -> ExperimentConfig:
        if self.model == "compound":
            if self.rho is None:
                raise ValueError("compound experiments need rho")
            if self.family is not LawFamily.WEIBULL:
                raise ValueError("compound experiments use family=weibull")
        elif self.family not in (LawFamily.WEIBULL, LawFamily.PARETO):
            raise ValueError("fixed-length experiments use family=weibull or family=pareto")
        if self.baseline is None:
            for candidate in (Method.AK, Method.COMPOUND_AK):
                if candidate in self.methods:
                    self.baseline = candidate
                    break
        return self

    def law(self) -> JumpLaw:
        if self.family is LawFamily.PARETO:
            return JumpLaw.pareto(self.alpha)
        return JumpLaw.weibull(self.alpha)

    def models(self) -> list[RareEventModel]:
        if self.model == "compound":
            return [RareEventModel.compound(self.law(), self.rho, gamma) for gamma in self.gammas]
        return [RareEventModel.fixed_sum(self.law(), self.d, gamma) for gamma in self.gammas]

    def method_errors(self) -> list[str]:
        """Every method/model mismatch, so they can be reported together."""
        try:
            model = self.models()[0]
        except DomainError as exc:
            return [str(exc)]
        errors: list[str] = []
        for method in self.methods:
            errors.extend(method_problems(model, method))
        if self.baseline is not None and self.baseline not in self.methods:
            errors.append(f"baseline {self.baseline.value} is not among the methods")
        return errors


def normalize_key(key: str) -> str:
    key = key.strip().lower()
    key = KEY_ALIASES.get(key, key)
    return key.replace("-", "_")


def parse_config_text(text: str) -> tuple[dict[str, Any], dict[str, int]]:
    """Parse key=value lines. Returns (values, key -> line number)."""
    values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    known = set(ExperimentConfig.model_fields)
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected key=value", number)
        key, value = (part.strip() for part in line.split("=", 1))
        key = normalize_key(key)
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", number)
        if key in lines:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", number)
        if key in LIST_FIELDS:
            values[key] = [item.strip() for item in value.split(",") if item.strip()]
        else:
            values[key] = value
        lines[key] = number
    return values, lines


def load_config_file(path: Path) -> tuple[dict[str, Any], dict[str, int]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values, lines = parse_config_text(text)
    logger.debug("Loaded %d keys from %s", len(values), path)
    return values, lines


def build_config(
    file_values: Optional[dict[str, Any]] = None,
    overrides: Optional[dict[str, Any]] = None,
    lines: Optional[dict[str, int]] = None,
) -> ExperimentConfig:
    """Merge file values with command-line overrides (overrides win) and validate."""
    merged: dict[str, Any] = dict(file_values or {})
    merged.update({key: value for key, value in (overrides or {}).items() if value is not None})
    lines = lines or {}
    overridden = {key for key, value in (overrides or {}).items() if value is not None}
    try:
        config = ExperimentConfig(**merged)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = str(first["loc"][0]) if first["loc"] else ""
        line = lines.get(field) if field not in overridden else None
        message = f"{field}: {first['msg']}" if field else first["msg"]
        raise ConfigError(message, line) from exc
    errors = config.method_errors()
    if errors:
        raise ConfigError("; ".join(errors), lines.get("methods") if "methods" not in overridden else None)
    return config


__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "build_config",
    "load_config_file",
    "normalize_key",
    "parse_config_text",
]
