"""EA hyperparameters and the flat ``key = value`` config file loader.

Config files are parsed with python-dotenv, so comments, quoting and blank
lines behave like a ``.env`` file. Keys are ``EAConfig`` field names.
"""
import dataclasses
import logging
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

from dotenv import dotenv_values

from src.circuit import DEFAULT_GATESET, validate_gateset
from src.errors import ConfigurationError

logger = logging.getLogger(__name__)


class InitMode(str, Enum):
    SCRATCH = "scratch"
    TARGET = "target"


class Variant(str, Enum):
    HYBRID = "hybrid"
    EA_ONLY = "ea_only"
    NO_EA_OPS = "no_ea_ops"
    RANDOM_BASELINE = "random_baseline"


# command line spellings
VARIANT_ALIASES = {
    "hybrid": Variant.HYBRID,
    "ea": Variant.EA_ONLY,
    "ea_only": Variant.EA_ONLY,
    "no-ea-ops": Variant.NO_EA_OPS,
    "no_ea_ops": Variant.NO_EA_OPS,
    "random": Variant.RANDOM_BASELINE,
    "random_baseline": Variant.RANDOM_BASELINE,
}

MUTATION_KIND_COUNT = 8


def parse_variant(name: str) -> Variant:
    try:
        return VARIANT_ALIASES[str(name).strip().lower()]
    except KeyError:
        raise ConfigurationError(
            f"Unknown variant {name!r}; expected one of {sorted(VARIANT_ALIASES)}"
        ) from None


def parse_mode(name: str) -> InitMode:
    try:
        return InitMode(str(name).strip().lower())
    except ValueError:
        raise ConfigurationError(f"Unknown init mode {name!r}; expected scratch or target") from None


@dataclass
class EAConfig:
    population_size: int = 200
    generations: int = 1000
    crossover_rate: float = 0.85
    mutation_rate: float = 0.85
    offspring_rate: float = 0.3
    replace_rate: float = 0.3
    gateset: Tuple[str, ...] = DEFAULT_GATESET
    max_optimizer_iterations: int = 1000
    alpha: float = 10.0
    beta: float = 1.0
    param_opt_interval: int = 25
    param_opt_fraction: float = 0.1
    init_mode: InitMode = InitMode.SCRATCH
    variant: Variant = Variant.HYBRID
    compaction_enabled: bool = True
    seed: int = 0
    # 0 means "use the target depth"
    init_depth_low: int = 2
    init_depth_high: int = 0
    # empty means uniform over the eight kinds
    mutation_weights: Tuple[float, ...] = field(default_factory=tuple)
    # COBYLA initial and final trust-region radius, in radians
    optimizer_rhobeg: float = 0.5
    optimizer_rhoend: float = 1e-6
    # an individual with 1 - F at or below this is not optimized further
    optimizer_ftol: float = 1e-6
    check_invariants: bool = True
    show_progress: bool = False

    @property
    def offspring_count(self) -> int:
        return int(round(self.offspring_rate * self.population_size))

    @property
    def replace_count(self) -> int:
        return int(round(self.replace_rate * self.population_size))

    @property
    def param_opt_count(self) -> int:
        return int(math.ceil(self.param_opt_fraction * self.population_size - 1e-9))

    @property
    def uses_param_opt(self) -> bool:
        return self.variant in (Variant.HYBRID, Variant.NO_EA_OPS)

    @property
    def uses_compaction(self) -> bool:
        # the random baseline gets no modification of any kind
        return self.compaction_enabled and self.variant is not Variant.RANDOM_BASELINE

    def init_depth_range(self, target_depth: int) -> Tuple[int, int]:
        high = self.init_depth_high or target_depth
        return self.init_depth_low, high

    def validate(self) -> "EAConfig":
        for name in ("crossover_rate", "mutation_rate", "offspring_rate", "replace_rate",
                     "param_opt_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"{name} must be in [0, 1], got {value}")
        if self.population_size < 2:
            raise ConfigurationError("population_size must be >= 2")
        if self.generations < 0:
            raise ConfigurationError("generations must be >= 0")
        if self.alpha <= 0 or self.beta <= 0:
            raise ConfigurationError("alpha and beta must be > 0")
        if self.replace_count > self.offspring_count:
            raise ConfigurationError(
                f"replace count {self.replace_count} exceeds offspring count {self.offspring_count}"
            )
        if self.replace_count >= self.population_size:
            raise ConfigurationError("replace_rate must leave at least one survivor")
        if self.max_optimizer_iterations < 1:
            raise ConfigurationError("max_optimizer_iterations must be >= 1")
        if self.param_opt_interval < 1:
            raise ConfigurationError("param_opt_interval must be >= 1")
        if self.init_depth_low < 1 or (self.init_depth_high and self.init_depth_high < self.init_depth_low):
            raise ConfigurationError(
                f"Invalid initial depth range [{self.init_depth_low}, {self.init_depth_high}]"
            )
        if self.mutation_weights:
            if len(self.mutation_weights) != MUTATION_KIND_COUNT:
                raise ConfigurationError(
                    f"mutation_weights needs {MUTATION_KIND_COUNT} entries, got {len(self.mutation_weights)}"
                )
            if any(w < 0 for w in self.mutation_weights) or sum(self.mutation_weights) <= 0:
                raise ConfigurationError("mutation_weights must be non-negative with a positive sum")
        if not 0 < self.optimizer_rhoend <= self.optimizer_rhobeg:
            raise ConfigurationError("optimizer radii must satisfy 0 < optimizer_rhoend <= optimizer_rhobeg")
        if self.optimizer_ftol < 0:
            raise ConfigurationError("optimizer_ftol must be >= 0")
        self.gateset = validate_gateset(self.gateset)
        return self

    def to_dict(self) -> Dict:
        out = dataclasses.asdict(self)
        out["init_mode"] = self.init_mode.value
        out["variant"] = self.variant.value
        out["gateset"] = list(self.gateset)
        out["mutation_weights"] = list(self.mutation_weights)
        return out


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(name: str, raw, current):
    if raw is None:
        raise ConfigurationError(f"{name} has no value")
    if isinstance(current, Enum):
        return parse_variant(raw) if isinstance(current, Variant) else parse_mode(raw)
    if isinstance(current, bool):
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in _TRUE:
            return True
        if text in _FALSE:
            return False
        raise ConfigurationError(f"{name} expects a boolean, got {raw!r}")
    if isinstance(current, tuple):
        if isinstance(raw, (list, tuple)):
            items = list(raw)
        else:
            items = [s.strip() for s in str(raw).strip("[]").split(",") if s.strip()]
        if name == "mutation_weights":
            try:
                return tuple(float(s) for s in items)
            except ValueError:
                raise ConfigurationError(f"{name} expects numbers, got {raw!r}") from None
        return tuple(str(s).strip().strip("'\"").upper() for s in items)
    try:
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
    except ValueError:
        raise ConfigurationError(f"{name} expects {type(current).__name__}, got {raw!r}") from None
    return raw


def apply_overrides(cfg: EAConfig, overrides: Dict) -> EAConfig:
    """Return a copy of ``cfg`` with the given field values (strings are coerced)."""
    known = {f.name for f in dataclasses.fields(EAConfig)}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise ConfigurationError(f"Unknown config keys: {unknown}")
    values = {
        name: _coerce(name, raw, getattr(cfg, name))
        for name, raw in overrides.items()
    }
    return dataclasses.replace(cfg, **values)


def load_config(path: Optional[str], overrides: Optional[Dict] = None) -> EAConfig:
    """Defaults, then the config file at ``path``, then ``overrides``."""
    cfg = EAConfig()
    if path:
        if not os.path.isfile(path):
            raise ConfigurationError(f"Config file not found: {path}")
        file_values = {k.strip().lower(): v for k, v in dotenv_values(path).items()}
        logger.info(f"Loaded {len(file_values)} config values from {path}")
        cfg = apply_overrides(cfg, file_values)
    if overrides:
        cfg = apply_overrides(cfg, {k: v for k, v in overrides.items() if v is not None})
    return cfg.validate()
