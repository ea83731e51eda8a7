# core/config.py - experiment configuration: JSON documents, validation and built-in presets
"""
Experiment documents are JSON::

    {
      "pairs": [{"name": "EMM", "first": <mixture>, "second": <mixture>}],
      "mixtures": [{"name": "GMM1", "mixture": <mixture>}],
      "sample_sizes": [10, 100, 1000, 10000],
      "repetitions": 100,
      "seed": 42,
      "quad_tol": 1e-10,
      "bounds": ["CELB", "CEUB", "CEALB", "CEAUB", "MEUB"]
    }

with ``<mixture> = {"family": "gaussian", "components": [{"weight": 0.5,
"mean": 0, "stddev": 1}, ...]}``. Parameter names per family are listed in
``FAMILY_FIELDS``.
"""
import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.envelope import Mixture
from core.errors import ArgumentError, ConfigError
from core.families import PARAMS_BY_FAMILY, FamilyTag
from core.utils import default_quad_tol

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-9

FAMILY_FIELDS = {
    FamilyTag.EXPONENTIAL: ("rate",),
    FamilyTag.RAYLEIGH: ("scale",),
    FamilyTag.GAUSSIAN: ("mean", "stddev"),
    FamilyTag.GAMMA: ("shape", "scale"),
}
PARAM_FIELDS = ("rate", "scale", "mean", "stddev", "shape")


class BoundName(str, Enum):
    CELB = "CELB"
    CEUB = "CEUB"
    CEALB = "CEALB"
    CEAUB = "CEAUB"
    MEUB = "MEUB"


class ComponentSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    weight: float = Field(gt=0.0, le=1.0)
    family: Optional[FamilyTag] = None
    rate: Optional[float] = Field(default=None, gt=0.0)
    scale: Optional[float] = Field(default=None, gt=0.0)
    mean: Optional[float] = None
    stddev: Optional[float] = Field(default=None, gt=0.0)
    shape: Optional[float] = Field(default=None, gt=0.0)

    def params_for(self, family):
        return PARAMS_BY_FAMILY[family](**{name: getattr(self, name) for name in FAMILY_FIELDS[family]})


class MixtureSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: FamilyTag
    components: List[ComponentSpec] = Field(min_length=1)

    @model_validator(mode="after")
    def check_components(self):
        wanted = FAMILY_FIELDS[self.family]
        for i, comp in enumerate(self.components):
            if comp.family is not None and comp.family is not self.family:
                raise ValueError(
                    f"components.{i}.family: {comp.family.value} component in a {self.family.value} mixture"
                )
            missing = [name for name in wanted if getattr(comp, name) is None]
            if missing:
                raise ValueError(f"components.{i}: {self.family.value} component needs {', '.join(missing)}")
            extra = [name for name in PARAM_FIELDS if name not in wanted and getattr(comp, name) is not None]
            if extra:
                raise ValueError(f"components.{i}: {', '.join(extra)} is not a {self.family.value} parameter")
        total = math.fsum(comp.weight for comp in self.components)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"components: weights sum to {total:.12g}, expected 1")
        return self

    def to_mixture(self):
        return Mixture.of([(c.weight, c.params_for(self.family)) for c in self.components], normalize=True)


class PairSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1)
    first: MixtureSpec
    second: MixtureSpec

    @model_validator(mode="after")
    def check_families(self):
        if self.first.family is not self.second.family:
            raise ValueError(
                f"second.family: {self.second.family.value} cannot be compared with {self.first.family.value}"
            )
        return self


class NamedMixtureSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1)
    mixture: MixtureSpec


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    pairs: List[PairSpec] = Field(default_factory=list)
    mixtures: List[NamedMixtureSpec] = Field(default_factory=list)
    sample_sizes: List[int] = Field(default_factory=lambda: [10, 100, 1000, 10000])
    repetitions: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    quad_tol: float = Field(default_factory=default_quad_tol, gt=0.0)
    bounds: List[BoundName] = Field(default_factory=lambda: list(BoundName))

    @field_validator("sample_sizes")
    @classmethod
    def check_sample_sizes(cls, sizes):
        if any(s < 1 for s in sizes):
            raise ValueError("sample sizes must be positive")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"sample sizes must be strictly increasing, got {sizes}")
        return sizes

    @model_validator(mode="after")
    def check_not_empty(self):
        if not self.pairs and not self.mixtures:
            raise ValueError("pairs: at least one pair (or one entropy mixture) is required")
        names = [p.name for p in self.pairs]
        if len(set(names)) != len(names):
            raise ValueError("pairs: pair names must be unique")
        return self


@dataclass(frozen=True)
class ExperimentConfig:
    pairs: Tuple[Tuple[str, Mixture, Mixture], ...]
    mixtures: Tuple[Tuple[str, Mixture], ...]
    sample_sizes: Tuple[int, ...]
    repetitions: int
    base_seed: int
    quad_tol: float
    bounds: Tuple[BoundName, ...]

    def entropy_targets(self):
        """Named mixtures for the entropy experiment; falls back to the distinct mixtures of the pairs."""
        if self.mixtures:
            return self.mixtures
        seen, out = set(), []
        for name, first, second in self.pairs:
            for suffix, mixture in (("first", first), ("second", second)):
                if mixture not in seen:
                    seen.add(mixture)
                    out.append((f"{name}.{suffix}", mixture))
        return tuple(out)

    def with_overrides(self, **changes):
        """Copy with CLI overrides applied (None values are ignored)."""
        data = {k: v for k, v in changes.items() if v is not None}
        if "sample_sizes" in data:
            data["sample_sizes"] = tuple(data["sample_sizes"])
        merged = {**self.__dict__, **data}
        return ExperimentConfig(**merged)


def _field_path(loc):
    return ".".join(str(part) for part in loc)


def _config_error(exc: ValidationError):
    first = exc.errors()[0]
    message = first["msg"].removeprefix("Value error, ")
    path = _field_path(first["loc"])
    if ": " in message and message.split(": ", 1)[0].replace(".", "").replace("_", "").isalnum():
        sub, message = message.split(": ", 1)
        path = f"{path}.{sub}" if path else sub
    return ConfigError(message, field=path or None)


def build_config(document):
    """Validate a decoded document (dict) into an ExperimentConfig."""
    try:
        spec = ExperimentSpec.model_validate(document)
    except ValidationError as exc:
        raise _config_error(exc) from exc
    try:
        pairs = tuple((p.name, p.first.to_mixture(), p.second.to_mixture()) for p in spec.pairs)
        mixtures = tuple((n.name, n.mixture.to_mixture()) for n in spec.mixtures)
    except ArgumentError as exc:
        raise ConfigError(str(exc)) from exc
    config = ExperimentConfig(
        pairs=pairs,
        mixtures=mixtures,
        sample_sizes=tuple(spec.sample_sizes),
        repetitions=spec.repetitions,
        base_seed=spec.seed,
        quad_tol=spec.quad_tol,
        bounds=tuple(spec.bounds),
    )
    logger.debug(f"config: {len(pairs)} pairs, {len(mixtures)} mixtures, sizes {config.sample_sizes}")
    return config


def parse_config(text):
    """Parse a JSON experiment document; every failure is a ConfigError naming the field."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(document, dict):
        raise ConfigError("the configuration document must be a JSON object")
    return build_config(document)


def load_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return parse_config(text)


# ----------------------------------------------------------------------------
# Presets
# ----------------------------------------------------------------------------

THIRD = 1.0 / 3.0


def _mix(family, rows, fields):
    return {
        "family": family,
        "components": [dict(zip(fields + ("weight",), row)) for row in rows],
    }


EMM1 = _mix("exponential", [(0.1, THIRD), (0.5, THIRD), (1.0, THIRD)], ("rate",))
EMM2 = _mix("exponential", [(2.0, 0.2), (10.0, 0.4), (20.0, 0.4)], ("rate",))
RMM1 = _mix("rayleigh", [(0.5, THIRD), (2.0, THIRD), (10.0, THIRD)], ("scale",))
RMM2 = _mix("rayleigh", [(5.0, 0.25), (60.0, 0.25), (100.0, 0.5)], ("scale",))
GMM1 = _mix("gaussian", [
    (-5.0, 1.0, 0.05), (-2.0, 0.5, 0.1), (5.0, 0.3, 0.2), (10.0, 0.5, 0.2),
    (15.0, 0.4, 0.05), (25.0, 0.5, 0.3), (30.0, 2.0, 0.1),
], ("mean", "stddev"))
GMM2 = _mix("gaussian", [
    (-16.0, 0.5, 0.1), (-12.0, 0.2, 0.1), (-8.0, 0.5, 0.1), (-4.0, 0.2, 0.1), (0.0, 0.5, 0.2),
    (4.0, 0.2, 0.1), (8.0, 0.5, 0.1), (12.0, 0.2, 0.1), (16.0, 0.5, 0.1),
], ("mean", "stddev"))
GAMM1 = _mix("gamma", [(2.0, 0.5, THIRD), (2.0, 2.0, THIRD), (2.0, 4.0, THIRD)], ("shape", "scale"))
GAMM2 = _mix("gamma", [(4.0, 5.0, THIRD), (4.0, 8.0, THIRD), (4.0, 10.0, THIRD)], ("shape", "scale"))

PRESETS = {
    "paper-s4": {
        "pairs": [
            {"name": "EMM", "first": EMM1, "second": EMM2},
            {"name": "RMM", "first": RMM1, "second": RMM2},
            {"name": "GMM", "first": GMM1, "second": GMM2},
            {"name": "GaMM", "first": GAMM1, "second": GAMM2},
        ],
    },
    "entropy-gmm": {
        "mixtures": [
            {"name": "GMM1", "mixture": GMM1},
            {"name": "GMM2", "mixture": GMM2},
            {"name": "bimodal", "mixture": _mix("gaussian", [(-1.0, 1.0, 0.5), (1.0, 1.0, 0.5)], ("mean", "stddev"))},
            {"name": "skewed", "mixture": _mix(
                "gaussian", [(0.0, 1.0, 0.6), (2.0, 0.5, 0.3), (5.0, 2.0, 0.1)], ("mean", "stddev"))},
            {"name": "merged", "mixture": _mix(
                "gaussian", [(-0.1, 1.0, THIRD), (0.0, 1.0, THIRD), (0.1, 1.0, THIRD)], ("mean", "stddev"))},
            {"name": "near-dirac", "mixture": _mix(
                "gaussian", [(-1.0, 1e-3, 0.5), (1.0, 1e-3, 0.5)], ("mean", "stddev"))},
        ],
    },
}

PRESET_ALIASES = {"four-families": "paper-s4"}


def preset(name):
    try:
        document = PRESETS[PRESET_ALIASES.get(name, name)]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}", field="preset")
    return build_config(json.loads(json.dumps(document)))
