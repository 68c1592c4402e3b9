"""
Run Configuration
-----------------
Pydantic models for one experiment run: the numeric knobs shared by every
subcommand and the RunConfig that the CLI builds from its flags, stores in
the manifest and can reload from YAML or from a previous manifest.
"""
import json
from pathlib import Path
from typing import Any, Dict, Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic import ValidationError as PydanticValidationError

from .exceptions import SystemFileError, ValidationError

Subcommand = Literal["model", "propagate", "transitions", "synthesize", "cost-sweep", "convergence"]


class NumericSettings(BaseModel):
    """Tolerances and resolutions; defaults are the values used throughout the test suite."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    gap_tol: float = Field(1e-9, gt=0, description="relative tolerance for gap equality")
    steps_per_period: int = Field(64, ge=2, description="discretization of smooth pulses")
    scan_points: int = Field(401, ge=200, description="T*_n scan points per window")
    oracle_steps: int = Field(1024, ge=2, description="oracle resolution for convergence")
    min_n: int = Field(16, ge=1, description="first n of the C1 sweep ladder")
    max_n: int = Field(64, ge=1, description="last n of the C1 sweep ladder")
    norm_tol: float = Field(1e-9, gt=0, description="unitarity / norm preservation")
    bound_tol: float = Field(1e-6, gt=0, description="two-level bound slack")

    @model_validator(mode="after")
    def _check_ladder(self) -> "NumericSettings":
        if self.min_n > self.max_n:
            raise ValueError(f"min_n ({self.min_n}) exceeds max_n ({self.max_n})")
        return self


class RunConfig(BaseModel):
    """Everything needed to re-run one subcommand exactly."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    subcommand: Subcommand
    system: str = "molecule:10"
    output_dir: str = "results"
    seed: int = 42
    numerics: NumericSettings = Field(default_factory=NumericSettings)
    params: Dict[str, Any] = Field(default_factory=dict)

    def to_canonical(self) -> str:
        """Sorted-key JSON; from_canonical(to_canonical()) == self."""
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_canonical(cls, text: str) -> "RunConfig":
        return build_config(json.loads(text))

    def with_params(self, **params: Any) -> "RunConfig":
        merged = dict(self.params)
        merged.update(params)
        return self.model_copy(update={"params": merged})


def build_config(raw: Any) -> RunConfig:
    """Validate a mapping into a RunConfig, raising ValidationError."""
    try:
        return RunConfig.model_validate(raw)
    except PydanticValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "config"
        raise ValidationError(f"invalid run config at {where}: {first['msg']}") from e


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """
    Load a RunConfig from a YAML file or a manifest.json written by a previous run.

    Args:
        path: .yaml/.yml config, or a manifest with a 'config' entry
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise SystemFileError(
            str(getattr(e, "problem", e)), path=str(path),
            line=mark.line + 1 if mark else None, column=mark.column + 1 if mark else None,
        ) from e
    if not isinstance(raw, dict):
        raise SystemFileError("run config must be a mapping", path=str(path), line=1)
    if "config" in raw and "subcommand" not in raw:
        raw = raw["config"]
    return build_config(raw)
