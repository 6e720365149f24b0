"""
Declarative experiment profiles.

A profile is one JSON file validated by pydantic; CLI flags override single
fields. The default output directory comes from TVGS_OUTPUT_DIR.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from TVGS.errors import InvalidParameterError
from TVGS.geo_graph import METRICS
from TVGS.ingest import Dataset, load_jhu_dataset, load_matrix_dataset, synthetic_smooth_dataset
from TVGS.tv_signal import MSE_SCOPES

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "TVGS_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "results"

# parameter grid shared by lambda and epsilon searches
PARAMETER_GRID = [1e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 1e2, 2e2, 5e2]
COVID_DENSITIES = [0.5, 0.6, 0.7, 0.8, 0.9, 0.995]
SENSOR_DENSITIES = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR)


class DatasetSpec(BaseModel):
    """Where the node coordinates and the signal come from"""
    kind: Literal["jhu", "matrix", "synthetic"] = "synthetic"
    path: Optional[str] = None
    layout: Literal["global", "usa"] = "global"
    start: Optional[str] = "2020-01-22"
    end: Optional[str] = "2020-04-06"
    clamp_negative: bool = True
    drop_zero_rows: bool = False
    coords_path: Optional[str] = None
    n_nodes: int = Field(default=200, ge=2)
    n_steps: int = Field(default=30, ge=2)
    n_modes: int = Field(default=5, ge=1)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_paths(self):
        if self.kind in ("jhu", "matrix") and not self.path:
            raise ValueError(f"dataset kind {self.kind!r} needs 'path'")
        if self.kind == "matrix" and not self.coords_path:
            raise ValueError("dataset kind 'matrix' needs 'coords_path'")
        return self

    def load(self, k: int = 10) -> Dataset:
        if self.kind == "jhu":
            return load_jhu_dataset(
                self.path, self.layout, self.start, self.end, self.clamp_negative, self.drop_zero_rows,
            )
        if self.kind == "matrix":
            return load_matrix_dataset(self.path, self.coords_path)
        return synthetic_smooth_dataset(
            n_nodes=self.n_nodes, n_steps=self.n_steps, k=k, n_modes=self.n_modes, seed=self.seed,
        )


class ExperimentConfig(BaseModel):
    name: str = "experiment"
    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    k: int = Field(default=10, ge=1)
    metric: str = "euclidean"
    lambda_grid: List[float] = Field(default_factory=lambda: list(PARAMETER_GRID))
    epsilon_grid: List[float] = Field(default_factory=lambda: list(PARAMETER_GRID))
    beta: float = 1.0
    densities: List[float] = Field(default_factory=lambda: list(COVID_DENSITIES))
    trials_search: int = Field(default=5, ge=1)
    trials_final: int = Field(default=100, ge=1)
    master_seed: int = Field(default=0, ge=0)
    mse_scope: str = "all"
    tol: float = Field(default=1e-7, gt=0.0)
    max_iters: Optional[int] = Field(default=None, ge=1)
    workers: int = Field(default=1, ge=1)
    include_baseline: bool = False
    output_dir: str = Field(default_factory=default_output_dir)

    @field_validator("lambda_grid")
    @classmethod
    def _check_lambda_grid(cls, grid: List[float]) -> List[float]:
        if not grid:
            raise ValueError("lambda_grid must not be empty")
        if any(v <= 0.0 for v in grid):
            raise ValueError("lambda_grid values must be positive")
        return grid

    @field_validator("epsilon_grid")
    @classmethod
    def _check_epsilon_grid(cls, grid: List[float]) -> List[float]:
        if not grid:
            raise ValueError("epsilon_grid must not be empty")
        if any(v < 0.0 for v in grid):
            raise ValueError("epsilon_grid values must be >= 0")
        return grid

    @field_validator("densities")
    @classmethod
    def _check_densities(cls, densities: List[float]) -> List[float]:
        if not densities:
            raise ValueError("densities must not be empty")
        if any(not 0.0 < d <= 1.0 for d in densities):
            raise ValueError("densities must lie in (0, 1]")
        return densities

    @field_validator("metric")
    @classmethod
    def _check_metric(cls, metric: str) -> str:
        if metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        return metric

    @field_validator("mse_scope")
    @classmethod
    def _check_scope(cls, scope: str) -> str:
        if scope not in MSE_SCOPES:
            raise ValueError(f"mse_scope must be one of {MSE_SCOPES}")
        return scope

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise InvalidParameterError(f"invalid experiment config: {e}") from e

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ExperimentConfig":
        """Loads a JSON profile; relative dataset paths resolve against the file's directory"""
        path = Path(path)
        if not path.exists():
            raise InvalidParameterError(f"config file {path} not found")
        with open(path, "r", encoding="utf-8") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise InvalidParameterError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e

        dataset = data.get("dataset", {})
        for key in ("path", "coords_path"):
            if dataset.get(key) and not Path(dataset[key]).is_absolute():
                dataset[key] = str(path.parent / dataset[key])
        config = cls.from_dict(data)
        logger.info("Loaded config %s from %s", config.name, path)
        return config

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """New config with every non-None override applied and re-validated"""
        updates = {key: value for key, value in overrides.items() if value is not None}
        if not updates:
            return self
        return self.from_dict({**self.model_dump(), **updates})

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)
