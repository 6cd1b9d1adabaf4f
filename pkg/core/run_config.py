# core/run_config.py
from pydantic import Field, ValidationError, model_validator
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Type
import logging
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from core.exceptions import ConfigError
from models.parameters import ParameterGrid, ParameterPoint
from models.pml import PmlConfig
from models.run_spec import BoundarySpec, ExactSpec, GreedySettings, MeshSpec, OutputSpec, SourceSpec

logger = logging.getLogger(__name__)


class RunConfig(BaseSettings):
    """
    Run configuration of the batch front-end. Canonical source is a TOML file
    (see examples/ in README); environment variables CRBM_<SECTION>__<KEY>
    override file values.
    """
    problem: Literal["bounded", "pml"] = "bounded"
    mesh: MeshSpec
    grid: ParameterGrid
    greedy: GreedySettings = Field(default_factory=GreedySettings)
    pml: Optional[PmlConfig] = None
    source: SourceSpec = Field(default_factory=SourceSpec)
    boundary: BoundarySpec = Field(default_factory=BoundarySpec)
    exact: ExactSpec = Field(default_factory=ExactSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)
    validation: List[ParameterPoint] = Field(default_factory=list, description="Parameters of validate runs.")
    queries: List[ParameterPoint] = Field(default_factory=list, description="Default online query list.")
    output_dir: str = "results"
    write_fields: bool = Field(False, description="Write field_<k>_<M>.csv and .vtk per online query.")
    write_timings: bool = Field(True, description="Keep the wall-clock columns of trace.csv and online.csv.")

    model_config = SettingsConfigDict(
        env_prefix="CRBM_",
        env_nested_delimiter="__",
        extra="forbid",
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        # .env belongs to the process settings; run configs come from TOML + env only
        return (init_settings, env_settings, TomlConfigSettingsSource(settings_cls))

    @model_validator(mode="after")
    def _check_problem(self):
        if self.problem == "pml":
            if self.pml is None:
                raise ValueError("problem 'pml' needs a [pml] section")
            if self.pml.omega is None:
                omega = math.sqrt(self.grid.k_min * self.grid.k_max)
                self.pml = self.pml.model_copy(update={"omega": omega})
        return self


def load_run_config(path: str | Path) -> RunConfig:
    """
    Loads and validates a TOML run configuration.

    Args:
        path: Path of the TOML file. A relative mesh file path is resolved
            against the directory of the configuration file.

    Raises:
        ConfigError: If the file is missing, is not valid TOML, or violates
            a RunConfig invariant.

    Returns:
        The validated RunConfig.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Configuration file not found: {path}")

    class _FileRunConfig(RunConfig):
        model_config = SettingsConfigDict(toml_file=path)

    try:
        cfg = _FileRunConfig()
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Configuration file {path} is not valid TOML: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration in {path}:\n{e}") from e

    if cfg.mesh.file is not None and not Path(cfg.mesh.file).is_absolute():
        resolved = (path.parent / cfg.mesh.file).resolve()
        cfg.mesh = cfg.mesh.model_copy(update={"file": str(resolved)})
    logger.info(f"Loaded run configuration from {path} (problem={cfg.problem})")
    return cfg
