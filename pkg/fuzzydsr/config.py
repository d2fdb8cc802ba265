import tomllib
from enum import StrEnum
from functools import lru_cache
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from fuzzydsr.services.constraints import ConstraintConfig, SearchMode
from fuzzydsr.services.fuzzy_ops import Semantics
from fuzzydsr.services.metrics import RewardKind
from fuzzydsr.services.synthetic import DEFAULT_FRAUD_RATE, DEFAULT_LABEL_NOISE
from fuzzydsr.services.tokens import LibraryMode


class ConfigError(ValueError):
    pass


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="FUZZYDSR_",
        env_file=".env",
        extra="ignore",
        populate_by_name=True,
    )

    log_level: str = "INFO"
    max_workers: int = Field(default=1, ge=1)

    @property
    def log_level_name(self) -> str:
        return self.log_level.strip().upper()


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()


class Method(StrEnum):
    GOEDEL = "goedel"
    PRODUCT = "product"
    LUKASIEWICZ = "lukasiewicz"
    COMBINED = "combined"

    @property
    def library(self) -> tuple[LibraryMode, Semantics | None]:
        return METHOD_LIBRARIES[self]


METHOD_LIBRARIES: dict[Method, tuple[LibraryMode, Semantics | None]] = {
    Method.GOEDEL: (LibraryMode.SINGLE, Semantics.GOEDEL),
    Method.PRODUCT: (LibraryMode.SINGLE, Semantics.PRODUCT),
    Method.LUKASIEWICZ: (LibraryMode.SINGLE, Semantics.LUKASIEWICZ),
    Method.COMBINED: (LibraryMode.COMBINED, None),
}


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    batch_size: int = Field(default=500, gt=0)
    n_samples: int = Field(default=200_000, gt=0)
    epsilon: float = Field(default=0.05, gt=0.0, lt=1.0)
    learning_rate: float = Field(default=5e-4, gt=0.0)
    entropy_weight: float = Field(default=5e-3, ge=0.0)
    sigmoid_threshold: float = Field(default=0.5, gt=0.0, lt=1.0)
    reward_kind: RewardKind = RewardKind.F1
    mode: SearchMode = SearchMode.UNCONSTRAINED
    library_mode: LibraryMode = LibraryMode.SINGLE
    semantics: Semantics | None = Semantics.LUKASIEWICZ
    seed: int = 0

    hidden_size: int = Field(default=32, gt=0)
    embedding_size: int = Field(default=16, gt=0)
    max_length: int = Field(default=32, gt=0)
    min_length: int = Field(default=4, gt=0)
    hall_of_fame_size: int = Field(default=20, gt=0)
    reward_workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_consistency(self) -> "TrainConfig":
        if self.n_samples < self.batch_size:
            raise ValueError(f"n_samples ({self.n_samples}) must be at least batch_size ({self.batch_size})")
        if self.epsilon * self.batch_size < 1:
            raise ValueError("epsilon * batch_size must be at least 1 so one sample survives the filter")
        if (self.library_mode is LibraryMode.SINGLE) != (self.semantics is not None):
            raise ValueError("semantics is required for a single library and forbidden for a combined one")
        if self.min_length > self.max_length:
            raise ValueError("min_length must not exceed max_length")
        if self.mode is SearchMode.CONSTRAINED and self.max_length < 3:
            raise ValueError("constrained search needs max_length >= 3")
        return self

    @property
    def method(self) -> Method:
        for method, library in METHOD_LIBRARIES.items():
            if library == (self.library_mode, self.semantics):
                return method
        raise ConfigError(f"No method for {self.library_mode}/{self.semantics}")

    @property
    def n_batches(self) -> int:
        return -(-self.n_samples // self.batch_size)

    def constraints(self) -> ConstraintConfig:
        return ConstraintConfig(
            max_length=self.max_length,
            min_length=self.min_length,
            root_implication=self.mode is SearchMode.CONSTRAINED,
        )


class SyntheticSpec(BaseModel):
    n_rows: int = Field(default=10_000, gt=0)
    fraud_rate: float = Field(default=DEFAULT_FRAUD_RATE, gt=0.0, lt=1.0)
    seed: int = 0
    planted_rule: str | None = None
    label_noise: float = Field(default=DEFAULT_LABEL_NOISE, ge=0.0, lt=1.0)


TRAIN_FIELDS = tuple(name for name in TrainConfig.model_fields if name not in {"library_mode", "semantics", "seed"})


class RunConfig(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="FUZZYDSR_",
        env_file=".env",
        extra="ignore",
        populate_by_name=True,
    )

    csv_path: Path | None = None
    synthetic: SyntheticSpec | None = None
    split_ratio: float = Field(default=0.7, gt=0.0, lt=1.0)
    split_seed: int = 0
    noise_level: float = Field(default=0.05, ge=0.0)
    noise_seed: int = 0
    terminals: list[str] | None = None

    output_dir: Path = Path("runs")
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    methods: list[Method] = Field(default_factory=lambda: [Method.LUKASIEWICZ], min_length=1)

    batch_size: int = 500
    n_samples: int = 200_000
    epsilon: float = 0.05
    learning_rate: float = 5e-4
    entropy_weight: float = 5e-3
    sigmoid_threshold: float = 0.5
    reward_kind: RewardKind = RewardKind.F1
    mode: SearchMode = SearchMode.UNCONSTRAINED
    hidden_size: int = 32
    embedding_size: int = 16
    max_length: int = 32
    min_length: int = 4
    hall_of_fame_size: int = 20
    reward_workers: int = 1

    @model_validator(mode="after")
    def _one_source(self) -> "RunConfig":
        if (self.csv_path is None) == (self.synthetic is None):
            raise ValueError("Configure exactly one data source: csv_path or [synthetic]")
        return self

    @property
    def source_label(self) -> str:
        if self.csv_path is not None:
            return str(self.csv_path)
        return f"synthetic(n_rows={self.synthetic.n_rows}, seed={self.synthetic.seed})"

    def train_config(self, method: Method, seed: int) -> TrainConfig:
        library_mode, semantics = method.library
        values = {name: getattr(self, name) for name in TRAIN_FIELDS}
        try:
            return TrainConfig(library_mode=library_mode, semantics=semantics, seed=seed, **values)
        except ValidationError as exc:
            raise ConfigError(f"Invalid training settings: {_first_error(exc)}") from exc


def _first_error(exc: ValidationError) -> str:
    error = exc.errors()[0]
    location = ".".join(str(part) for part in error.get("loc", ())) or "config"
    return f"{location}: {error.get('msg', 'invalid value')}"


def load_run_config(path: Path | str | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Merge a TOML file with flag overrides; unset overrides (None) fall through to the file, env, then defaults."""
    values: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        try:
            values = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"Config file {path} is not valid TOML: {exc}") from exc
        # Relative data paths resolve against the config file's folder.
        if "csv_path" in values and not Path(values["csv_path"]).is_absolute():
            values["csv_path"] = str(path.parent / values["csv_path"])

    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value

    try:
        config = RunConfig(**values)
    except ValidationError as exc:
        raise ConfigError(f"Invalid run config: {_first_error(exc)}") from exc

    for method in config.methods:
        config.train_config(method, config.seeds[0])
    return config
