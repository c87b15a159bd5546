from __future__ import annotations

import os
from collections.abc import Mapping
from pathlib import Path
from typing import Any

from pydantic import Field, model_validator
from pydantic.fields import FieldInfo
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from stgraphrl.autodiff.optim import AdamSettings
from stgraphrl.loss.balanced import DBLossConfig
from stgraphrl.model.params import ModelDims

CONFIG_PATH_VARIABLE = "STGRAPHRL_CONFIG"


class ConfigFileError(ValueError):
    def __init__(self, message: str, *, path: Path, line_number: int | None = None) -> None:
        location = f"{path}:{line_number}" if line_number is not None else str(path)
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line_number = line_number


class TrainConfig(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="STGRAPHRL_",
        env_file=None,
        extra="forbid",
        frozen=True,
    )

    seed: int = Field(default=0, ge=0)
    learning_rate: float = Field(default=1e-3, gt=0)
    batch_size: int = Field(default=32, ge=1)
    max_epochs: int = Field(default=200, ge=1)
    patience: int = Field(default=20, ge=1)
    split_ratio: float = Field(default=0.8, gt=0, lt=1)
    validation_ratio: float = Field(default=0.1, ge=0, lt=1)

    num_categories: int = Field(default=10, ge=1)
    num_bins: int = Field(default=48, ge=1)
    node_dim: int = Field(default=64, ge=1)
    embedding_dim: int = Field(default=24, ge=1)
    attention_hidden: int = Field(default=16, ge=1)
    decoder_dim: int = Field(default=128, ge=1)
    attention_heads: int = Field(default=4, ge=1)
    fusion_layers: int = Field(default=3, ge=1)

    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)

    db_lambda: float = Field(default=2.0, gt=0)
    db_kappa: float = Field(default=0.05, ge=0)
    rebalance_alpha: float = Field(default=0.1, ge=0)
    rebalance_beta: float = Field(default=10.0, ge=0)
    rebalance_mu: float = 0.3

    @model_validator(mode="after")
    def _validate_config(self) -> TrainConfig:
        if self.node_dim % self.attention_heads:
            raise ValueError("node_dim must be divisible by attention_heads")
        return self

    @property
    def dims(self) -> ModelDims:
        return ModelDims(
            num_categories=self.num_categories,
            num_bins=self.num_bins,
            node_dim=self.node_dim,
            embedding_dim=self.embedding_dim,
            attention_hidden=self.attention_hidden,
            decoder_dim=self.decoder_dim,
            attention_heads=self.attention_heads,
            fusion_layers=self.fusion_layers,
        )

    @property
    def loss(self) -> DBLossConfig:
        return DBLossConfig(
            negative_scale=self.db_lambda,
            class_bias_scale=self.db_kappa,
            rebalance_alpha=self.rebalance_alpha,
            rebalance_beta=self.rebalance_beta,
            rebalance_mu=self.rebalance_mu,
        )

    @property
    def adam(self) -> AdamSettings:
        return AdamSettings(
            learning_rate=self.learning_rate,
            beta1=self.adam_beta1,
            beta2=self.adam_beta2,
            eps=self.adam_eps,
        )

    def resolved(self) -> list[str]:
        return [f"{name} = {value}" for name, value in self.model_dump().items()]


def read_config_file(path: Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as error:
        raise ConfigFileError(f"cannot read config file: {error.strerror}", path=path) from error

    known = TrainConfig.model_fields.keys()
    values: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, separator, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not separator or not key or not value:
            raise ConfigFileError("expected 'key = value'", path=path, line_number=number)
        if key not in known:
            raise ConfigFileError(f"unknown key {key!r}", path=path, line_number=number)
        if key in values:
            raise ConfigFileError(f"duplicate key {key!r}", path=path, line_number=number)
        values[key] = value
    return values


class _MappingSource(PydanticBaseSettingsSource):
    def __init__(self, settings_cls: type[BaseSettings], values: Mapping[str, str]) -> None:
        super().__init__(settings_cls)
        self._values = dict(values)

    def get_field_value(self, field: FieldInfo, field_name: str) -> tuple[Any, str, bool]:
        return self._values.get(field_name), field_name, False

    def __call__(self) -> dict[str, Any]:
        return dict(self._values)


def load_train_config(
    path: Path | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> TrainConfig:
    """Resolve overrides, then ``STGRAPHRL_*`` variables, then the config file, then defaults."""
    config_path = path
    if config_path is None and os.environ.get(CONFIG_PATH_VARIABLE):
        config_path = Path(os.environ[CONFIG_PATH_VARIABLE])
    file_values = read_config_file(config_path) if config_path is not None else {}

    class _LayeredTrainConfig(TrainConfig):
        @classmethod
        def settings_customise_sources(
            cls,
            settings_cls: type[BaseSettings],
            init_settings: PydanticBaseSettingsSource,
            env_settings: PydanticBaseSettingsSource,
            dotenv_settings: PydanticBaseSettingsSource,
            file_secret_settings: PydanticBaseSettingsSource,
        ) -> tuple[PydanticBaseSettingsSource, ...]:
            return (init_settings, env_settings, _MappingSource(settings_cls, file_values))

    layered = _LayeredTrainConfig(**dict(overrides or {}))
    return TrainConfig.model_validate(layered.model_dump())
