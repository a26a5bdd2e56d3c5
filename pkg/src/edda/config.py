"""Run configuration files: JSON with dataset / model / train sections.

Every field of DatasetSpec, TrainConfig, AugmentationConfig and
ExplainerSpec is addressable; unknown keys anywhere are rejected by
name so typos fail loudly instead of silently using defaults.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

from .augmentation import AugmentationConfig
from .datasets import Dataset, DatasetSpec
from .errors import ConfigurationError
from .explainers import ExplainerSpec
from .model import ConvNet, LinearModel, Model
from .trainer import TrainConfig

ARCHITECTURES = ("convnet", "linear")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture selection; background_enabled None means inferred
    (allocated exactly when strategy edda_mc runs with p > 0)."""

    architecture: str = "convnet"
    channels: tuple = (8, 16, 32)
    background_enabled: bool | None = None

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigurationError(f"unknown architecture {self.architecture!r}")


@dataclass(frozen=True)
class RunPlan:
    dataset: DatasetSpec
    model: ModelConfig
    train: TrainConfig


def _build_section(section: str, data: dict, cls, nested=None):
    if not isinstance(data, dict):
        raise ConfigurationError(f"config section {section!r} must be an object")
    allowed = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in allowed:
            raise ConfigurationError(f"unknown config key {section}.{key}")
        if nested and key in nested:
            value = _build_section(f"{section}.{key}", value, *nested[key])
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"bad {section} section: {exc}") from exc


def plan_from_dict(raw: dict) -> RunPlan:
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be an object")
    for key in raw:
        if key not in ("dataset", "model", "train"):
            raise ConfigurationError(f"unknown config key {key}")
    dataset = _build_section("dataset", raw.get("dataset", {}), DatasetSpec)
    model = _build_section("model", raw.get("model", {}), ModelConfig)
    train = _build_section(
        "train",
        raw.get("train", {}),
        TrainConfig,
        nested={
            "augmentation": (
                AugmentationConfig,
                {"explainer": (ExplainerSpec, None)},
            )
        },
    )
    return RunPlan(dataset=dataset, model=model, train=train)


def load_config(path: str) -> RunPlan:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid JSON: {exc}") from exc
    return plan_from_dict(raw)


def plan_to_dict(plan: RunPlan) -> dict:
    def clean(value):
        if isinstance(value, tuple):
            return [clean(v) for v in value]
        if isinstance(value, dict):
            return {k: clean(v) for k, v in value.items()}
        return value

    return {
        "dataset": clean(asdict(plan.dataset)),
        "model": clean(asdict(plan.model)),
        "train": clean(asdict(plan.train)),
    }


def write_config(plan: RunPlan, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan_to_dict(plan), fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_model(plan: RunPlan, dataset: Dataset) -> Model:
    """Construct the configured model sized for the dataset."""
    background = plan.model.background_enabled
    if background is None:
        background = plan.train.strategy == "edda_mc" and plan.train.augmentation.p > 0
    input_shape = (dataset.image_size, dataset.image_size, dataset.channels)
    if plan.model.architecture == "convnet":
        return ConvNet(
            input_shape,
            num_classes=dataset.num_classes,
            task=dataset.task,
            background_enabled=background,
            channels=plan.model.channels,
            seed=plan.train.seed,
        )
    return LinearModel(
        input_shape,
        num_classes=dataset.num_classes,
        task=dataset.task,
        background_enabled=background,
        seed=plan.train.seed,
    )
