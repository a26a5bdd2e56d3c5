"""Explanation-driven data augmentation for image classifiers.

Train-time augmentation that occludes the regions a model's own saliency
maps point at and, when the prediction survives, feeds the occluded
image back into training; plus the faithfulness metrics, baselines and
tooling needed to measure the effect.
"""

from .augmentation import (
    MASKED_BACKGROUND_LABEL,
    MASKED_ORIGINAL_LABEL,
    MASKED_SINGLE_LABEL,
    ORIGINAL,
    AugmentationConfig,
    AugmentedExample,
    edda_mc_batch,
    edda_ml_batch,
)
from .baselines import cutmix_batch, mixup_batch
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ModelConfig, RunPlan, build_model, load_config, write_config
from .datasets import (
    Dataset,
    DatasetSpec,
    GroundTruthRegion,
    export_archive,
    generate_synthetic,
    load_archive,
    load_dataset,
    parse_spec,
    split_dataset,
)
from .errors import (
    ConfigurationError,
    EddaError,
    FormatError,
    GenerationError,
    ShapeMismatchError,
)
from .explainers import (
    ExplainerSpec,
    explain,
    explain_batch,
    gradcam_map,
    vanilla_saliency_map,
)
from .kernels import backend_name, set_backend
from .metrics import (
    FaithfulnessReport,
    compare_runs,
    evaluate_faithfulness,
    read_reports,
    write_reports,
)
from .model import ConvNet, LinearModel, Model, class_score_gradient, predict
from .occlusion import keep_top_fraction, occlude_salient
from .trainer import EpochRecord, TrainConfig, train
from .types import MULTICLASS, MULTILABEL, Target, validate_image, validate_saliency

__version__ = "0.1.0"

__all__ = [
    "AugmentationConfig",
    "AugmentedExample",
    "ConfigurationError",
    "ConvNet",
    "Dataset",
    "DatasetSpec",
    "EddaError",
    "EpochRecord",
    "ExplainerSpec",
    "FaithfulnessReport",
    "FormatError",
    "GenerationError",
    "GroundTruthRegion",
    "LinearModel",
    "MASKED_BACKGROUND_LABEL",
    "MASKED_ORIGINAL_LABEL",
    "MASKED_SINGLE_LABEL",
    "MULTICLASS",
    "MULTILABEL",
    "Model",
    "ModelConfig",
    "ORIGINAL",
    "RunPlan",
    "ShapeMismatchError",
    "Target",
    "TrainConfig",
    "backend_name",
    "build_model",
    "class_score_gradient",
    "compare_runs",
    "cutmix_batch",
    "edda_mc_batch",
    "edda_ml_batch",
    "evaluate_faithfulness",
    "explain",
    "explain_batch",
    "export_archive",
    "generate_synthetic",
    "gradcam_map",
    "keep_top_fraction",
    "load_archive",
    "load_checkpoint",
    "load_config",
    "load_dataset",
    "mixup_batch",
    "occlude_salient",
    "parse_spec",
    "predict",
    "read_reports",
    "save_checkpoint",
    "set_backend",
    "split_dataset",
    "train",
    "validate_image",
    "validate_saliency",
    "vanilla_saliency_map",
    "write_config",
    "write_reports",
]
