"""Shared data model: image arrays, saliency arrays, and classification targets.

Images are float64 numpy arrays of shape (H, W, C) with values in [0, 1].
Saliency maps are float64 arrays of shape (H, W) normalized to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError

MULTICLASS = "multiclass"
MULTILABEL = "multilabel"
TASKS = (MULTICLASS, MULTILABEL)


def validate_image(image: np.ndarray) -> np.ndarray:
    """Check an (H, W, C) image in [0, 1] and return it as float64."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3:
        raise ShapeMismatchError(
            f"image must have shape (H, W, C), got shape {arr.shape}"
        )
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("image values must lie in [0, 1]")
    return arr


def validate_saliency(saliency: np.ndarray, image: np.ndarray | None = None) -> np.ndarray:
    """Check an (H, W) saliency map in [0, 1], optionally against an image's size."""
    arr = np.asarray(saliency, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeMismatchError(
            f"saliency map must have shape (H, W), got shape {arr.shape}"
        )
    if image is not None and arr.shape != image.shape[:2]:
        raise ShapeMismatchError(
            f"saliency shape {arr.shape} does not match image spatial size "
            f"{image.shape[:2]}"
        )
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("saliency values must lie in [0, 1]")
    return arr


@dataclass(eq=False)
class Target:
    """Classification target: a class index (multiclass) or a binary vector (multilabel)."""

    kind: str
    class_index: int | None = None
    label_vector: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def multiclass(cls, class_index: int) -> "Target":
        if class_index < 0:
            raise ValueError(f"class index must be non-negative, got {class_index}")
        return cls(kind=MULTICLASS, class_index=int(class_index))

    @classmethod
    def multilabel(cls, label_vector: np.ndarray) -> "Target":
        vec = np.asarray(label_vector)
        if vec.ndim != 1:
            raise ValueError("label vector must be one-dimensional")
        if not np.isin(vec, (0, 1)).all():
            raise ValueError("label vector entries must be 0 or 1")
        return cls(kind=MULTILABEL, label_vector=vec.astype(np.int8))

    def one_hot(self, num_outputs: int) -> np.ndarray:
        """Dense float vector of length num_outputs for loss computation."""
        out = np.zeros(num_outputs, dtype=np.float64)
        if self.kind == MULTICLASS:
            if not 0 <= self.class_index < num_outputs:
                raise ValueError(
                    f"class index {self.class_index} out of range for "
                    f"{num_outputs} outputs"
                )
            out[self.class_index] = 1.0
        else:
            k = len(self.label_vector)
            if k > num_outputs:
                raise ValueError("label vector longer than model output")
            out[:k] = self.label_vector
        return out

    def positive_classes(self) -> np.ndarray:
        if self.kind != MULTILABEL:
            raise ValueError("positive_classes is only defined for multilabel targets")
        return np.flatnonzero(self.label_vector == 1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Target):
            return NotImplemented
        if self.kind != other.kind:
            return False
        if self.kind == MULTICLASS:
            return self.class_index == other.class_index
        return np.array_equal(self.label_vector, other.label_vector)
