"""Datasets: synthetic shapes-on-noise generation, archive I/O, splits.

The synthetic sets exist because explanation quality needs a known
ground truth: each image is low-amplitude uniform noise plus one or more
bright filled shapes, and the shape masks ship with the dataset so tests
can measure whether saliency actually lands on the evidence.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, FormatError, GenerationError
from .types import MULTICLASS, MULTILABEL, Target

SYNTHETIC_MC = "synthetic_mc"
SYNTHETIC_ML = "synthetic_ml"
ARCHIVE_PREFIX = "archive:"

# shape kind per class id, fixed vocabulary
SHAPES = ("circle", "square", "triangle")

NOISE_LO, NOISE_HI = 0.1, 0.3
FILL_LO, FILL_HI = 0.7, 1.0
RADIUS_LO, RADIUS_HI = 4, 7
PLACEMENT_RETRIES = 100


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for building or loading one dataset.

    source is synthetic_mc, synthetic_ml, or archive:PATH. part selects
    the train or test side of the split ("all" keeps everything).
    """

    source: str = SYNTHETIC_MC
    num_examples: int = 400
    image_size: int = 32
    num_classes: int = 3
    channels: int = 3
    seed: int = 0
    split: float = 0.75
    part: str = "all"
    task: str = MULTICLASS

    def __post_init__(self):
        if not 0.0 < self.split < 1.0:
            raise ConfigurationError(f"split must be in (0, 1), got {self.split}")
        if self.part not in ("all", "train", "test"):
            raise ConfigurationError(f"part must be all, train or test, got {self.part!r}")
        if self.num_examples < 1:
            raise ConfigurationError("num_examples must be positive")


@dataclass(frozen=True)
class GroundTruthRegion:
    """Binary object mask plus the class it belongs to (synthetic only)."""

    mask: np.ndarray
    class_index: int


@dataclass
class Dataset:
    """Immutable-by-convention container of (image, Target) examples."""

    examples: list
    task: str
    num_classes: int
    image_size: int
    channels: int
    masks: list | None = None
    spec: DatasetSpec | None = None

    def __len__(self) -> int:
        return len(self.examples)

    def __getitem__(self, i):
        return self.examples[i]


def _shape_mask(kind: str, size: int, cy: int, cx: int, r: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    if kind == "circle":
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    if kind == "square":
        return (np.abs(yy - cy) <= r) & (np.abs(xx - cx) <= r)
    # upward triangle: apex top-center, base along the bottom row
    t = yy - (cy - r)
    return (t >= 0) & (t <= 2 * r) & (np.abs(xx - cx) <= t / 2.0)


def _place_shape(rng, size: int, class_index: int, occupied: np.ndarray):
    """Draw one shape of the class, avoiding occupied pixels."""
    # the center must sit at least r+1 from every border
    radius_hi = min(RADIUS_HI, (size - 4) // 2)
    if radius_hi < RADIUS_LO:
        raise GenerationError(
            f"image size {size} too small for shapes of radius {RADIUS_LO}"
        )
    for _ in range(PLACEMENT_RETRIES):
        r = int(rng.integers(RADIUS_LO, radius_hi + 1))
        cy = int(rng.integers(r + 1, size - r - 1))
        cx = int(rng.integers(r + 1, size - r - 1))
        fill = rng.uniform(FILL_LO, FILL_HI, size=3)
        mask = _shape_mask(SHAPES[class_index], size, cy, cx, r)
        if not (mask & occupied).any():
            return mask, fill
    raise GenerationError(
        f"could not place a non-overlapping shape after {PLACEMENT_RETRIES} attempts"
    )


def generate_synthetic(spec: DatasetSpec) -> Dataset:
    """Build the shapes-on-noise dataset described by spec.

    Multiclass images carry exactly one shape with classes assigned
    round-robin; multilabel images carry 1 to 3 shapes of distinct
    classes. Deterministic under spec.seed.
    """
    if spec.source not in (SYNTHETIC_MC, SYNTHETIC_ML):
        raise ConfigurationError(f"not a synthetic source: {spec.source!r}")
    if not 1 <= spec.num_classes <= len(SHAPES):
        raise ConfigurationError(
            f"synthetic data supports 1..{len(SHAPES)} classes, got {spec.num_classes}"
        )
    if spec.channels != 3:
        raise ConfigurationError("synthetic images are 3-channel")
    multilabel = spec.source == SYNTHETIC_ML
    task = MULTILABEL if multilabel else MULTICLASS
    rng = np.random.default_rng(spec.seed)
    size = spec.image_size

    examples = []
    masks = []
    for i in range(spec.num_examples):
        image = rng.uniform(NOISE_LO, NOISE_HI, size=(size, size, 3))
        if multilabel:
            count = int(rng.integers(1, min(3, spec.num_classes) + 1))
            classes = sorted(rng.choice(spec.num_classes, size=count, replace=False).tolist())
        else:
            classes = [i % spec.num_classes]
        occupied = np.zeros((size, size), dtype=bool)
        regions = []
        for class_index in classes:
            mask, fill = _place_shape(rng, size, class_index, occupied)
            image[mask] = fill
            occupied |= mask
            regions.append(GroundTruthRegion(mask, class_index))
        if multilabel:
            vector = np.zeros(spec.num_classes, dtype=np.int8)
            vector[classes] = 1
            target = Target.multilabel(vector)
        else:
            target = Target.multiclass(classes[0])
        examples.append((image, target))
        masks.append(regions)

    return Dataset(
        examples=examples,
        task=task,
        num_classes=spec.num_classes,
        image_size=size,
        channels=3,
        masks=masks,
        spec=spec,
    )


def _record_size(image_size: int, channels: int, num_classes: int, task: str) -> tuple[int, int]:
    label_bytes = num_classes if task == MULTILABEL else 1
    return label_bytes, label_bytes + image_size * image_size * channels


def load_archive(
    path: str,
    image_size: int = 32,
    channels: int = 3,
    num_classes: int = 3,
    task: str = MULTICLASS,
) -> Dataset:
    """Read a fixed-record binary archive.

    Each record is the label byte(s) followed by H*W*C uint8 pixel
    values in row-major (row, column, channel) order. Pixels scale to
    [0,1]. A trailing partial record is a format error.
    """
    label_bytes, rec = _record_size(image_size, channels, num_classes, task)
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0:
        raise FormatError(f"{path}: empty archive")
    if raw.size % rec != 0:
        index = raw.size // rec
        raise FormatError(
            f"{path}: record {index} truncated at byte offset {index * rec} "
            f"(file size {raw.size}, record size {rec})"
        )
    records = raw.reshape(-1, rec)
    examples = []
    for row in records:
        labels = row[:label_bytes]
        pixels = row[label_bytes:].astype(np.float64) / 255.0
        image = pixels.reshape(image_size, image_size, channels)
        if task == MULTILABEL:
            if np.any(labels > 1):
                raise FormatError(f"{path}: multilabel label bytes must be 0/1")
            target = Target.multilabel(labels.astype(np.int8))
        else:
            if labels[0] >= num_classes:
                raise FormatError(
                    f"{path}: label {labels[0]} out of range for {num_classes} classes"
                )
            target = Target.multiclass(int(labels[0]))
        examples.append((image, target))
    return Dataset(
        examples=examples,
        task=task,
        num_classes=num_classes,
        image_size=image_size,
        channels=channels,
    )


def _rle_encode(mask: np.ndarray) -> list[int]:
    """Run lengths of the flattened mask, starting with the zero run."""
    flat = np.asarray(mask, dtype=np.uint8).ravel()
    changes = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs = [0] + runs
    return [int(v) for v in runs]


def _rle_decode(runs: list[int], shape: tuple[int, int]) -> np.ndarray:
    flat = np.zeros(int(np.prod(shape)), dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape(shape)


def mask_sidecar_path(path: str) -> str:
    return path + ".masks.jsonl"


def export_archive(dataset: Dataset, path: str) -> None:
    """Write the dataset in the fixed-record binary layout.

    Pixel values are quantized to uint8 (round of value*255). When the
    dataset carries ground-truth masks, a JSON-lines sidecar stores them
    run-length encoded, one line per record.
    """
    label_bytes, _ = _record_size(
        dataset.image_size, dataset.channels, dataset.num_classes, dataset.task
    )
    with open(path, "wb") as fh:
        for image, target in dataset.examples:
            if dataset.task == MULTILABEL:
                labels = np.asarray(target.label_vector, dtype=np.uint8)
            else:
                labels = np.array([target.class_index], dtype=np.uint8)
            if labels.size != label_bytes:
                raise FormatError("label width does not match dataset geometry")
            pixels = np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
            fh.write(labels.tobytes())
            fh.write(pixels.tobytes())
    if dataset.masks is not None:
        with open(mask_sidecar_path(path), "w", encoding="utf-8") as fh:
            for regions in dataset.masks:
                record = [
                    {"class": r.class_index, "rle": _rle_encode(r.mask)} for r in regions
                ]
                fh.write(json.dumps(record) + "\n")


def load_mask_sidecar(path: str, image_size: int) -> list:
    """Read the RLE mask sidecar written by export_archive."""
    masks = []
    with open(mask_sidecar_path(path), encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            masks.append(
                [
                    GroundTruthRegion(
                        _rle_decode(item["rle"], (image_size, image_size)), int(item["class"])
                    )
                    for item in record
                ]
            )
    return masks


def split_dataset(dataset: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic shuffled split into (train, test)."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    n = len(dataset)
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fraction * n))

    def subset(indices):
        return Dataset(
            examples=[dataset.examples[i] for i in indices],
            task=dataset.task,
            num_classes=dataset.num_classes,
            image_size=dataset.image_size,
            channels=dataset.channels,
            masks=[dataset.masks[i] for i in indices] if dataset.masks is not None else None,
            spec=dataset.spec,
        )

    return subset(order[:n_train]), subset(order[n_train:])


_SPEC_KEYS = {
    "n": ("num_examples", int),
    "size": ("image_size", int),
    "classes": ("num_classes", int),
    "ch": ("channels", int),
    "seed": ("seed", int),
    "split": ("split", float),
    "part": ("part", str),
    "task": ("task", str),
}


def parse_spec(text: str) -> DatasetSpec:
    """Parse a dataset spec string.

    Format: SOURCE[,key=value]... where SOURCE is synthetic_mc,
    synthetic_ml or archive:PATH, with keys n, size, classes, ch, seed,
    split, part, task. Example: "synthetic_mc,n=2500,size=32,seed=1,part=train".
    """
    fields = [f for f in text.split(",") if f]
    if not fields:
        raise ConfigurationError("empty dataset spec")
    source = fields[0]
    kwargs = {}
    for item in fields[1:]:
        if "=" not in item:
            raise ConfigurationError(f"dataset spec entries must be key=value, got {item!r}")
        key, value = item.split("=", 1)
        if key not in _SPEC_KEYS:
            raise ConfigurationError(
                f"unknown dataset spec key {key!r}; known: {', '.join(sorted(_SPEC_KEYS))}"
            )
        name, cast = _SPEC_KEYS[key]
        kwargs[name] = cast(value)
    if source == SYNTHETIC_ML:
        kwargs.setdefault("task", MULTILABEL)
    spec = DatasetSpec(source=source, **kwargs)
    if spec.source == SYNTHETIC_MC and spec.task != MULTICLASS:
        raise ConfigurationError("synthetic_mc is a multiclass source")
    if spec.source == SYNTHETIC_ML and spec.task != MULTILABEL:
        raise ConfigurationError("synthetic_ml is a multilabel source")
    return spec


def load_dataset(spec) -> Dataset:
    """Materialize a DatasetSpec (or spec string), applying part selection."""
    if isinstance(spec, str):
        spec = parse_spec(spec)
    if spec.source in (SYNTHETIC_MC, SYNTHETIC_ML):
        dataset = generate_synthetic(spec)
    elif spec.source.startswith(ARCHIVE_PREFIX):
        path = spec.source[len(ARCHIVE_PREFIX) :]
        if not os.path.exists(path):
            raise FormatError(f"archive not found: {path}")
        dataset = load_archive(
            path,
            image_size=spec.image_size,
            channels=spec.channels,
            num_classes=spec.num_classes,
            task=spec.task,
        )
        dataset.spec = spec
    else:
        raise ConfigurationError(
            f"unknown dataset source {spec.source!r}; expected synthetic_mc, "
            f"synthetic_ml or archive:PATH"
        )
    if spec.part == "all":
        return dataset
    train, test = split_dataset(dataset, spec.split, spec.seed)
    chosen = train if spec.part == "train" else test
    chosen.spec = spec
    return chosen
