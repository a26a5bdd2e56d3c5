"""Classifier interface plus the from-scratch CNN and linear models.

All models consume float64 image batches shaped (N, H, W, C) with values
in [0,1] and produce pre-activation logits. Multiclass scores go through
softmax, multilabel scores through per-class sigmoid. Gradients are always
taken with respect to pre-softmax logits.
"""

from __future__ import annotations

import numpy as np

from . import kernels, nn
from .errors import ConfigurationError, ShapeMismatchError
from .types import MULTICLASS, MULTILABEL, TASKS


class Model:
    """Abstract classifier.

    Subclasses set ``task``, ``num_classes`` and ``background_enabled``
    and implement ``logits_batch``. Gradient entry points default to
    unsupported; differentiable models override them.
    """

    task: str = MULTICLASS
    num_classes: int = 0
    background_enabled: bool = False
    input_shape: tuple[int, int, int] | None = None
    architecture: str = "custom"

    @property
    def num_outputs(self) -> int:
        """Output width: classes plus one background slot when enabled."""
        extra = 1 if (self.background_enabled and self.task == MULTICLASS) else 0
        return self.num_classes + extra

    @property
    def background_index(self) -> int:
        if not (self.background_enabled and self.task == MULTICLASS):
            raise ConfigurationError("model has no background class")
        return self.num_classes

    @property
    def feature_layers(self) -> tuple[str, ...]:
        return ()

    def logits_batch(self, images: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_batch(self, images: np.ndarray) -> np.ndarray:
        logits = self.logits_batch(images)
        if self.task == MULTICLASS:
            return nn.softmax(logits)
        return nn.sigmoid(logits)

    def input_gradients(self, images: np.ndarray, class_index) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} does not expose input gradients")

    def feature_gradients(self, images: np.ndarray, class_index, layer: str):
        raise ConfigurationError(f"{type(self).__name__} has no feature layers")

    def parameters(self) -> dict:
        return {}

    def _check_input(self, images: np.ndarray) -> np.ndarray:
        images = np.ascontiguousarray(images, dtype=np.float64)
        if images.ndim != 4:
            raise ShapeMismatchError(f"expected image batch (N, H, W, C), got shape {images.shape}")
        if self.input_shape is not None and tuple(images.shape[1:]) != self.input_shape:
            raise ShapeMismatchError(
                f"model expects input {self.input_shape}, got {tuple(images.shape[1:])}"
            )
        return images

    def _class_rows(self, class_index, n: int) -> np.ndarray:
        """Normalize a scalar or per-example class spec to an (n,) index array."""
        idx = np.asarray(class_index, dtype=np.int64)
        if idx.ndim == 0:
            idx = np.full(n, int(idx), dtype=np.int64)
        if idx.shape != (n,):
            raise ShapeMismatchError(f"class_index must be scalar or length {n}, got {idx.shape}")
        if np.any(idx < 0) or np.any(idx >= self.num_outputs):
            raise ValueError(f"class index out of range [0, {self.num_outputs})")
        return idx


def _one_hot_rows(idx: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((idx.shape[0], width))
    out[np.arange(idx.shape[0]), idx] = 1.0
    return out


class ConvNet(Model):
    """Three-block CNN in float64.

    Each block is a 3x3 same-padded convolution followed by ReLU; 2x2
    average pooling sits after the first two blocks, so the network is
    piecewise linear in its input away from ReLU kinks. A global average
    pool and a dense head produce the logits. Feature layers "conv1",
    "conv2", "conv3" refer to the post-ReLU block outputs.
    """

    architecture = "convnet"

    def __init__(
        self,
        input_shape: tuple[int, int, int],
        num_classes: int,
        task: str = MULTICLASS,
        background_enabled: bool = False,
        channels: tuple[int, int, int] = (8, 16, 32),
        seed: int | None = 0,
        params: dict | None = None,
    ):
        if task not in TASKS:
            raise ConfigurationError(f"unknown task {task!r}")
        h, w, c = input_shape
        if h % 4 or w % 4:
            raise ConfigurationError("input height and width must be divisible by 4")
        if num_classes < 1:
            raise ConfigurationError("num_classes must be positive")
        self.input_shape = (h, w, c)
        self.num_classes = num_classes
        self.task = task
        self.background_enabled = background_enabled
        self.channels = tuple(int(v) for v in channels)
        if params is not None:
            self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
        else:
            self.params = self._init_params(np.random.default_rng(seed))

    def _init_params(self, rng: np.random.Generator) -> dict:
        c_in = self.input_shape[2]
        c1, c2, c3 = self.channels
        params = {}

        def he_conv(name, ci, co):
            fan_in = 3 * 3 * ci
            params[f"w{name}"] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(3, 3, ci, co))
            params[f"b{name}"] = np.zeros(co)

        he_conv("1", c_in, c1)
        he_conv("2", c1, c2)
        he_conv("3", c2, c3)
        params["wd"] = rng.normal(0.0, np.sqrt(2.0 / c3), size=(c3, self.num_outputs))
        params["bd"] = np.zeros(self.num_outputs)
        return params

    @property
    def feature_layers(self) -> tuple[str, ...]:
        return ("conv1", "conv2", "conv3")

    def parameters(self) -> dict:
        return self.params

    def _forward(self, x: np.ndarray) -> dict:
        p = self.params
        cache = {"x": x}
        cache["z1"] = kernels.conv2d_forward(x, p["w1"], p["b1"])
        cache["a1"] = nn.relu(cache["z1"])
        cache["p1"] = nn.avgpool2(cache["a1"])
        cache["z2"] = kernels.conv2d_forward(cache["p1"], p["w2"], p["b2"])
        cache["a2"] = nn.relu(cache["z2"])
        cache["p2"] = nn.avgpool2(cache["a2"])
        cache["z3"] = kernels.conv2d_forward(cache["p2"], p["w3"], p["b3"])
        cache["a3"] = nn.relu(cache["z3"])
        cache["g"] = nn.global_avg_pool(cache["a3"])
        cache["logits"] = nn.dense_forward(cache["g"], p["wd"], p["bd"])
        return cache

    def logits_batch(self, images: np.ndarray) -> np.ndarray:
        images = self._check_input(images)
        return self._forward(images)["logits"]

    def _backprop(self, cache: dict, dlogits: np.ndarray, want_params: bool, stop_layer: str | None):
        """Run the backward pass from the logits.

        Returns (grad_at_stop, param_grads). With a stop_layer the pass
        halts at that block's post-ReLU output and returns its gradient;
        otherwise it runs through to the input.
        """
        p = self.params
        grads = {}
        dg = nn.dense_input_grad(dlogits, p["wd"])
        if want_params:
            grads["wd"], grads["bd"] = nn.dense_param_grads(cache["g"], dlogits)
        h3, w3 = cache["a3"].shape[1:3]
        da3 = nn.global_avg_pool_grad(dg, h3, w3)
        if stop_layer == "conv3":
            return da3, grads
        dz3 = nn.relu_grad(cache["z3"], da3)
        if want_params:
            grads["w3"], grads["b3"] = kernels.conv2d_param_grads(cache["p2"], dz3)
        dp2 = kernels.conv2d_input_grad(dz3, p["w3"])
        da2 = nn.avgpool2_grad(dp2)
        if stop_layer == "conv2":
            return da2, grads
        dz2 = nn.relu_grad(cache["z2"], da2)
        if want_params:
            grads["w2"], grads["b2"] = kernels.conv2d_param_grads(cache["p1"], dz2)
        dp1 = kernels.conv2d_input_grad(dz2, p["w2"])
        da1 = nn.avgpool2_grad(dp1)
        if stop_layer == "conv1":
            return da1, grads
        dz1 = nn.relu_grad(cache["z1"], da1)
        if want_params:
            grads["w1"], grads["b1"] = kernels.conv2d_param_grads(cache["x"], dz1)
        dx = kernels.conv2d_input_grad(dz1, p["w1"])
        return dx, grads

    def input_gradients(self, images: np.ndarray, class_index) -> np.ndarray:
        """Gradient of each example's pre-softmax class logit w.r.t. its input.

        class_index may be a scalar (same class for every example) or a
        per-example index array.
        """
        images = self._check_input(images)
        idx = self._class_rows(class_index, images.shape[0])
        cache = self._forward(images)
        dlogits = _one_hot_rows(idx, self.num_outputs)
        dx, _ = self._backprop(cache, dlogits, want_params=False, stop_layer=None)
        return dx

    def feature_gradients(self, images: np.ndarray, class_index, layer: str):
        """Activations and class-logit gradients at a named feature layer.

        Returns (activations, gradients), both shaped (N, h, w, channels).
        """
        if layer not in self.feature_layers:
            raise ConfigurationError(f"unknown feature layer {layer!r}")
        images = self._check_input(images)
        idx = self._class_rows(class_index, images.shape[0])
        cache = self._forward(images)
        dlogits = _one_hot_rows(idx, self.num_outputs)
        grad, _ = self._backprop(cache, dlogits, want_params=False, stop_layer=layer)
        key = {"conv1": "a1", "conv2": "a2", "conv3": "a3"}[layer]
        return cache[key], grad

    def loss_backward(self, images: np.ndarray, dlogits: np.ndarray) -> dict:
        """Parameter gradients of sum(dlogits * logits) over the batch."""
        images = self._check_input(images)
        cache = self._forward(images)
        _, grads = self._backprop(cache, dlogits, want_params=True, stop_layer=None)
        return grads


class LinearModel(Model):
    """Flatten-then-dense classifier; gradients are the weight rows."""

    architecture = "linear"

    def __init__(
        self,
        input_shape: tuple[int, int, int],
        num_classes: int,
        task: str = MULTICLASS,
        background_enabled: bool = False,
        seed: int | None = 0,
        params: dict | None = None,
    ):
        if task not in TASKS:
            raise ConfigurationError(f"unknown task {task!r}")
        self.input_shape = tuple(int(v) for v in input_shape)
        self.num_classes = int(num_classes)
        self.task = task
        self.background_enabled = background_enabled
        n_in = int(np.prod(self.input_shape))
        if params is not None:
            self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
        else:
            rng = np.random.default_rng(seed)
            self.params = {
                "w": rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, self.num_outputs)),
                "b": np.zeros(self.num_outputs),
            }

    def parameters(self) -> dict:
        return self.params

    def logits_batch(self, images: np.ndarray) -> np.ndarray:
        images = self._check_input(images)
        flat = images.reshape(images.shape[0], -1)
        return nn.dense_forward(flat, self.params["w"], self.params["b"])

    def input_gradients(self, images: np.ndarray, class_index) -> np.ndarray:
        images = self._check_input(images)
        idx = self._class_rows(class_index, images.shape[0])
        rows = self.params["w"].T[idx]
        return rows.reshape(images.shape)

    def loss_backward(self, images: np.ndarray, dlogits: np.ndarray) -> dict:
        images = self._check_input(images)
        flat = images.reshape(images.shape[0], -1)
        dw, db = nn.dense_param_grads(flat, dlogits)
        return {"w": dw, "b": db}


def predict(model: Model, image: np.ndarray) -> np.ndarray:
    """Score a single (H, W, C) image; multiclass scores sum to 1."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise ShapeMismatchError(f"expected (H, W, C) image, got shape {image.shape}")
    return model.predict_batch(image[None])[0]


def class_score_gradient(model: Model, image: np.ndarray, class_index: int, with_respect_to: str = "input") -> np.ndarray:
    """Gradient of the pre-softmax class logit for one image.

    with_respect_to is "input" for the image itself or a feature-layer id
    for that layer's activations. The result matches the shape of the
    differentiated tensor.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise ShapeMismatchError(f"expected (H, W, C) image, got shape {image.shape}")
    if with_respect_to == "input":
        return model.input_gradients(image[None], class_index)[0]
    _, grad = model.feature_gradients(image[None], class_index, with_respect_to)
    return grad[0]
