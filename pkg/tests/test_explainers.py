"""Saliency-map contracts for Grad-CAM and vanilla gradient saliency."""

import numpy as np
import pytest

from edda import (
    ConvNet,
    DatasetSpec,
    ExplainerSpec,
    LinearModel,
    TrainConfig,
    explain,
    generate_synthetic,
    gradcam_map,
    keep_top_fraction,
    train,
    vanilla_saliency_map,
)
from edda.errors import ConfigurationError
from oracles import minmax_ref
from stubs import ConstantModel


def test_constant_model_yields_zero_map():
    model = ConstantModel([0.4, 0.6])
    image = np.random.default_rng(0).random((6, 6, 1))
    spec = ExplainerSpec(method="vanilla_saliency")
    np.testing.assert_array_equal(explain(spec, model, image, 0), np.zeros((6, 6)))


def test_map_minmax_contract():
    model = ConvNet((8, 8, 3), num_classes=3, seed=1)
    image = np.random.default_rng(1).random((8, 8, 3))
    for method in ("gradcam", "vanilla_saliency"):
        m = explain(ExplainerSpec(method=method), model, image, 0)
        assert m.shape == (8, 8)
        if m.max() > 0:
            assert m.min() == 0.0
            assert m.max() == 1.0


def test_invalid_class_rejected():
    model = ConvNet((8, 8, 3), num_classes=3, seed=1)
    image = np.zeros((8, 8, 3))
    with pytest.raises(ValueError):
        explain(ExplainerSpec(), model, image, 7)


def test_gradcam_weights_are_spatial_gradient_means():
    # hand-check on the analytic single-block case: with one input channel
    # and the class score equal to the spatial mean of one feature map,
    # the channel weight is 1/(h*w) and the map is the rectified,
    # normalized feature map itself
    model = ConvNet((8, 8, 1), num_classes=2, channels=(4, 6, 8), seed=3)
    image = np.random.default_rng(3).random((1, 8, 8, 1))
    activations, grads = model.feature_gradients(image, 1, "conv3")
    weights = grads.mean(axis=(1, 2))
    cam = np.maximum(np.einsum("nhwc,nc->nhw", activations, weights), 0.0)[0]
    # conv3 output is 2x2 for an 8x8 input; upsampling preserves min-max
    got = gradcam_map(model, image[0], 1, "conv3")
    assert got.shape == (8, 8)
    np.testing.assert_allclose(sorted({got.min(), got.max()}), sorted({minmax_ref(cam).min(), minmax_ref(cam).max()}), atol=1e-12)


def test_gradcam_single_feature_map_is_normalized_rectified_activation():
    model = ConvNet((8, 8, 1), num_classes=2, channels=(4, 6, 1), seed=5)
    # single conv3 channel: cam = weight * activation, so after
    # normalization the map equals the normalized activation (positive
    # weight) or zeros (non-positive rectified away)
    image = np.random.default_rng(5).random((1, 8, 8, 1))
    activations, grads = model.feature_gradients(image, 0, "conv3")
    weight = grads.mean(axis=(1, 2))[0, 0]
    upsampled = gradcam_map(model, image[0], 0, "conv3")
    if weight > 0:
        corner = minmax_ref(np.maximum(weight * activations[0, :, :, 0], 0.0))
        assert abs(upsampled.max() - corner.max()) < 1e-12
    else:
        assert upsampled.max() == 0.0


def test_zero_activations_give_zero_map():
    model = ConvNet((8, 8, 1), num_classes=2, seed=0)
    np.testing.assert_array_equal(
        gradcam_map(model, np.zeros((8, 8, 1)), 0), np.zeros((8, 8))
    )


def test_gradcam_map_size_matches_input_for_every_layer():
    model = ConvNet((16, 16, 3), num_classes=2, seed=2)
    image = np.random.default_rng(2).random((16, 16, 3))
    for layer in model.feature_layers:
        assert gradcam_map(model, image, 0, layer).shape == (16, 16)


def test_gradcam_requires_feature_layers():
    model = LinearModel((4, 4, 1), num_classes=2, seed=0)
    with pytest.raises(ConfigurationError):
        gradcam_map(model, np.zeros((4, 4, 1)), 0)


def test_vanilla_map_of_linear_model_is_channel_max_weight():
    model = LinearModel((5, 5, 2), num_classes=3, seed=9)
    image = np.random.default_rng(9).random((5, 5, 2))
    got = vanilla_saliency_map(model, image, 2)
    w = model.params["w"][:, 2].reshape(5, 5, 2)
    np.testing.assert_allclose(got, minmax_ref(np.abs(w).max(axis=-1)), atol=1e-12)


def test_vanilla_map_invariant_to_logit_shift():
    model = LinearModel((5, 5, 1), num_classes=2, seed=4)
    image = np.random.default_rng(4).random((5, 5, 1))
    before = vanilla_saliency_map(model, image, 0)
    model.params["b"] += 3.5  # constant logit shift
    np.testing.assert_array_equal(vanilla_saliency_map(model, image, 0), before)


def test_signed_gradcam_skips_rectification():
    model = ConvNet((8, 8, 1), num_classes=2, channels=(4, 6, 8), seed=8)
    image = np.random.default_rng(8).random((8, 8, 1))
    plain = gradcam_map(model, image, 0)
    signed = gradcam_map(model, image, 0, signed=True)
    assert plain.shape == signed.shape == (8, 8)
    assert signed.min() >= 0.0 and signed.max() <= 1.0
    # rectification zeroes negative contributions, so the two maps differ
    # whenever any pre-normalization value was negative
    activations, grads = model.feature_gradients(image[None], 0, "conv3")
    cam = np.einsum("nhwc,nc->nhw", activations, grads.mean(axis=(1, 2)))[0]
    if cam.min() < 0 < cam.max():
        assert not np.allclose(plain, signed)


def test_signed_output_rejected_for_vanilla():
    with pytest.raises(ConfigurationError):
        ExplainerSpec(method="vanilla_saliency", signed_output=True)


def test_unknown_method_rejected():
    with pytest.raises(ConfigurationError):
        ExplainerSpec(method="lime")


def test_default_layer_is_last_feature_layer():
    model = ConvNet((8, 8, 1), num_classes=2, seed=6)
    image = np.random.default_rng(6).random((8, 8, 1))
    np.testing.assert_array_equal(
        gradcam_map(model, image, 0), gradcam_map(model, image, 0, "conv3")
    )


@pytest.fixture(scope="module")
def trained_on_shapes():
    dataset = generate_synthetic(
        DatasetSpec(source="synthetic_mc", num_examples=900, image_size=32, num_classes=3, seed=42)
    )
    model = ConvNet((32, 32, 3), num_classes=3, channels=(8, 16, 32), seed=0)
    config = TrainConfig(epochs=10, batch_size=32, strategy="none", seed=0)
    model, _ = train(config, dataset, model)
    return model, dataset


def test_gradcam_mass_lands_on_the_shape(trained_on_shapes):
    # the synthetic set ships ground-truth masks, so the top-15% salient
    # pixels of a trained model should overlap the object
    model, dataset = trained_on_shapes
    spec = ExplainerSpec(method="gradcam")
    ious = []
    for i in range(0, 40):
        image, target = dataset.examples[i]
        region = dataset.masks[i][0]
        saliency = explain(spec, model, image, target.class_index)
        kept = np.any(keep_top_fraction(image, saliency, 0.15) > 0, axis=-1)
        inter = np.logical_and(kept, region.mask).sum()
        union = np.logical_or(kept, region.mask).sum()
        ious.append(inter / union)
    assert float(np.mean(ious)) > 0.2
