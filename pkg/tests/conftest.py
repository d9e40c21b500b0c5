"""Shared fixtures and numeric-oracle helpers for the test suite."""

import numpy as np
import pytest

from amvdsn import ModelConfig, ModelParams, MultiViewDataset, forward, joint_loss


def numeric_gradient(loss_fn, tensors, name, h=1e-5):
    """Central finite differences of ``loss_fn(tensors)`` w.r.t. one tensor."""
    base = {k: v.copy() for k, v in tensors.items()}
    out = np.zeros_like(base[name])
    it = np.nditer(base[name], flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        base[name][idx] += h
        lp = loss_fn(base)
        base[name][idx] -= 2 * h
        lm = loss_fn(base)
        base[name][idx] += h
        out[idx] = (lp - lm) / (2 * h)
    return out


def max_rel_err(analytic, numeric, floor=1e-5):
    """Worst relative disagreement between a gradient and its finite-difference
    estimate. Central differences at h=1e-5 carry absolute roundoff noise of
    roughly eps * |loss| / h ~ 1e-10, so entries where both sides sit below
    the floor are below the oracle's own resolution and count as matching."""
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    rel = np.where(scale >= floor, np.abs(analytic - numeric) / np.maximum(scale, floor), 0.0)
    return float(rel.max())


def make_tiny_setup(seed=3, use_shortcut=True, use_consistent_layer=True, weight_reg="l2"):
    """Tiny two-view model at a generic parameter point (no exact ReLU kinks)."""
    config = ModelConfig(
        view_dims=[5, 7],
        hidden_dim=4,
        encoder_depth=2,
        lambda1=0.7,
        lambda2=0.9,
        lambda3=0.2,
        weight_reg=weight_reg,
        use_shortcut=use_shortcut,
        use_consistent_layer=use_consistent_layer,
        seed=seed,
    ).validate()
    from amvdsn import init_params

    params = init_params(config, 8)
    rng = np.random.default_rng(seed + 100)
    for name in params.names():
        params[name] = params[name] + 0.05 * rng.standard_normal(params[name].shape)
    views = [rng.random((5, 8)), rng.random((7, 8))]
    dataset = MultiViewDataset(views=views).validate()
    return config, params, dataset


def joint_loss_of(tensors, config, dataset):
    """Value of the joint objective as a pure function of a tensor dict."""
    params = ModelParams(tensors)
    bundle = forward(params, config, dataset)
    return joint_loss(params, config, dataset, bundle)[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
