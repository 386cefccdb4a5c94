import numpy as np
import pytest

from conftest import gradcheck_worst
from uqlab.bnnlab.mlp import MlpArchitecture, backward, forward, init_layers
from uqlab.bnnlab.posteriors import POSTERIOR_KINDS


@pytest.mark.parametrize("kind", POSTERIOR_KINDS)
@pytest.mark.parametrize("activation", ["tanh", "relu"])
@pytest.mark.parametrize("tied_mean", [True, False])
def test_objective_gradient(kind, activation, tied_mean):
    assert gradcheck_worst(kind, activation, seed=3, tied_mean=tied_mean) < 1e-4


@pytest.mark.parametrize("activation", ["tanh", "relu"])
def test_mlp_backward_against_finite_differences(activation):
    rng = np.random.default_rng(0)
    arch = MlpArchitecture((3, 5, 4, 1), activation)
    layers = init_layers(arch, rng)
    x = rng.standard_normal((7, 3))
    upstream = rng.standard_normal(7)

    def f(ls):
        return float(upstream @ forward(arch, ls, x)[0])

    z, cache = forward(arch, layers, x)
    grads = backward(arch, layers, cache, upstream)
    h = 1e-6
    for li, (W, b) in enumerate(layers):
        for arr, g in ((W, grads[li][0]), (b, grads[li][1])):
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + h
                fp = f(layers)
                arr[idx] = old - h
                fm = f(layers)
                arr[idx] = old
                assert g[idx] == pytest.approx((fp - fm) / (2 * h), rel=1e-5, abs=1e-7)


def test_architecture_validation():
    with pytest.raises(ValueError):
        MlpArchitecture((2, 1))
    with pytest.raises(ValueError):
        MlpArchitecture((2, 4, 2))
    with pytest.raises(ValueError):
        MlpArchitecture((2, 4, 1), "sigmoid")
    assert MlpArchitecture((2, 8, 1)).shapes == [(2, 8), (8, 1)]
