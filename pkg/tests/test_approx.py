"""MLP forward/backward/Adam, checked against central finite differences."""

import numpy as np
import pytest

from careersim.approx import (
    SelectedSquaredError,
    ValueRegression,
    WeightedLogProb,
    adam_step,
    clone,
    flatten_params,
    forward,
    forward_batch,
    grad,
    init_adam,
    init_mlp,
    loss_value,
    set_params,
)


def finite_difference(net, x, loss, h=1e-5):
    """Central-difference gradient over the flattened parameter vector."""
    theta = flatten_params(net)
    out = np.zeros_like(theta)
    probe = clone(net)
    for i in range(theta.size):
        bumped = theta.copy()
        bumped[i] += h
        set_params(probe, bumped)
        up = loss_value(probe, x, loss)
        bumped[i] -= 2 * h
        set_params(probe, bumped)
        down = loss_value(probe, x, loss)
        out[i] = (up - down) / (2 * h)
    return out


def flatten_grads(d_weights, d_biases):
    return np.concatenate([g.ravel() for g in d_weights + d_biases])


class TestForward:
    def test_zero_parameters_linear_output(self):
        net = init_mlp((3, 4, 2), seed=0)
        for w in net.weights:
            w[...] = 0.0
        assert np.array_equal(forward(net, [1.0, -2.0, 3.0]), np.zeros(2))

    def test_identity_single_layer(self):
        net = init_mlp((3, 3), seed=0)
        net.weights[0][...] = np.eye(3)
        net.biases[0][...] = 0.0
        x = np.array([0.5, -1.5, 2.0])
        assert np.allclose(forward(net, x), x)

    def test_softmax_normalized(self):
        rng = np.random.default_rng(1)
        net = init_mlp((5, 8, 4), output="softmax", seed=2)
        X = rng.normal(size=(50, 5))
        out = forward_batch(net, X)
        assert np.allclose(out.sum(axis=1), 1.0, atol=1e-9)
        assert (out > 0).all()

    def test_dimension_mismatch(self):
        net = init_mlp((3, 2), seed=0)
        with pytest.raises(ValueError, match="width"):
            forward(net, [1.0, 2.0])

    def test_bad_construction_rejected(self):
        with pytest.raises(ValueError):
            init_mlp((3,))
        with pytest.raises(ValueError):
            init_mlp((3, 2), hidden="sigmoid")
        with pytest.raises(ValueError):
            init_mlp((3, 2), output="cube")

    def test_init_deterministic_per_seed(self):
        a = init_mlp((4, 6, 2), seed=9)
        b = init_mlp((4, 6, 2), seed=9)
        assert np.array_equal(flatten_params(a), flatten_params(b))


def random_loss(rng, n_out, softmax):
    kind = rng.integers(3 if softmax else 2)
    if softmax:
        if kind == 0:
            return WeightedLogProb(index=int(rng.integers(n_out)), weight=float(rng.normal()))
        if kind == 1:
            return WeightedLogProb(index=int(rng.integers(n_out)),
                                   weight=float(rng.normal()), entropy_coef=0.05)
    if kind == 0:
        return SelectedSquaredError(index=int(rng.integers(n_out)),
                                    target=float(rng.normal()), weight=1.5)
    return ValueRegression(target=tuple(rng.normal(size=n_out)))


class TestGradients:
    def test_finite_difference_agreement_all_head_types(self):
        rng = np.random.default_rng(0)
        for trial in range(12):
            dims = (int(rng.integers(2, 5)), int(rng.integers(3, 7)), int(rng.integers(2, 4)))
            softmax = trial % 2 == 0
            net = init_mlp(dims, hidden="tanh", output="softmax" if softmax else "linear",
                           seed=int(rng.integers(1000)))
            x = rng.normal(size=dims[0])
            loss = random_loss(rng, dims[-1], softmax)
            d_w, d_b, _ = grad(net, x, loss)
            got = flatten_grads(d_w, d_b)
            want = finite_difference(net, x, loss)
            denom = np.maximum(np.abs(got) + np.abs(want), 1e-6)
            assert (np.abs(got - want) / denom).max() <= 1e-4

    def test_relu_gradients_away_from_kinks(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            net = init_mlp((3, 6, 2), hidden="relu", seed=int(rng.integers(1000)))
            # re-draw inputs until no pre-activation sits within the step size
            for _ in range(50):
                x = rng.normal(size=3)
                a = x[None, :]
                safe = True
                for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                    z = a @ w.T + b
                    if i < len(net.weights) - 1:
                        if np.abs(z).min() < 1e-3:
                            safe = False
                        a = np.maximum(z, 0.0)
                if safe:
                    break
            loss = SelectedSquaredError(index=0, target=0.3)
            d_w, d_b, _ = grad(net, x, loss)
            got = flatten_grads(d_w, d_b)
            want = finite_difference(net, x, loss)
            denom = np.maximum(np.abs(got) + np.abs(want), 1e-6)
            assert (np.abs(got - want) / denom).max() <= 1e-4

    def test_zero_weight_zero_gradient(self):
        net = init_mlp((3, 4, 2), output="softmax", seed=1)
        d_w, d_b, value = grad(net, np.ones(3), WeightedLogProb(index=0, weight=0.0))
        # entropy off, weight zero: nothing flows back
        assert value == 0.0
        assert all(np.all(g == 0) for g in d_w + d_b)

    def test_dead_relu_region_zero_gradient(self):
        net = init_mlp((2, 3, 1), hidden="relu", seed=0)
        net.weights[0][...] = -1.0
        net.biases[0][...] = -1.0  # all hidden units dead for positive inputs
        d_w, d_b, _ = grad(net, np.array([1.0, 1.0]), SelectedSquaredError(0, target=5.0))
        assert np.all(d_w[0] == 0.0)
        assert np.all(d_b[0] == 0.0)
        # output-layer bias still learns
        assert np.any(d_b[1] != 0.0)


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        net = init_mlp((2, 3, 1), seed=4)
        state = init_adam(net)
        before = flatten_params(net).copy()
        zeros = ([np.zeros_like(w) for w in net.weights], [np.zeros_like(b) for b in net.biases])
        adam_step(net, zeros, state)
        assert np.array_equal(flatten_params(net), before)
        assert state.step == 1

    def test_constant_gradient_step_bounded_by_lr(self):
        # with a constant gradient the bias-corrected update approaches
        # lr * sign(g); no single step may exceed it by more than ~lr
        net = init_mlp((1, 1), seed=5)
        state = init_adam(net, learning_rate=0.01)
        g = ([np.full_like(net.weights[0], 3.7)], [np.full_like(net.biases[0], -2.2)])
        prev = flatten_params(net).copy()
        for _ in range(200):
            adam_step(net, g, state)
            now = flatten_params(net)
            assert np.abs(now - prev).max() <= 0.01 * (1 + 1e-6) + 1e-12
            prev = now.copy()
        # late steps settle at the sign step
        assert np.allclose(np.abs(now - prev), 0.0)

    def test_quadratic_convergence(self):
        # minimize (w*1 + b - 3)^2 in a 1-d linear net: scalar simulation oracle
        net = init_mlp((1, 1), seed=6)
        state = init_adam(net, learning_rate=1e-2)
        x = np.array([1.0])
        for _ in range(5000):
            d_w, d_b, value = grad(net, x, SelectedSquaredError(0, target=3.0))
            adam_step(net, (d_w, d_b), state)
        assert abs(forward(net, x)[0] - 3.0) < 1e-3

    def test_shape_mismatch_rejected(self):
        net = init_mlp((2, 2), seed=0)
        state = init_adam(net)
        bad = ([np.zeros((3, 3))], [np.zeros(2)])
        with pytest.raises(ValueError, match="shape"):
            adam_step(net, bad, state)

    def test_non_finite_gradient_aborts(self):
        net = init_mlp((2, 2), seed=0)
        state = init_adam(net)
        bad = ([np.full((2, 2), np.nan)], [np.zeros(2)])
        with pytest.raises(FloatingPointError):
            adam_step(net, bad, state)

    def test_param_roundtrip(self):
        net = init_mlp((3, 5, 2), seed=7)
        theta = flatten_params(net)
        other = init_mlp((3, 5, 2), seed=8)
        set_params(other, theta)
        assert np.array_equal(flatten_params(other), theta)
