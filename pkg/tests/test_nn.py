import math

import numpy as np
import pytest

from adhcal import nn
from adhcal.losses import LOSS_NAMES, LossKind, loss_and_grad
from adhcal.oracles import finite_difference, grad_check, net_objective


def _manual_forward(net, x):
    """Scalar loops, no matrix products."""
    h = list(x)
    for layer in net.layers:
        out = []
        for i in range(layer.out_dim):
            a = layer.bias[i]
            for j in range(layer.in_dim):
                a += layer.weight[i, j] * h[j]
            out.append(max(a, 0.0) if layer.activation == "relu" else a)
        h = out
    return np.array(h)


class TestForward:
    def test_identity_layer(self):
        net = nn.DenseNet([nn.Layer(np.eye(3), np.zeros(3))])
        x = np.array([[0.5, -2.0, 3.0]])
        np.testing.assert_array_equal(nn.predict_logits(net, x), x)

    def test_relu_sign_split(self):
        net = nn.DenseNet([nn.Layer([[1.0], [-1.0]], [0.0, 0.0], "relu")])
        np.testing.assert_array_equal(nn.predict_logits(net, [[2.0]]), [[2.0, 0.0]])

    def test_matches_scalar_evaluation(self):
        rng = np.random.default_rng(3)
        net = nn.init_dense([4, 6, 3], rng)
        for layer in net.layers:
            layer.bias[:] = rng.normal(size=layer.out_dim)
        x = rng.normal(size=(5, 4))
        out = nn.predict_logits(net, x)
        for row, o in zip(x, out):
            np.testing.assert_allclose(o, _manual_forward(net, row), rtol=1e-13, atol=1e-13)

    def test_dimension_mismatch(self):
        net = nn.init_dense([3, 2], np.random.default_rng(0))
        with pytest.raises(nn.ShapeError):
            nn.forward(net, np.zeros((2, 4)))

    def test_layers_must_chain(self):
        with pytest.raises(nn.ShapeError):
            nn.DenseNet([nn.Layer(np.zeros((3, 2)), np.zeros(3)),
                         nn.Layer(np.zeros((2, 4)), np.zeros(2))])


class TestBackward:
    def test_zero_upstream_gradient(self):
        net = nn.init_dense([3, 4, 2], np.random.default_rng(1))
        out, cache = nn.forward(net, np.ones((2, 3)))
        for g in nn.backward(net, cache, np.zeros_like(out)):
            assert not g.any()

    def test_one_parameter_quadratic(self):
        net = nn.DenseNet([nn.Layer([[0.7]], [0.0])])
        x, target = 1.3, 0.4

        def f(flat):
            net.set_flat(np.array([flat[0], 0.0]))
            z, cache = nn.forward(net, [[x]])
            r = z[0, 0] - target
            grads = nn.backward(net, cache, [[2.0 * r]])
            return r * r, grads[0].ravel()

        res = grad_check(f, np.array([0.7]), tolerance=1e-6)
        assert res.passed, res.worst_error

    def test_stale_cache_rejected(self):
        net = nn.init_dense([2, 2], np.random.default_rng(0))
        out, cache = nn.forward(net, np.ones((1, 2)))
        nn.sgd_step(net, nn.zero_grads(net), nn.OptimizerState(0.1), 0)
        with pytest.raises(nn.StaleCacheError):
            nn.backward(net, cache, np.ones_like(out))

    def test_cache_from_other_net_rejected(self):
        rng = np.random.default_rng(0)
        a, b = nn.init_dense([2, 2], rng), nn.init_dense([2, 2], rng)
        out, cache = nn.forward(a, np.ones((1, 2)))
        with pytest.raises(nn.StaleCacheError):
            nn.backward(b, cache, np.ones_like(out))

    @pytest.mark.parametrize("name", LOSS_NAMES)
    def test_three_layer_net_all_losses(self, name):
        rng = np.random.default_rng(11)
        net = nn.init_dense([3, 4, 3, 3], rng)
        for layer in net.layers:
            layer.bias[:] = rng.normal(scale=0.3, size=layer.out_dim)
        x = rng.normal(size=(6, 3))
        y = rng.integers(0, 3, size=6)
        f = net_objective(net, x, y, LossKind(name, beta=1.4))
        res = grad_check(f, net.get_flat(), tolerance=1e-4)
        assert res.passed, res.worst_error

    def test_input_gradient(self):
        rng = np.random.default_rng(5)
        net = nn.init_dense([3, 5, 2], rng)
        x = rng.normal(size=(1, 3))
        w = rng.normal(size=(1, 2))
        out, cache = nn.forward(net, x)
        _, gx = nn.backward(net, cache, w, return_input_grad=True)
        num = finite_difference(lambda v: float((nn.predict_logits(net, v) * w).sum()), x)
        np.testing.assert_allclose(gx, num, rtol=1e-6, atol=1e-9)


class TestSGD:
    def test_zero_gradient_no_decay_is_noop(self):
        net = nn.init_dense([3, 2], np.random.default_rng(0))
        before = net.get_flat()
        state = nn.OptimizerState(0.5, momentum=0.9)
        for step in range(3):
            nn.sgd_step(net, nn.zero_grads(net), state, step)
        np.testing.assert_array_equal(net.get_flat(), before)

    def test_cosine_endpoints(self):
        s = nn.Schedule("cosine", total_steps=100)
        assert s.multiplier(0) == 1.0
        assert s.multiplier(100) == 0.0
        assert s.multiplier(50) == pytest.approx(0.5, abs=1e-15)

    def test_cosine_monotone(self):
        s = nn.Schedule("cosine", total_steps=257)
        m = [s.multiplier(t) for t in range(258)]
        assert all(a >= b for a, b in zip(m, m[1:]))

    def test_multistep(self):
        s = nn.Schedule("multistep", milestones=(10, 20), factor=0.1)
        assert s.multiplier(9) == 1.0
        assert s.multiplier(10) == pytest.approx(0.1)
        assert s.multiplier(25) == pytest.approx(0.01)

    def test_nesterov_hand_recurrence(self):
        lr, mu, wd = 0.1, 0.9, 0.01
        theta0 = 2.0
        grads = [0.5, -0.3]
        net = nn.DenseNet([nn.Layer([[theta0]], [0.0])])
        state = nn.OptimizerState(lr, momentum=mu, weight_decay=wd)
        theta, v = theta0, 0.0
        for step, g in enumerate(grads):
            nn.sgd_step(net, [np.array([[g]]), np.zeros(1)], state, step)
            d = g + wd * theta
            v = mu * v + d
            theta = theta - lr * (d + mu * v)
        assert abs(net.layers[0].weight[0, 0] - theta) <= 1e-12

    def test_bad_hyperparameters(self):
        with pytest.raises(ValueError):
            nn.OptimizerState(0.0)
        with pytest.raises(ValueError):
            nn.OptimizerState(0.1, momentum=1.0)

    def test_determinism(self):
        def run():
            rng = np.random.default_rng(9)
            net = nn.init_dense([4, 8, 3], rng)
            x = rng.normal(size=(16, 4))
            y = rng.integers(0, 3, 16)
            state = nn.OptimizerState(0.05, weight_decay=1e-3,
                                      schedule=nn.Schedule("cosine", total_steps=20))
            for step in range(20):
                out, cache = nn.forward(net, x)
                _, gz = loss_and_grad(LossKind("ce"), out, y)
                nn.sgd_step(net, nn.backward(net, cache, gz), state, step)
                assert net.is_finite()
            return net.get_flat()

        np.testing.assert_array_equal(run(), run())


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        net = nn.init_dense([3, 5, 2], np.random.default_rng(4))
        path = tmp_path / "net.json"
        nn.save_net(net, path)
        back = nn.load_net(path)
        np.testing.assert_array_equal(back.get_flat(), net.get_flat())
        assert [l.activation for l in back.layers] == ["relu", "identity"]

    def test_rejects_unknown_version(self):
        d = nn.net_to_dict(nn.init_dense([2, 2], np.random.default_rng(0)))
        d["version"] = 99
        with pytest.raises(ValueError):
            nn.net_from_dict(d)


def test_init_is_he_uniform_and_seeded():
    a = nn.init_dense([50, 40, 3], np.random.default_rng(2))
    b = nn.init_dense([50, 40, 3], np.random.default_rng(2))
    np.testing.assert_array_equal(a.get_flat(), b.get_flat())
    bound = math.sqrt(6.0 / 50)
    assert np.abs(a.layers[0].weight).max() <= bound
    assert not a.layers[0].bias.any()
