import json
import math

import numpy as np
import pytest

from certpong.netcore import (INTUITION, AGENT_SPECS, REWARD, SIMPLE_PREDICTION, LoadError,
                              Network, NetworkSpec, SpecError, TrainingSample, analytic_gradient,
                              backprop_step, forward, forward_batch, init_network, load_network,
                              masked_loss, numeric_gradient, relative_error, save_network,
                              zero_network)


def sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


def test_init_ranges_and_zero_biases():
    net = init_network(NetworkSpec(6, 10, 1), 0)
    assert net.w1.shape == (10, 7) and net.w2.shape == (1, 11)
    assert np.all(np.abs(net.w1) < 0.5) and np.all(np.abs(net.w2) < 0.5)
    assert np.all(net.w1[:, -1] == 0) and np.all(net.w2[:, -1] == 0)
    assert net.learning_rate == 0.3


def test_init_is_seeded():
    a, b = init_network(REWARD, 42), init_network(REWARD, 42)
    assert a.same_weights(b)
    assert not a.same_weights(init_network(REWARD, 43))


@pytest.mark.parametrize("dims", [(0, 3, 1), (3, 0, 1), (3, 3, 0), (-1, 2, 2)])
def test_bad_spec(dims):
    with pytest.raises(SpecError):
        NetworkSpec(*dims)


def test_forward_hand_computed():
    # 1:1:1 with every weight 1 and biases 0: sigma(sigma(1))
    net = Network(NetworkSpec(1, 1, 1), np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]]))
    out = forward(net, [1.0])
    assert out[0] == pytest.approx(sigmoid(sigmoid(1.0)), abs=1e-12)
    assert out[0] == pytest.approx(0.6750, abs=1e-4)


def test_forward_does_not_mutate():
    net = init_network(INTUITION, 1)
    before = net.copy()
    forward(net, np.full(8, 0.5))
    assert net.same_weights(before)


def test_forward_output_in_open_interval():
    rng = np.random.default_rng(0)
    for spec in AGENT_SPECS:
        net = init_network(spec, rng)
        out = forward_batch(net, rng.random((200, spec.n_in)))
        assert np.all((out > 0) & (out < 1))


def test_forward_batch_matches_single():
    rng = np.random.default_rng(1)
    net = init_network(INTUITION, rng)
    xs = rng.random((33, 8))
    batch = forward_batch(net, xs)
    for x, row in zip(xs, batch):
        assert np.allclose(forward(net, x), row, atol=1e-15)


def test_forward_rejects_wrong_length():
    with pytest.raises(ValueError):
        forward(init_network(SIMPLE_PREDICTION, 0), np.zeros(5))


def test_zero_network_outputs_half():
    assert np.all(forward(zero_network(REWARD), np.ones(8)) == 0.5)


def test_backprop_descends():
    rng = np.random.default_rng(2)
    for spec in AGENT_SPECS:
        for _ in range(20):
            net = init_network(spec, rng)
            sample = TrainingSample(rng.random(spec.n_in), rng.random(spec.n_out))
            net.learning_rate = 0.01
            before = masked_loss(net, sample)
            backprop_step(net, sample)
            assert masked_loss(net, sample) <= before


def test_backprop_returns_same_object():
    net = init_network(SIMPLE_PREDICTION, 0)
    assert backprop_step(net, TrainingSample(np.zeros(6), np.ones(1))) is net


def test_masked_output_leaves_its_weights_alone():
    net = init_network(REWARD, 3)
    before = net.copy()
    backprop_step(net, TrainingSample(np.full(8, 0.3), np.array([1.0, 1.0]),
                                      np.array([1.0, 0.0])))
    assert np.array_equal(net.w2[1], before.w2[1])
    assert not np.array_equal(net.w2[0], before.w2[0])


def test_all_zero_mask_is_a_noop_with_warning():
    net = init_network(INTUITION, 4)
    before = net.copy()
    with pytest.warns(UserWarning):
        backprop_step(net, TrainingSample(np.ones(8), np.ones(3), np.zeros(3)))
    assert net.same_weights(before)


def test_zero_gradient_at_target():
    net = init_network(SIMPLE_PREDICTION, 5)
    x = np.linspace(0, 1, 6)
    sample = TrainingSample(x, forward(net, x).copy())
    before = net.copy()
    backprop_step(net, sample)
    assert np.allclose(net.w1, before.w1, atol=1e-15)
    assert np.allclose(net.w2, before.w2, atol=1e-15)


def test_hand_derived_gradient_1_1_1():
    # every weight 1, bias 0, x = 1, target 0
    net = Network(NetworkSpec(1, 1, 1), np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]]))
    h = sigmoid(1.0)
    y = sigmoid(h)
    d_out = (y - 0.0) * y * (1 - y)
    d_hid = d_out * 1.0 * h * (1 - h)
    g1, g2 = analytic_gradient(net, TrainingSample(np.array([1.0]), np.array([0.0])))
    assert g2 == pytest.approx(np.array([[d_out * h, d_out]]), abs=1e-15)
    assert g1 == pytest.approx(np.array([[d_hid * 1.0, d_hid]]), abs=1e-15)
    assert np.all(g1 > 0) and np.all(g2 > 0)
    backprop_step(net, TrainingSample(np.array([1.0]), np.array([0.0])))
    assert net.w2[0, 0] == pytest.approx(1.0 - 0.3 * d_out * h, abs=1e-15)


@pytest.mark.parametrize("spec", AGENT_SPECS, ids=str)
def test_gradient_agrees_with_finite_differences(spec):
    rng = np.random.default_rng(6)
    for _ in range(10):
        net = init_network(spec, rng)
        net.w1[:, -1] = rng.uniform(-0.5, 0.5, spec.n_hidden)
        mask = np.ones(spec.n_out)
        mask[0] = 0.0 if spec.n_out > 1 else 1.0
        sample = TrainingSample(rng.random(spec.n_in), rng.random(spec.n_out), mask)
        for a, n in zip(analytic_gradient(net, sample), numeric_gradient(net, sample)):
            assert relative_error(a, n) < 1e-4


def test_relative_error_floor():
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
    assert relative_error(np.array([1e-12]), np.array([0.0])) == pytest.approx(1e-5)


def test_fitting_a_constant():
    net = init_network(SIMPLE_PREDICTION, 7)
    x = np.full(6, 0.5)
    for _ in range(500):
        backprop_step(net, TrainingSample(x, np.array([0.8])))
    assert abs(forward(net, x)[0] - 0.8) <= 0.01


# -- persistence ---------------------------------------------------------------

def test_save_load_round_trip_is_exact():
    rng = np.random.default_rng(8)
    for spec in AGENT_SPECS:
        net = init_network(spec, rng)
        for _ in range(50):
            backprop_step(net, TrainingSample(rng.random(spec.n_in), rng.random(spec.n_out)))
        back = load_network(save_network(net))
        assert back.same_weights(net) and back.spec == net.spec
        assert back.learning_rate == net.learning_rate
        assert save_network(back) == save_network(net)


def _doc(net=None):
    return json.loads(save_network(net or init_network(SIMPLE_PREDICTION, 0)))


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d.update(format_version=2), "format_version"),
    (lambda d: d.update(w1=[[0.0] * 7] * 9), "w1"),
    (lambda d: d["w2"][0].__setitem__(0, "x"), "w2"),
    (lambda d: d.pop("learning_rate"), "learning_rate"),
    (lambda d: d.update(spec=[6, 0, 1]), "spec"),
])
def test_load_errors_name_the_field(mutate, field):
    d = _doc()
    mutate(d)
    with pytest.raises(LoadError, match=field):
        load_network(json.dumps(d))


def test_load_rejects_non_finite():
    text = save_network(init_network(SIMPLE_PREDICTION, 0)).decode()
    d = json.loads(text)
    d["w1"][0][0] = float("nan")
    with pytest.raises(LoadError, match="w1"):
        load_network(json.dumps(d))


def test_load_rejects_garbage():
    with pytest.raises(LoadError):
        load_network(b"{not json")
    with pytest.raises(LoadError):
        load_network(b"[1, 2]")
