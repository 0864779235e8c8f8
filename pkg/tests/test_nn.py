import json

import numpy as np
import pytest

from attribench.nn import (MLP, ArchitectureError, EmptyDataError, InvalidTargetError,
                           TrainConfig, fit, train)
from attribench.symfunc import NoiseSpec, TabularDataset, generate_dataset

from conftest import install
from oracles import away_from_kinks, central_diff, relu_net, rel_err


def test_shapes_for_single_layer():
    m = MLP([2, 1], seed=7)
    assert m.weights[0].shape == (1, 2)
    assert m.biases[0].shape == (1,)


def test_default_architecture_has_four_weight_matrices():
    m = MLP([11, 100, 100, 100, 1])
    assert [w.shape for w in m.weights] == [(100, 11), (100, 100), (100, 100), (1, 100)]


def test_init_is_seeded_and_bounded():
    a, b = MLP([5, 8, 1], seed=3), MLP([5, 8, 1], seed=3)
    for wa, wb in zip(a.parameters(), b.parameters()):
        assert np.array_equal(wa, wb)
    assert np.all(np.abs(a.weights[0]) <= 1 / np.sqrt(5))
    assert np.all(a.biases[0] == 0)
    assert a.mode == "train"


@pytest.mark.parametrize("widths", [[], [3], [3, 0, 1], [0, 1]])
def test_invalid_architecture(widths):
    with pytest.raises(ArchitectureError):
        MLP(widths)


def test_invalid_dropout():
    with pytest.raises(ArchitectureError):
        MLP([2, 1], dropout_rate=1.0)


def test_linear_forward(linear_model):
    assert linear_model.forward(np.array([1.0, 1.0]))[0] == 1.0


def test_forward_shape_error(linear_model):
    with pytest.raises(ValueError):
        linear_model.forward(np.ones(3))


def test_eval_ignores_rng_with_dropout():
    m = MLP([4, 16, 16, 1], dropout_rate=0.5, seed=1).eval()
    x = np.linspace(-1, 1, 4)
    a = m.forward(x, rng=np.random.default_rng(0))
    b = m.forward(x, rng=np.random.default_rng(99))
    assert np.array_equal(a, b)


def test_dropout_zero_train_equals_eval():
    m = MLP([4, 16, 1], seed=2)
    x = np.random.default_rng(0).normal(size=(5, 4))
    assert np.array_equal(m.forward(x, mode="train"), m.forward(x, mode="eval"))


def test_all_negative_preacts_give_bias_path():
    m = install(MLP([2, 2, 1]), [-np.ones((2, 2)), np.ones((1, 2))], [-np.ones(2), [0.5]])
    assert m.forward(np.array([0.3, 0.2]), mode="eval")[0] == 0.5


def test_dropout_expectation_matches_eval():
    # One hidden layer feeding a linear output: the mean over masks is exactly the eval output.
    m = MLP([3, 20, 1], dropout_rate=0.3, seed=4)
    m.biases[0] = np.full(20, 0.2)
    x = np.array([0.4, -0.7, 0.9])
    rng = np.random.default_rng(5)
    draws = m.forward(np.repeat(x[None, :], 20_000, axis=0), mode="train", rng=rng)[:, 0]
    se = draws.std(ddof=1) / np.sqrt(draws.size)
    assert abs(draws.mean() - m.forward(x, mode="eval")[0]) < 3 * se


def test_input_gradient_linear(linear_model):
    for x in ([0.0, 0.0], [3.0, -2.0]):
        assert np.array_equal(linear_model.input_gradient(np.array(x)), [2.0, -1.0])


def test_input_gradient_pure(rng):
    m = MLP([6, 10, 1], seed=0).eval()
    x = rng.normal(size=6)
    assert np.array_equal(m.input_gradient(x), m.input_gradient(x))


def test_input_gradient_index_error(linear_model):
    with pytest.raises(IndexError):
        linear_model.input_gradient(np.zeros(2), output_index=1)


def test_input_gradient_matches_finite_differences(rng):
    m = MLP([7, 32, 24, 16, 2], seed=11).eval()
    checked = 0
    while checked < 100:
        x = rng.normal(size=7)
        if not away_from_kinks(m.weights, m.biases, x):
            continue
        for out in range(2):
            fd = central_diff(lambda v: relu_net(m.weights, m.biases, v[None, :])[0, out], x)
            assert rel_err(m.input_gradient(x, out), fd) < 1e-4
        checked += 1


@pytest.mark.parametrize("loss", ["mse", "bce"])
def test_parameter_gradients_match_finite_differences(rng, loss):
    m = MLP([4, 9, 6, 1], seed=21)
    # nonzero biases keep preactivations off the ReLU kink at exactly 0
    m.biases = [rng.normal(0, 0.3, size=b.shape) for b in m.biases]
    x = rng.normal(size=(12, 4))
    y = (rng.random(12) > 0.5).astype(float) if loss == "bce" else rng.normal(size=12)
    _, grads = m.loss_and_gradients(x, y, loss, mode="eval")
    for p, g in zip(m.parameters(), grads):
        fd = np.empty_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + 1e-5
            hi, _ = m.loss_and_gradients(x, y, loss, mode="eval")
            p[idx] = old - 1e-5
            lo, _ = m.loss_and_gradients(x, y, loss, mode="eval")
            p[idx] = old
            fd[idx] = (hi - lo) / 2e-5
        assert rel_err(g, fd) < 1e-4


def test_checkpoint_round_trip(tmp_path):
    m = MLP([3, 5, 1], dropout_rate=0.2, seed=8)
    path = tmp_path / "model.json"
    m.save(path)
    doc = json.loads(path.read_text())
    assert doc["format_version"] == 1 and doc["layer_widths"] == [3, 5, 1]
    back = MLP.load(path)
    assert back.dropout_rate == 0.2
    for a, b in zip(m.parameters(), back.parameters()):
        assert np.array_equal(a, b)


def test_checkpoint_version_mismatch(tmp_path):
    d = MLP([2, 1]).to_dict()
    d["format_version"] = 99
    with pytest.raises(ValueError):
        MLP.from_dict(d)


def _small_data(seed=0, n_noise=2, fid=2, n=200, noise=0.0):
    return generate_dataset(fid, NoiseSpec(n_noise, "clipped_normal", noise, seed), n, 0.8)


def test_zero_epochs_is_noop():
    m = MLP([3, 4, 1], seed=1)
    before = [p.copy() for p in m.parameters()]
    report = train(m, _small_data(), TrainConfig(epochs=0))
    assert report.per_epoch_loss == []
    assert all(np.array_equal(a, b) for a, b in zip(before, m.parameters()))


def test_training_is_deterministic():
    cfg = TrainConfig(epochs=5, seed=42)
    data = _small_data()
    a = MLP([3, 8, 1], dropout_rate=0.3, seed=1)
    b = MLP([3, 8, 1], dropout_rate=0.3, seed=1)
    ra, rb = train(a, data, cfg), train(b, data, cfg)
    assert ra.per_epoch_loss == rb.per_epoch_loss
    assert all(np.array_equal(p, q) for p, q in zip(a.parameters(), b.parameters()))


def test_sgd_reduces_loss():
    m = MLP([3, 16, 1], seed=0)
    r = train(m, _small_data(), TrainConfig(optimizer="sgd", learning_rate=0.05, epochs=30))
    assert r.per_epoch_loss[-1] < r.per_epoch_loss[0]
    assert len(r.per_epoch_loss) == 30


@pytest.mark.parametrize("seed", range(5))
def test_identity_formula_converges(seed):
    data = generate_dataset(1, NoiseSpec(0, "clipped_normal", 0.0, seed), 1000, 0.8)
    m = MLP([1, 100, 100, 100, 1], seed=seed)
    train(m, data, TrainConfig(epochs=200, learning_rate=1e-3, seed=seed))
    x_val, y_val = data.validation_arrays()
    assert np.mean((m.forward(x_val, mode="eval")[:, 0] - y_val) ** 2) < 1e-3


def test_bce_rejects_non_binary_targets():
    with pytest.raises(InvalidTargetError):
        fit(MLP([2, 1]), np.zeros((4, 2)), np.array([0, 1, 2, 0]), TrainConfig(loss="bce"))


def test_empty_train_split():
    data = TabularDataset(np.zeros((3, 2)), np.zeros(3), (), np.zeros(3, bool))
    with pytest.raises(EmptyDataError):
        train(MLP([2, 1]), data, TrainConfig(epochs=1))


def test_bce_learns_separable_labels(rng):
    x = rng.normal(size=(400, 2))
    y = (x[:, 0] > 0).astype(float)
    m = MLP([2, 8, 1], seed=0)
    fit(m, x, y, TrainConfig(loss="bce", learning_rate=1e-2, epochs=50))
    assert np.mean((m.forward(x, mode="eval")[:, 0] > 0) == (y == 1)) > 0.95


def test_recorded_fprec_curves():
    data = _small_data(n_noise=3)
    m = MLP([4, 16, 1], seed=0)
    r = train(m, data, TrainConfig(epochs=6, record_attribution_every=2, record_methods=("sa", "fa")))
    assert r.recorded_epochs == [2, 4, 6]
    assert set(r.per_epoch_fprec) == {"sa", "fa"}
    assert all(len(v) == 3 and all(0 <= f <= 1 for f in v) for v in r.per_epoch_fprec.values())


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=-1)
