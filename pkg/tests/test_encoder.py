import numpy as np
import pytest

from graphacl.encoder import (
    EncoderParams,
    ModelState,
    PredictorParams,
    ema_update,
    gcn_forward,
    load_checkpoint,
    predictor_forward,
    read_checkpoint,
    save_checkpoint,
    target_forward,
)
from graphacl.graph import build_graph, normalized_adjacency
from graphacl.linalg import ParamTensor, finite_diff_check

from .conftest import pipeline_fixture, random_graph, unit_rows


def _identity_encoder(dim, layers):
    return EncoderParams([(ParamTensor(np.eye(dim)), ParamTensor(np.zeros((1, dim)))) for _ in range(layers)],
                         activation="none")


def test_one_layer_identity_swaps_rows():
    a = normalized_adjacency(build_graph([(0, 1)], 2))
    out = gcn_forward(a, np.eye(2), _identity_encoder(2, 1))
    np.testing.assert_array_equal(out, [[0.0, 1.0], [1.0, 0.0]])


def test_isolated_node_gives_zero_row():
    a = normalized_adjacency(build_graph([(0, 1)], 3))
    out = gcn_forward(a, np.ones((3, 2)), _identity_encoder(2, 2))
    np.testing.assert_array_equal(out[2], 0.0)


@pytest.mark.parametrize("layers", [1, 2, 3])
def test_identity_encoder_is_iterated_propagation(layers):
    g = random_graph(32, 0.15, layers)
    a = normalized_adjacency(g)
    x = np.random.default_rng(0).standard_normal((32, 4))
    h = x
    dense = a.to_dense()
    for _ in range(layers):
        h = dense @ h
    norms = np.maximum(np.linalg.norm(h, axis=1, keepdims=True), 1e-12)
    np.testing.assert_allclose(gcn_forward(a, x, _identity_encoder(4, layers)), h / norms, atol=1e-12)


def test_output_rows_unit_norm():
    g = random_graph(40, 0.2, 1)
    rng = np.random.default_rng(1)
    params = EncoderParams.init(rng, 6, 16, 8)
    out = gcn_forward(normalized_adjacency(g), rng.standard_normal((40, 6)), params)
    live = g.degrees > 0
    np.testing.assert_allclose(np.linalg.norm(out[live], axis=1), 1.0, atol=1e-9)


def test_gcn_shape_mismatch():
    a = normalized_adjacency(build_graph([(0, 1)], 2))
    with pytest.raises(ValueError):
        gcn_forward(a, np.ones((3, 2)), _identity_encoder(2, 1))


def test_linear_predictor_scaling_absorbed():
    v = unit_rows(np.random.default_rng(0), 5, 3)
    for scale in (1.0, 2.0):
        pred = PredictorParams("linear", [(ParamTensor(scale * np.eye(3)), ParamTensor(np.zeros((1, 3))))])
        np.testing.assert_allclose(predictor_forward(v, pred), v, atol=1e-15)


def test_identity_predictor():
    v = unit_rows(np.random.default_rng(0), 5, 3)
    np.testing.assert_allclose(predictor_forward(v, PredictorParams.init(None, 3, "identity")), v, rtol=0, atol=1e-15)


def test_mlp_predictor_unit_rows():
    rng = np.random.default_rng(3)
    out = predictor_forward(unit_rows(rng, 10, 6), PredictorParams.init(rng, 6, "mlp"))
    np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-9)


def _scalar_state(theta, xi):
    state = ModelState.init(0, 1, 1, 1, 1, "identity")
    state.online.layers[0][0].value[...] = theta
    state.target.layers[0][0].value[...] = xi
    return state


@pytest.mark.parametrize("lam,expect", [(1.0, 0.0), (0.0, 2.0), (0.5, 1.0)])
def test_ema_examples(lam, expect):
    state = _scalar_state(2.0, 0.0)
    ema_update(state, lam)
    assert state.target.layers[0][0].value[0, 0] == expect
    assert state.online.layers[0][0].value[0, 0] == 2.0


def test_ema_twice_with_frozen_online_equals_squared_decay():
    a = ModelState.init(1, 4, 6, 3)
    for t in a.target.tensors():
        t.value = t.value * 0.0 + 0.25
    b = ModelState.init(1, 4, 6, 3)
    for t in b.target.tensors():
        t.value = t.value * 0.0 + 0.25
    ema_update(ema_update(a, 0.9), 0.9)
    ema_update(b, 0.81)
    for ta, tb in zip(a.target.tensors(), b.target.tensors()):
        np.testing.assert_allclose(ta.value, tb.value, rtol=0, atol=1e-15)


def test_ema_rejects_bad_decay():
    with pytest.raises(ValueError):
        ema_update(ModelState.init(0, 2, 2, 2), 1.5)


def test_target_forward_tracks_online():
    g = random_graph(20, 0.2, 0)
    a = normalized_adjacency(g)
    x = np.random.default_rng(0).standard_normal((20, 4))
    state = ModelState.init(5, 4, 8, 8)
    np.testing.assert_array_equal(target_forward(a, x, state), gcn_forward(a, x, state.online))
    state.online.layers[0][0].value += 0.3
    ema_update(state, 0.0)
    u = target_forward(a, x, state)
    np.testing.assert_array_equal(u, gcn_forward(a, x, state.online))
    assert not u.flags.writeable


@pytest.mark.parametrize("predictor", ["mlp", "linear", "identity"])
def test_target_receives_no_gradient(predictor):
    state, loss_fn = pipeline_fixture(predictor=predictor)
    loss_fn()
    for t in state.target.tensors():
        assert np.all(t.grad == 0.0)
    assert any(np.any(t.grad != 0.0) for t in state.trainable())


def test_encoder_gradients_finite_diff():
    state, loss_fn = pipeline_fixture(seed=3, predictor="linear")
    assert finite_diff_check(loss_fn, state.trainable(), h=1e-6) < 1e-4


def test_checkpoint_round_trip(tmp_path):
    state = ModelState.init(7, 5, 6, 4, 2, "mlp")
    path = tmp_path / "ck.bin"
    save_checkpoint(path, state)
    blob = path.read_bytes()
    assert blob[:8] == b"GACLCKPT"
    arrays = read_checkpoint(path)
    assert len(arrays) == len(state.tensors())
    fresh = load_checkpoint(path, ModelState.init(99, 5, 6, 4, 2, "mlp"))
    for a, b in zip(fresh.tensors(), state.tensors()):
        np.testing.assert_array_equal(a.value, b.value)


def test_checkpoint_shape_mismatch(tmp_path):
    path = tmp_path / "ck.bin"
    save_checkpoint(path, ModelState.init(0, 5, 6, 4))
    with pytest.raises(ValueError):
        load_checkpoint(path, ModelState.init(0, 5, 6, 4, 2, "linear"))
    (tmp_path / "bad.bin").write_bytes(b"NOPE" * 4)
    with pytest.raises(ValueError):
        read_checkpoint(tmp_path / "bad.bin")
