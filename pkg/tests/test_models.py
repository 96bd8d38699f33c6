import numpy as np
import pytest

from tsadv import autodiff as ad
from tsadv.autodiff import ShapeError, Tensor
from tsadv.models import (EncDecLstmModel, LstmCellParams, VanillaLstmModel, build_model,
                          lstm_cell_step)
from tsadv.rng import stream

from conftest import model_loss, relative_error


def numpy_cell(x, s, c, P):
    """Independent dense-numpy LSTM step used as the oracle."""
    sig = lambda z: 1 / (1 + np.exp(-z))
    pre = {g: x @ P[f"X_{g}"] + s @ P[f"Z_{g}"] + P[f"b_{g}"] for g in "fjko"}
    c_new = sig(pre["f"]) * c + sig(pre["j"]) * np.tanh(pre["k"])
    return np.tanh(c_new) * sig(pre["o"]), c_new


def random_cell(F, H, seed):
    rng = np.random.default_rng(seed)
    arrays = {k: rng.normal(0, 0.7, (F, H) if k[0] == "X" else (H, H) if k[0] == "Z" else (H,))
              for k in LstmCellParams.names()}
    return arrays, LstmCellParams({k: Tensor(v, requires_grad=True) for k, v in arrays.items()})


def test_cell_matches_numpy_reference():
    arrays, cell = random_cell(3, 5, 0)
    rng = np.random.default_rng(1)
    x, s, c = rng.normal(size=(4, 3)), rng.normal(size=(4, 5)), rng.normal(size=(4, 5))
    s1, c1 = lstm_cell_step(x, s, c, cell)
    rs, rc = numpy_cell(x, s, c, arrays)
    np.testing.assert_allclose(s1.data, rs, rtol=1e-13)
    np.testing.assert_allclose(c1.data, rc, rtol=1e-13)


def test_zero_weight_cell_halves_memory():
    _, cell = random_cell(2, 3, 0)
    for t in cell.tensors.values():
        t.data = np.zeros_like(t.data)
    c_prev = np.array([0.8, -0.4, 2.0])
    s, c = lstm_cell_step(np.ones(2), np.zeros(3), c_prev, cell)
    # every sigmoid gate reads 0.5 and the candidate tanh(0) is 0
    np.testing.assert_allclose(c.data, 0.5 * c_prev)
    np.testing.assert_allclose(s.data, 0.5 * np.tanh(0.5 * c_prev))


def test_cell_shape_errors():
    _, cell = random_cell(2, 3, 0)
    with pytest.raises(ShapeError):
        lstm_cell_step(np.ones(4), np.zeros(3), np.zeros(3), cell)
    with pytest.raises(ShapeError):
        lstm_cell_step(np.ones(2), np.zeros(3), np.zeros(2), cell)


def test_zero_weight_models_output_head_bias():
    for m in (VanillaLstmModel(3, 2, hidden=5, dense=4), EncDecLstmModel(3, 2, hidden=5, dense=4)):
        m.zero_()
        m.params["head.b"].data = np.array([0.3])
        out = m.predict(np.random.default_rng(0).normal(size=(6, 2, 3)))
        np.testing.assert_allclose(out, 0.3)


def test_vanilla_unrolls_like_the_reference():
    m = VanillaLstmModel(2, 3, hidden=4, dense=5, seed=1)
    X = np.random.default_rng(2).normal(size=(7, 3, 2))
    P = {k: m.params[f"lstm.{k}"].data for k in LstmCellParams.names()}
    s = c = np.zeros((7, 4))
    for t in range(3):
        s, c = numpy_cell(X[:, t], s, c, P)
    z = np.maximum(s @ m.params["dense.W"].data + m.params["dense.b"].data, 0)
    ref = z @ m.params["head.W"].data + m.params["head.b"].data
    np.testing.assert_allclose(m.predict(X), ref, rtol=1e-12)


def test_output_shapes_and_single_window():
    v = VanillaLstmModel(2, 3, hidden=4, dense=4)
    e = EncDecLstmModel(2, 3, hidden=4, dense=4)
    X = np.zeros((5, 3, 2))
    assert v.predict(X).shape == (5, 1)
    assert e.predict(X).shape == (5, 3)
    assert e(np.zeros((3, 2))).shape == (3,)
    with pytest.raises(ShapeError):
        e.predict(np.zeros((5, 4, 2)))
    with pytest.raises(ShapeError):
        v.predict(np.zeros((5, 3, 3)))


def test_init_is_seeded_and_bounded():
    a, b = VanillaLstmModel(3, 1, seed=4), VanillaLstmModel(3, 1, seed=4)
    assert all(np.array_equal(x, y) for x, y in zip(a.get_arrays(), b.get_arrays()))
    c = VanillaLstmModel(3, 1, seed=5)
    assert not np.array_equal(a.params["lstm.X_f"].data, c.params["lstm.X_f"].data)
    assert np.abs(a.params["lstm.Z_f"].data).max() <= 1 / np.sqrt(100)


def test_build_model_rejects_unknown_kind():
    with pytest.raises(ValueError):
        build_model("gru", 2, 3)
    with pytest.raises(ValueError):
        VanillaLstmModel(2, 1, dropout=1.0)


def test_dropout_masks_replay_from_the_same_stream():
    m = VanillaLstmModel(2, 1, hidden=8, dense=8, dropout=0.5)
    X = np.ones((4, 1, 2))
    a = m.forward(Tensor(X), True, stream(0, "dropout", 0, 0)).data
    b = m.forward(Tensor(X), True, stream(0, "dropout", 0, 0)).data
    c = m.forward(Tensor(X), True, stream(0, "dropout", 0, 1)).data
    assert np.array_equal(a, b) and not np.array_equal(a, c)


@pytest.mark.parametrize("fixture", ["mini_vanilla", "mini_encdec"])
def test_parameter_gradients_match_finite_differences(fixture, request):
    m = request.getfixturevalue(fixture)
    rng = np.random.default_rng(7)
    X = rng.normal(size=(3, 3, 2))
    y = rng.normal(size=(3, m.predict(X).shape[1]))
    _, grads = ad.value_and_grad(lambda: model_loss(m, X, y))
    for name, p in m.named_parameters():
        orig = p.data.copy()

        def f(w):
            p.data = w
            return model_loss(m, X, y).item()

        fd = ad.finite_difference_gradient(f, orig)
        p.data = orig
        assert relative_error(grads[p], fd).max() < 1e-4, name
