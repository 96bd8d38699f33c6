import numpy as np
import pytest

from tsadv.data import SeriesFrame, WindowedDataset, make_windows, synth_series, minmax_normalize, apply_rul
from tsadv.models import EncDecLstmModel, VanillaLstmModel
from tsadv.training import TrainConfig, TrainingDiverged, evaluate, rmse, train


def constant_dataset(n=200, value=0.4):
    ts = np.datetime64("2020-01-01") + np.arange(n).astype("timedelta64[D]")
    frame = SeriesFrame(timestamps=ts, values=np.full((n, 2), value), columns=["a", "b"], target="a")
    return make_windows(frame, 1)


def test_rmse_examples():
    assert rmse(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    assert rmse(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == pytest.approx(np.sqrt(12.5))


def test_learns_a_constant_series():
    ds = constant_dataset()
    m, h = train(VanillaLstmModel(2, 1, hidden=8, dense=8, dropout=0.0), ds, ds,
                 TrainConfig(epochs=300, batch_size=50, lr=0.01, patience=None))
    assert evaluate(m, ds) < 1e-3


def test_train_rmse_halves_on_the_surrogate(seasonal_splits):
    tr, va, _ = seasonal_splits
    m, h = train(VanillaLstmModel(7, 1, hidden=16, dense=16), tr, va, TrainConfig(epochs=25, patience=None))
    assert min(h.train_rmse) <= 0.5 * h.initial_train_rmse


def test_training_is_bitwise_deterministic(seasonal_splits):
    tr, va, _ = seasonal_splits
    cfg = TrainConfig(epochs=3, seed=9)
    runs = [train(VanillaLstmModel(7, 1, hidden=8, dense=8, seed=2), tr, va, cfg) for _ in range(2)]
    assert runs[0][1].batch_loss == runs[1][1].batch_loss
    assert all(np.array_equal(a, b) for a, b in zip(runs[0][0].get_arrays(), runs[1][0].get_arrays()))


def test_early_stopping_restores_best_weights(seasonal_splits):
    tr, va, _ = seasonal_splits
    m, h = train(VanillaLstmModel(7, 1, hidden=8, dense=8), tr, va,
                 TrainConfig(epochs=40, patience=2, lr=0.05))
    assert evaluate(m, va) == pytest.approx(h.val_rmse[h.best_epoch], rel=1e-12)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported_with_location(seasonal_splits):
    tr, va, _ = seasonal_splits
    bad = tr.with_inputs(np.where(np.arange(tr.inputs.size).reshape(tr.inputs.shape) == 0, np.inf, tr.inputs))
    with pytest.raises(TrainingDiverged, match="epoch 0"):
        train(VanillaLstmModel(7, 1, hidden=4, dense=4), bad, va, TrainConfig(epochs=1))


def test_config_validation():
    for kw in ({"epochs": 0}, {"batch_size": 0}, {"lr": 0}, {"clip": -1}):
        with pytest.raises(ValueError):
            TrainConfig(**kw)


def test_long_lookback_encdec_stays_finite_with_clipping():
    frame = synth_series("degradation", {"n_serials": 12, "min_life": 60, "max_life": 70}, seed=1)
    frame = minmax_normalize(apply_rul(frame, 45), 0, 255, columns=frame.input_columns)
    ds = make_windows(frame, 45, "sequence")
    m, h = train(EncDecLstmModel(ds.features, 45, hidden=8, dense=8), ds, ds,
                 TrainConfig(epochs=2, clip=0.5))
    assert np.all(np.isfinite(h.batch_loss)) and np.isfinite(evaluate(m, ds))
