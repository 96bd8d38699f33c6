import numpy as np
import pytest

from tsadv.attacks import AttackConfig, attack_dataset
from tsadv.defenses import (DaatConfig, LpatConfig, daat_build, defense_report, layer_radii,
                            lpat_gradient_fn, lpat_train, percent_decrease)
from tsadv.models import VanillaLstmModel
from tsadv.optim import AdamState, adam_step
from tsadv.rng import stream
from tsadv.training import TrainConfig, loss_and_grads, train


@pytest.fixture
def baseline(seasonal_splits):
    tr, va, _ = seasonal_splits
    m, _ = train(VanillaLstmModel(7, 1, hidden=8, dense=8), tr, va, TrainConfig(epochs=3))
    return m


def test_daat_size_targets_and_ball(seasonal_splits, baseline):
    tr = seasonal_splits[0].subset(range(100))
    grid = (0.05, 0.1, 0.15, 0.2, 0.25)
    aug = daat_build(tr, baseline, DaatConfig("bim", grid))
    assert len(aug) == 600
    for i, eps in enumerate(grid, start=1):
        part = slice(100 * i, 100 * (i + 1))
        assert np.array_equal(aug.targets[part], tr.targets)
        assert np.abs(aug.inputs[part] - tr.inputs).max() <= eps + 1e-12
    assert np.array_equal(aug.inputs[:100], tr.inputs)


def test_daat_zero_grid_duplicates_clean_data(seasonal_splits, baseline):
    tr = seasonal_splits[0].subset(range(20))
    aug = daat_build(tr, baseline, DaatConfig("fgsm", (0.0,)))
    assert np.array_equal(aug.inputs[20:], tr.inputs) and np.array_equal(aug.targets[20:], tr.targets)


def test_daat_is_deterministic_and_rejects_empty(seasonal_splits, baseline):
    tr = seasonal_splits[0].subset(range(30))
    cfg = DaatConfig("bim", (0.1, 0.2))
    assert daat_build(tr, baseline, cfg).content_hash() == daat_build(tr, baseline, cfg).content_hash()
    with pytest.raises(ValueError):
        daat_build(tr.subset(range(0)), baseline, cfg)


def test_config_invariants():
    for bad in (dict(kind="fgsm", eps_grid=()), dict(kind="fgsm", eps_grid=(0.2, 0.1)),
                dict(kind="x", eps_grid=(0.1,))):
        with pytest.raises(ValueError):
            DaatConfig(**bad)
    for bad in (dict(schedule="stochastic", eps_range=(0.2, 0.1)), dict(schedule="sometimes"),
                dict(eps=-1.0), dict(scale="global")):
        with pytest.raises(ValueError):
            LpatConfig(**bad)
    assert LpatConfig(schedule="stochastic").label == "SLPAT"


@pytest.mark.parametrize("scale", ["absolute", "layer"])
def test_lpat_with_zero_epsilon_is_ordinary_training(seasonal_splits, scale):
    tr, va, _ = seasonal_splits
    cfg = TrainConfig(epochs=3, seed=4)
    m1, h1 = train(VanillaLstmModel(7, 1, hidden=8, dense=8, seed=4), tr, va, cfg)
    m2, h2 = train(VanillaLstmModel(7, 1, hidden=8, dense=8, seed=4), tr, va, cfg,
                   gradient_fn=lpat_gradient_fn(LpatConfig(eps=0.0, scale=scale)))
    assert h1.batch_loss == h2.batch_loss and h1.val_rmse == h2.val_rmse
    assert all(np.array_equal(a, b) for a, b in zip(m1.get_arrays(), m2.get_arrays()))


@pytest.mark.parametrize("kind", ["fgsm", "bim"])
def test_lpat_update_uses_round_two_gradients_on_original_weights(seasonal_splits, kind):
    tr = seasonal_splits[0].subset(range(16))
    lcfg = LpatConfig(kind=kind, eps=0.05, alpha=0.01, scale="absolute")
    m = VanillaLstmModel(7, 1, hidden=6, dense=6, seed=1)
    W = m.get_arrays()

    # replay the single batch by hand
    order = stream(0, "shuffle", 0).permutation(16)
    X, y = tr.inputs[order], tr.targets[order]
    ref = VanillaLstmModel(7, 1, hidden=6, dense=6, seed=1)
    _, g1 = loss_and_grads(ref, X, y, stream(0, "dropout", 0, 0))
    if kind == "fgsm":
        Wp = [w + 0.05 * np.sign(g) for w, g in zip(W, g1)]
    else:
        Wp, g = list(W), g1
        for i in range(6):
            Wp = [np.minimum(w + 0.05, np.maximum(w - 0.05, c + 0.01 * np.sign(gi)))
                  for w, c, gi in zip(W, Wp, g)]
            if i < 5:
                ref.set_arrays(Wp)
                _, g = loss_and_grads(ref, X, y, stream(0, "dropout", 0, 0))
    ref.set_arrays(Wp)
    _, g2 = loss_and_grads(ref, X, y, stream(0, "dropout", 0, 0))
    expected, _ = adam_step(W, g2, AdamState.for_params(W))

    train(m, tr, None, TrainConfig(epochs=1, batch_size=16, restore_best=False),
          gradient_fn=lpat_gradient_fn(lcfg))
    assert all(np.array_equal(a, b) for a, b in zip(m.get_arrays(), expected))


def test_layer_radii_scale_with_weight_magnitude():
    m = VanillaLstmModel(3, 1, hidden=4, dense=4)
    r = dict(zip(m.params, layer_radii(m, 0.1, "layer")))
    lstm_mag = np.mean(np.concatenate([np.abs(p.data).ravel() for n, p in m.named_parameters()
                                       if n.startswith("lstm.")]))
    assert r["lstm.X_f"] == pytest.approx(0.1 * lstm_mag) and r["lstm.b_o"] == r["lstm.X_f"]
    assert layer_radii(m, 25.5, "layer", 255.0) == pytest.approx(layer_radii(m, 0.1, "layer"))
    assert layer_radii(m, 0.1, "absolute") == [0.1] * len(m.params)


def test_stochastic_draws_are_fresh_per_batch_and_in_range(seasonal_splits):
    tr, va, _ = seasonal_splits
    seen = []
    fn = lpat_gradient_fn(LpatConfig(schedule="stochastic", eps_range=(0.05, 0.25)))

    def spy(model, X, y, rng_factory):
        seen.append(float(rng_factory("lpat-eps").uniform(0.05, 0.25)))
        return fn(model, X, y, rng_factory)

    train(VanillaLstmModel(7, 1, hidden=4, dense=4), tr.subset(range(64)), None,
          TrainConfig(epochs=1, batch_size=16), gradient_fn=spy)
    assert len(set(seen)) == 4 and all(0.05 <= e <= 0.25 for e in seen)


def test_nan_batches_are_skipped_then_abort(seasonal_splits):
    from tsadv.training import TrainingDiverged
    tr, _, _ = seasonal_splits
    m = VanillaLstmModel(7, 1, hidden=4, dense=4)
    with np.errstate(all="ignore"), pytest.raises(TrainingDiverged, match="skipped"):
        lpat_train(tr.subset(range(64)), None, LpatConfig(eps=1e308, scale="absolute"),
                   TrainConfig(epochs=1, batch_size=16), m)


def test_percent_decrease_and_report():
    assert percent_decrease(0.2, 0.2) == 0.0
    assert percent_decrease(0.2, 0.0) == 100.0
    assert percent_decrease(0.1, 0.11) == pytest.approx(-10.0)
    attacks = {("fgsm", 0.1): 0.2, ("fgsm", 0.2): 0.4}
    rows = defense_report(attacks, {("DAAT", "fgsm", 0.1): 0.1, ("DAAT", "fgsm", 0.2): 0.5})
    assert [r["pct_decrease"] for r in rows] == pytest.approx([50.0, -25.0])
    with pytest.raises(KeyError, match="DAAT"):
        defense_report(attacks, {("DAAT", "fgsm", 0.1): 0.1})
