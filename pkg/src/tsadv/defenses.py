"""Adversarial-training defenses.

DAAT (data-augmentation adversarial training) attacks the training windows
with a frozen baseline over a grid of epsilons and trains a fresh model on the
clean windows plus every adversarial copy, targets unchanged.

LPAT (layer-wise perturbation adversarial training) runs two forward/backward
rounds per batch. Round one yields per-layer gradients G at the current
weights W; every layer is then pushed to W' = W + eps * sign(G) (or the
projected iterative version of that step), round two computes gradients at
W', and the optimizer applies those round-two gradients to the original W.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from .attacks import KINDS, AttackConfig, DEFAULT_ALPHA, attack, bim_iterations
from .data.types import WindowedDataset
from .models import ForecastModel
from .training import History, TrainConfig, evaluate, loss_and_grads, train

log = logging.getLogger(__name__)

# "absolute": every weight moves by eps. "layer": a layer's radius is
# eps / data_range times the mean magnitude of that layer's weights, so an eps
# given in data units becomes the same fraction of each layer's weight scale.
SCALES = ("absolute", "layer")


@dataclass(frozen=True)
class DaatConfig:
    kind: str
    eps_grid: tuple[float, ...]
    alpha: float = DEFAULT_ALPHA
    fresh_init: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        grid = tuple(float(e) for e in self.eps_grid)
        if not grid:
            raise ValueError("epsilon grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("epsilon grid must be strictly increasing")
        if grid[0] < 0:
            raise ValueError("epsilons must be non-negative")
        object.__setattr__(self, "eps_grid", grid)


@dataclass(frozen=True)
class LpatConfig:
    kind: str = "fgsm"
    schedule: str = "deterministic"
    eps: float = 0.15
    eps_range: tuple[float, float] = (0.05, 0.25)
    alpha: float = DEFAULT_ALPHA
    scale: str = "layer"
    data_range: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.scale not in SCALES:
            raise ValueError(f"unknown perturbation scale {self.scale!r}")
        if self.schedule == "deterministic":
            if self.eps < 0:
                raise ValueError("deterministic epsilon must be >= 0")
        elif self.schedule == "stochastic":
            lo, hi = self.eps_range
            if not 0 < lo < hi:
                raise ValueError(f"stochastic range needs 0 < lo < hi, got {self.eps_range}")
        else:
            raise ValueError(f"unknown LPAT schedule {self.schedule!r}")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.data_range <= 0:
            raise ValueError("data_range must be positive")

    @property
    def label(self) -> str:
        return "DLPAT" if self.schedule == "deterministic" else "SLPAT"


# ---------------------------------------------------------------------------
# DAAT


def daat_build(train_set: WindowedDataset, baseline: ForecastModel, cfg: DaatConfig) -> WindowedDataset:
    """Clean windows followed by one adversarial copy per epsilon (targets kept)."""
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    parts = [train_set]
    for eps in cfg.eps_grid:
        if eps == 0:
            parts.append(train_set.with_inputs(train_set.inputs.copy(), attack=cfg.kind, eps=0.0))
            continue
        acfg = AttackConfig(cfg.kind, eps, min(cfg.alpha, eps))
        batch = attack(baseline, train_set.inputs, train_set.targets, acfg)
        parts.append(train_set.with_inputs(batch.perturbed, attack=cfg.kind, eps=eps))
    return WindowedDataset.concat(parts, augmented=f"daat-{cfg.kind}", eps_grid=list(cfg.eps_grid))


@dataclass
class DefenseResult:
    name: str
    kind: str
    model: ForecastModel
    history: History
    train_rmse: float
    val_rmse: float
    test_clean_rmse: float
    test_poisoned_rmse: dict[float, float]

    def summary(self) -> dict:
        poisoned = list(self.test_poisoned_rmse.values())
        return {"defense": self.name, "attack": self.kind, "train": self.train_rmse,
                "validation": self.val_rmse, "test_clean": self.test_clean_rmse,
                "test_poisoned": float(np.mean(poisoned)) if poisoned else float("nan")}


def _fresh(baseline: ForecastModel) -> ForecastModel:
    d = baseline.descriptor()
    return type(baseline)(features=d["features"], lookback=d["lookback"], hidden=d["hidden"],
                          dense=d["dense"], dropout=d["dropout"], seed=d["seed"])


def _score(name, kind, model, hist, train_set, val, test, poisoned_tests) -> DefenseResult:
    return DefenseResult(
        name=name, kind=kind, model=model, history=hist,
        train_rmse=evaluate(model, train_set),
        val_rmse=evaluate(model, val) if val is not None and len(val) else float("nan"),
        test_clean_rmse=evaluate(model, test) if test is not None else float("nan"),
        test_poisoned_rmse={eps: evaluate(model, ds) for eps, ds in (poisoned_tests or {}).items()},
    )


def daat_train(train_set: WindowedDataset, val: WindowedDataset, baseline: ForecastModel,
               cfg: DaatConfig, train_cfg: TrainConfig, test: WindowedDataset | None = None,
               poisoned_tests: dict[float, WindowedDataset] | None = None) -> DefenseResult:
    """Train a robust model on the DAAT-augmented set and score it.

    The train RMSE is measured on the augmented set the model saw.
    """
    augmented = daat_build(train_set, baseline, cfg)
    model = _fresh(baseline) if cfg.fresh_init else baseline.clone()
    model, hist = train(model, augmented, val, train_cfg)
    return _score("DAAT", cfg.kind, model, hist, augmented, val, test, poisoned_tests)


# ---------------------------------------------------------------------------
# LPAT


def layer_radii(model: ForecastModel, eps: float, scale: str, data_range: float = 1.0) -> list[float]:
    """Per-tensor perturbation radius; tensors of one layer share a radius."""
    named = list(model.named_parameters())
    if scale == "absolute":
        return [eps] * len(named)
    eps = eps / data_range
    layers: dict[str, list[np.ndarray]] = {}
    for name, p in named:
        layers.setdefault(name.split(".")[0], []).append(np.abs(p.data).ravel())
    mag = {k: float(np.concatenate(v).mean()) for k, v in layers.items()}
    return [eps * mag[name.split(".")[0]] for name, _ in named]


def perturb_parameters(model: ForecastModel, X, y, grads: Sequence[np.ndarray], eps: float,
                       cfg: LpatConfig, rng_factory) -> list[np.ndarray]:
    """Adversarial weights W' around the model's current weights.

    FGSM mode takes one signed step along ``grads``; BIM mode takes
    ``alpha``-sized steps, recomputing gradients and projecting onto the
    per-component box around W after each. Step and box sizes are multiplied
    by each layer's radius factor (see :func:`layer_radii`).
    """
    W = [p.data for p in model.parameters()]
    radii = layer_radii(model, eps, cfg.scale, cfg.data_range)
    if cfg.kind == "fgsm" or eps == 0:
        return [w + r * np.sign(g) for w, g, r in zip(W, grads, radii)]
    alpha = min(cfg.alpha, eps)
    steps = bim_iterations(eps, alpha)
    steps_size = [r * alpha / eps for r in radii]
    lo = [w - r for w, r in zip(W, radii)]
    hi = [w + r for w, r in zip(W, radii)]
    cur, g = list(W), list(grads)
    params = model.parameters()
    for i in range(steps):
        cur = [np.minimum(h, np.maximum(l, c + a * np.sign(gi)))
               for c, gi, l, h, a in zip(cur, g, lo, hi, steps_size)]
        if i + 1 < steps:
            for p, c in zip(params, cur):
                p.data = c
            _, g = loss_and_grads(model, X, y, rng_factory())
            for p, w in zip(params, W):
                p.data = w
    return cur


def lpat_gradient_fn(cfg: LpatConfig):
    """Gradient callback for :func:`tsadv.training.train` implementing LPAT."""

    def gradients(model, X, y, rng_factory):
        if cfg.schedule == "deterministic":
            eps = cfg.eps
        else:
            eps = float(rng_factory("lpat-eps").uniform(*cfg.eps_range))
        loss1, g1 = loss_and_grads(model, X, y, rng_factory())
        params = model.parameters()
        W = [p.data for p in params]
        Wp = perturb_parameters(model, X, y, g1, eps, cfg, rng_factory)
        try:
            for p, w in zip(params, Wp):
                p.data = w
            loss2, g2 = loss_and_grads(model, X, y, rng_factory())
        finally:
            for p, w in zip(params, W):
                p.data = w
        if not np.isfinite(loss2) or not all(np.all(np.isfinite(g)) for g in g2):
            log.warning("LPAT: non-finite loss at perturbed weights (eps=%g); batch skipped", eps)
            return loss2, None
        return loss2, g2

    return gradients


def lpat_train(train_set: WindowedDataset, val: WindowedDataset, cfg: LpatConfig,
               train_cfg: TrainConfig, model: ForecastModel,
               test: WindowedDataset | None = None,
               poisoned_tests: dict[float, WindowedDataset] | None = None) -> DefenseResult:
    """Train ``model`` (fresh, untrained) with LPAT; aborts past 10% skipped batches."""
    model, hist = train(model, train_set, val, train_cfg, gradient_fn=lpat_gradient_fn(cfg),
                        max_skip_fraction=0.1)
    return _score(cfg.label, cfg.kind, model, hist, train_set, val, test, poisoned_tests)


# ---------------------------------------------------------------------------
# reporting


def percent_decrease(attack_rmse: float, defended_rmse: float) -> float:
    return 100.0 * (attack_rmse - defended_rmse) / attack_rmse


def defense_report(attack_rmse: dict[tuple[str, float], float],
                   defended_rmse: dict[tuple[str, str, float], float]) -> list[dict]:
    """Long-form %-decrease table.

    ``attack_rmse`` maps (attack kind, eps) to the undefended model's RMSE;
    ``defended_rmse`` maps (defense, attack kind, eps) to the defended model's
    RMSE on the same poisoned test set. Every defense must cover every eps of
    its attack kind.
    """
    defenses = sorted({(d, k) for d, k, _ in defended_rmse})
    missing = [(d, k, e) for d, k in defenses for (k2, e) in sorted(attack_rmse)
               if k2 == k and (d, k, e) not in defended_rmse]
    missing += [key for key in defended_rmse if (key[1], key[2]) not in attack_rmse]
    if missing:
        raise KeyError(f"defense report has absent cells: {missing}")
    rows = []
    for kind in KINDS:
        for d, k in defenses:
            if k != kind:
                continue
            for (k2, eps) in sorted(attack_rmse):
                if k2 != kind:
                    continue
                a, r = attack_rmse[(k2, eps)], defended_rmse[(d, k, eps)]
                rows.append({"attack": kind, "defense": d, "eps": eps, "attack_rmse": a,
                             "defended_rmse": r, "pct_decrease": percent_decrease(a, r)})
    return rows


def config_dict(cfg) -> dict:
    return asdict(cfg)
