"""White-box gradient-sign evasion attacks on trained forecasters.

Both attacks perturb every input feature of every window (lagged target
values included) and leave the targets alone. Gradients come from the
evaluation-mode forward pass, so dropout never enters an attack.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from pathlib import Path

import numpy as np
import pandas as pd

from . import autodiff as ad
from .autodiff import Tensor
from .models import ForecastModel

KINDS = ("fgsm", "bim")
DEFAULT_ALPHA = 0.01


@dataclass(frozen=True)
class AttackConfig:
    kind: str
    eps: float
    alpha: float = DEFAULT_ALPHA
    iterations: int | None = None
    clamp: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if not self.eps > 0:
            raise ValueError(f"epsilon must be positive, got {self.eps}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.kind == "bim" and self.alpha > self.eps:
            raise ValueError(f"BIM step alpha={self.alpha} exceeds epsilon={self.eps}")
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass
class AdversarialBatch:
    clean: np.ndarray
    perturbed: np.ndarray
    targets: np.ndarray
    linf: np.ndarray
    l2: np.ndarray
    config: AttackConfig
    iterations: int = 1
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.clean)


def input_gradient(model: ForecastModel, X: np.ndarray, y: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Gradient of the batch loss (per-sample MSE summed over windows) w.r.t. ``X``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = np.empty_like(X)
    with model.frozen():
        for s in range(0, len(X), chunk):
            xt = Tensor(X[s:s + chunk], requires_grad=True)
            with ad.Tape() as tape:
                pred = model.forward(xt, train_mode=False)
                loss = ad.mse(pred, Tensor(y[s:s + chunk].reshape(pred.shape)), reduction="sum")
            out[s:s + chunk] = ad.backward(tape, loss)[xt]
    return out


def _finish(model, X, Xadv, y, cfg, iterations) -> AdversarialBatch:
    if cfg.clamp is not None:
        Xadv = np.clip(Xadv, cfg.clamp[0], cfg.clamp[1])
    d = (Xadv - X).reshape(len(X), -1)
    return AdversarialBatch(clean=X, perturbed=Xadv, targets=y,
                            linf=np.abs(d).max(axis=1) if d.size else np.zeros(len(X)),
                            l2=np.sqrt((d * d).sum(axis=1)), config=cfg, iterations=iterations)


def fgsm(model: ForecastModel, X, y, eps: float, clamp: tuple[float, float] | None = None) -> AdversarialBatch:
    """Single signed-gradient step of size ``eps``."""
    cfg = AttackConfig("fgsm", eps, clamp=clamp)
    X = np.asarray(X, dtype=np.float64)
    g = input_gradient(model, X, y)
    return _finish(model, X, X + cfg.eps * np.sign(g), np.asarray(y), cfg, 1)


def bim_iterations(eps: float, alpha: float) -> int:
    """Step count min(4 + eps/alpha, 1.25 * eps/alpha), rounded half-up, at least 1.

    The ratio is taken on the decimal values as written (0.1 / 0.01 == 10
    exactly), so grid values do not pick up binary-float noise.
    """
    if not (eps > 0 and alpha > 0):
        raise ValueError("eps and alpha must be positive")
    ratio = Fraction(repr(float(eps))) / Fraction(repr(float(alpha)))
    raw = min(4 + ratio, Fraction(5, 4) * ratio)
    return max(1, math.floor(raw + Fraction(1, 2)))


def bim(model: ForecastModel, X, y, eps: float, alpha: float = DEFAULT_ALPHA,
        iterations: int | None = None, clamp: tuple[float, float] | None = None) -> AdversarialBatch:
    """Iterated signed-gradient steps of size ``alpha`` projected into the eps-ball."""
    cfg = AttackConfig("bim", eps, alpha, iterations, clamp)
    n_iter = iterations if iterations is not None else bim_iterations(eps, alpha)
    X = np.asarray(X, dtype=np.float64)
    lo, hi = X - eps, X + eps
    Xadv = X.copy()
    for _ in range(n_iter):
        g = input_gradient(model, Xadv, y)
        Xadv = Xadv + alpha * np.sign(g)
        Xadv = np.minimum(hi, np.maximum(lo, Xadv))
    return _finish(model, X, Xadv, np.asarray(y), cfg, n_iter)


def attack(model: ForecastModel, X, y, cfg: AttackConfig) -> AdversarialBatch:
    if cfg.kind == "fgsm":
        return fgsm(model, X, y, cfg.eps, cfg.clamp)
    return bim(model, X, y, cfg.eps, cfg.alpha, cfg.iterations, cfg.clamp)


def attack_dataset(model: ForecastModel, dataset, cfg: AttackConfig):
    """Attack every window of ``dataset``; returns (batch, perturbed dataset)."""
    batch = attack(model, dataset.inputs, dataset.targets, cfg)
    return batch, dataset.with_inputs(batch.perturbed, attack=cfg.kind, eps=cfg.eps)


def imperceptibility_report(batch: AdversarialBatch, feature_names: list[str] | None = None,
                            max_series: int | None = None) -> dict:
    """Per-feature perturbation statistics plus clean/perturbed overlay series.

    ``rows`` holds one entry per (sample, feature) with that feature's L-inf
    and L2 distance over the window. ``series`` lines up the last time step of
    each window, clean against perturbed, for overlay plots.
    """
    if len(batch) == 0:
        raise ValueError("empty adversarial batch")
    n, L, F = batch.clean.shape
    names = feature_names or [f"f{j}" for j in range(F)]
    d = batch.perturbed - batch.clean
    linf = np.abs(d).max(axis=1)          # n x F
    l2 = np.sqrt((d * d).sum(axis=1))     # n x F
    rows = [{"sample": i, "feature": names[j], "linf": float(linf[i, j]), "l2": float(l2[i, j])}
            for i in range(n) for j in range(F)]
    features = {names[j]: {"max_linf": float(linf[:, j].max()), "mean_linf": float(linf[:, j].mean()),
                           "max_l2": float(l2[:, j].max()), "mean_l2": float(l2[:, j].mean())}
                for j in range(F)}
    m = n if max_series is None else min(n, max_series)
    series = {names[j]: {"clean": batch.clean[:m, -1, j].tolist(),
                         "perturbed": batch.perturbed[:m, -1, j].tolist()} for j in range(F)}
    return {"attack": batch.config.kind, "eps": batch.config.eps, "iterations": batch.iterations,
            "max_linf": float(linf.max()), "mean_linf": float(linf.mean()),
            "max_l2": float(batch.l2.max()), "mean_l2": float(batch.l2.mean()),
            "features": features, "rows": rows, "series": series}


def save_batch(batch: AdversarialBatch, directory, stem: str, feature_names: list[str] | None = None) -> dict:
    """Write clean/perturbed CSVs (one row per window step) and a JSON stats block."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n, L, F = batch.clean.shape
    names = feature_names or [f"f{j}" for j in range(F)]
    idx = pd.MultiIndex.from_product([range(n), range(L)], names=["sample", "step"])
    paths = {}
    for tag, arr in (("clean", batch.clean), ("perturbed", batch.perturbed)):
        p = directory / f"{stem}_{tag}.csv"
        pd.DataFrame(arr.reshape(n * L, F), index=idx, columns=names).to_csv(p, float_format="%.17g")
        paths[tag] = str(p)
    rep = imperceptibility_report(batch, names)
    stats = {k: v for k, v in rep.items() if k not in ("rows", "series")}
    stats["config"] = asdict(batch.config)
    p = directory / f"{stem}_stats.json"
    p.write_text(json.dumps(stats, indent=2, sort_keys=True))
    paths["stats"] = str(p)
    return paths
