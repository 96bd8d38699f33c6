"""Look-back windowing and temporal splits."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .types import SeriesFrame, WindowedDataset

log = logging.getLogger(__name__)

MODES = ("next-step", "sequence")


def _segments(frame: SeriesFrame) -> list[tuple[int, int]]:
    groups = frame.groups
    n = len(frame)
    if groups is None or n == 0:
        return [(0, n)]
    cuts = np.flatnonzero(groups[1:] != groups[:-1]) + 1
    bounds = np.concatenate([[0], cuts, [n]])
    return list(zip(bounds[:-1].tolist(), bounds[1:].tolist()))


def make_windows(frame: SeriesFrame, lookback: int, mode: str = "next-step") -> WindowedDataset:
    """Slide a stride-1 window of ``lookback`` rows over the frame.

    ``next-step``: rows t-L..t-1 predict the target column at row t, giving
    ``len - L`` windows per segment. ``sequence``: rows t-L..t-1 are paired
    with the target values of those same rows, giving ``len - L + 1`` windows.
    Windows never cross a ``serial_number`` boundary; segments too short for
    one window are skipped.
    """
    if mode not in MODES:
        raise ValueError(f"unknown window mode {mode!r}")
    if lookback < 1:
        raise ValueError("lookback must be >= 1")
    if frame.groups is None and len(frame) < lookback + 1:
        raise ValueError(f"frame of length {len(frame)} is too short for lookback {lookback}")
    X_all = frame.input_matrix()
    y_all = frame.col(frame.target)
    if np.isnan(X_all).any() or np.isnan(y_all).any():
        raise ValueError("frame still contains missing values; impute or drop them first")

    xs, ys, tin, tout, gs = [], [], [], [], []
    extra = 0 if mode == "next-step" else 1
    for a, b in _segments(frame):
        count = b - a - lookback + extra
        if count <= 0:
            log.debug("segment [%d, %d) too short for lookback %d", a, b, lookback)
            continue
        win = sliding_window_view(X_all[a:b], lookback, axis=0)[:count]  # count x F x L
        xs.append(np.transpose(win, (0, 2, 1)))
        times = sliding_window_view(frame.timestamps[a:b], lookback)[:count]
        tin.append(times)
        if mode == "next-step":
            ys.append(y_all[a + lookback:b, None])
            tout.append(frame.timestamps[a + lookback:b])
        else:
            ys.append(sliding_window_view(y_all[a:b], lookback)[:count])
            tout.append(times)
        if frame.groups is not None:
            gs.append(np.full(count, frame.groups[a], dtype=object))
    if not xs:
        raise ValueError(f"no segment is long enough for lookback {lookback}")
    return WindowedDataset(
        inputs=np.ascontiguousarray(np.concatenate(xs)),
        targets=np.ascontiguousarray(np.concatenate(ys)),
        lookback=lookback,
        input_times=np.concatenate(tin),
        target_times=np.concatenate(tout),
        groups=np.concatenate(gs) if gs else None,
        provenance={"frame": frame.name, "frame_hash": frame.content_hash(), "mode": mode},
    )


@dataclass(frozen=True)
class FoldPlan:
    """Expanding-window folds: each validates on the block after its training span."""

    k: int
    folds: tuple[tuple[range, range], ...]

    def __iter__(self):
        return iter(self.folds)

    def __len__(self) -> int:
        return len(self.folds)


def walk_forward_splits(n_samples: int, k: int) -> FoldPlan:
    """Cut ``n_samples`` into k+1 contiguous blocks; fold i trains on blocks
    0..i and validates on block i+1. The remainder goes to the last block."""
    if k < 2:
        raise ValueError("walk-forward CV needs k >= 2")
    if n_samples < k + 1:
        raise ValueError(f"k={k} folds need at least {k + 1} samples, got {n_samples}")
    size = n_samples // (k + 1)
    folds = []
    for i in range(k):
        end_train = (i + 1) * size
        end_val = n_samples if i == k - 1 else end_train + size
        folds.append((range(0, end_train), range(end_train, end_val)))
    return FoldPlan(k, tuple(folds))


def train_val_test_split(n: int, fractions=(0.8, 0.1, 0.1)) -> tuple[range, range, range]:
    """Contiguous, order-preserving split of ``range(n)``."""
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ValueError("need three non-negative fractions")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    a = int(round(n * fractions[0]))
    b = int(round(n * (fractions[0] + fractions[1])))
    parts = (range(0, a), range(a, b), range(b, n))
    for name, r in zip(("train", "validation", "test"), parts):
        if len(r) == 0:
            raise ValueError(f"{name} split is empty for n={n}, fractions={tuple(fractions)}")
    return parts
