from __future__ import annotations

import logging
import warnings

import numpy as np
import pandas as pd

from .types import SeriesFrame

log = logging.getLogger(__name__)


def impute_column_mean(frame: SeriesFrame, columns: list[str] | None = None) -> SeriesFrame:
    """Replace each missing cell by the mean of its column's observed values."""
    values = frame.values.copy()
    for name in columns or frame.columns:
        j = frame.columns.index(name)
        col = values[:, j]
        miss = np.isnan(col)
        if not miss.any():
            continue
        if miss.all():
            raise ValueError(f"column {name!r} has no observed values to impute from")
        col[miss] = col[~miss].mean()
    return frame.with_values(values)


def resample_daily(frame: SeriesFrame, how: str = "mean") -> SeriesFrame:
    """Aggregate rows to one per calendar day (days without rows are absent)."""
    if how not in ("mean", "sum"):
        raise ValueError(f"unknown aggregation {how!r}")
    if frame.groups is not None:
        raise ValueError("daily resampling of grouped drive logs is not supported")
    df = pd.DataFrame(frame.values, columns=frame.columns)
    day = pd.to_datetime(frame.timestamps).floor("D")
    grouped = df.groupby(day, sort=True)
    out = grouped.mean() if how == "mean" else grouped.sum(min_count=1)
    return SeriesFrame(timestamps=out.index.to_numpy(dtype="datetime64[s]"),
                       values=out.to_numpy(dtype=np.float64), columns=list(frame.columns),
                       target=frame.target, inputs=frame.inputs, norm=dict(frame.norm),
                       name=frame.name)


def resample_daily_mean(frame: SeriesFrame) -> SeriesFrame:
    return resample_daily(frame, "mean")


def minmax_normalize(frame: SeriesFrame, lo: float = 0.0, hi: float = 1.0,
                     columns: list[str] | None = None) -> SeriesFrame:
    """Scale columns linearly so each column's min maps to ``lo`` and max to ``hi``.

    Constant columns map to ``lo``. Parameters are kept in ``frame.norm`` so
    :func:`denormalize` can invert the mapping.
    """
    if not hi > lo:
        raise ValueError("normalization range needs hi > lo")
    values = frame.values.copy()
    norm = dict(frame.norm)
    for name in columns or frame.columns:
        j = frame.columns.index(name)
        col = values[:, j]
        if np.isnan(col).all():
            continue
        cmin, cmax = float(np.nanmin(col)), float(np.nanmax(col))
        if cmax > cmin:
            values[:, j] = np.clip(lo + (hi - lo) * (col - cmin) / (cmax - cmin), lo, hi)
        else:
            log.warning("column %r is constant; mapped to %g", name, lo)
            values[:, j] = np.where(np.isnan(col), np.nan, lo)
        norm[name] = (cmin, cmax, float(lo), float(hi))
    return frame.with_values(values, norm=norm)


def denormalize_values(values, params: tuple[float, float, float, float]) -> np.ndarray:
    cmin, cmax, lo, hi = params
    values = np.asarray(values, dtype=np.float64)
    if cmax == cmin:
        return np.full_like(values, cmin)
    return cmin + (values - lo) * (cmax - cmin) / (hi - lo)


def denormalize(frame: SeriesFrame) -> SeriesFrame:
    values = frame.values.copy()
    for name, params in frame.norm.items():
        j = frame.columns.index(name)
        values[:, j] = denormalize_values(values[:, j], params)
    return frame.with_values(values, norm={})


def dropna_rows(frame: SeriesFrame, columns: list[str] | None = None) -> SeriesFrame:
    idx = [frame.columns.index(c) for c in (columns or frame.columns)]
    keep = ~np.isnan(frame.values[:, idx]).any(axis=1)
    return frame.take(np.flatnonzero(keep))


def correlation_matrix(frame: SeriesFrame, columns: list[str] | None = None) -> np.ndarray:
    """Pearson correlation between columns; zero-variance pairs read as 0."""
    cols = columns or frame.columns
    X = frame.values[:, [frame.columns.index(c) for c in cols]]
    if len(X) < 2:
        raise ValueError("correlation needs at least two samples")
    Xc = X - X.mean(axis=0)
    ss = np.sqrt((Xc * Xc).sum(axis=0))
    flat = ss == 0
    if flat.any():
        warnings.warn(f"zero-variance columns {[c for c, f in zip(cols, flat) if f]}; "
                      "their correlations are set to 0", RuntimeWarning, stacklevel=2)
    denom = np.outer(ss, ss)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(denom > 0, (Xc.T @ Xc) / np.where(denom > 0, denom, 1.0), 0.0)
    corr = np.clip(corr, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def select_features(frame: SeriesFrame, top: int | None = None,
                    threshold: float | None = None) -> SeriesFrame:
    """Keep the columns most correlated (in absolute value) with the target.

    Exactly one of ``top`` (keep the m best) or ``threshold`` (keep |r| >= t)
    must be given. The target always ranks first. Column order is preserved.
    """
    if (top is None) == (threshold is None):
        raise ValueError("give exactly one of top or threshold")
    corr = correlation_matrix(frame)
    t = frame.columns.index(frame.target)
    score = np.abs(corr[t])
    if top is not None:
        if top < 1:
            raise ValueError("top must be >= 1")
        order = sorted(range(len(frame.columns)), key=lambda j: (-score[j], j))
        keep = set(order[:top])
    else:
        keep = {j for j in range(len(frame.columns)) if score[j] >= threshold}
    keep.add(t)
    return frame.select([c for j, c in enumerate(frame.columns) if j in keep])
