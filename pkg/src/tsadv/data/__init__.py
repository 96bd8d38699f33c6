from .io import ELECTRICITY_COLUMNS, ELECTRICITY_TARGET, load_electricity, load_hdd, write_electricity, write_hdd
from .preprocess import (correlation_matrix, denormalize, denormalize_values, dropna_rows,
                         impute_column_mean, minmax_normalize, resample_daily, resample_daily_mean,
                         select_features)
from .rul import HORIZONS, RulLabel, apply_rul, label_rul
from .synth import synth_series
from .types import DataFormatError, SeriesFrame, WindowedDataset
from .windows import FoldPlan, make_windows, train_val_test_split, walk_forward_splits

__all__ = [
    "ELECTRICITY_COLUMNS", "ELECTRICITY_TARGET", "HORIZONS", "DataFormatError", "FoldPlan",
    "RulLabel", "SeriesFrame", "WindowedDataset", "apply_rul", "correlation_matrix", "denormalize",
    "denormalize_values", "dropna_rows", "impute_column_mean", "label_rul", "load_electricity",
    "load_hdd", "make_windows", "minmax_normalize", "resample_daily", "resample_daily_mean",
    "select_features", "synth_series", "train_val_test_split", "walk_forward_splits",
    "write_electricity", "write_hdd",
]
