"""Adversarial attacks (FGSM, BIM) and adversarial-training defenses (DAAT, LPAT)
for LSTM time-series forecasters, on a small numpy reverse-mode autodiff core."""

from .attacks import AttackConfig, attack, bim, bim_iterations, fgsm
from .autodiff import Tensor, Tape, backward, finite_difference_gradient, value_and_grad
from .defenses import DaatConfig, LpatConfig, daat_build, daat_train, defense_report, lpat_train
from .models import EncDecLstmModel, VanillaLstmModel, build_model
from .training import TrainConfig, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "AttackConfig", "DaatConfig", "EncDecLstmModel", "LpatConfig", "Tape", "Tensor", "TrainConfig",
    "VanillaLstmModel", "attack", "backward", "bim", "bim_iterations", "build_model", "daat_build",
    "daat_train", "defense_report", "evaluate", "fgsm", "finite_difference_gradient", "lpat_train",
    "train", "value_and_grad",
]
