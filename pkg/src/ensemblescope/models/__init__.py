from .base import (
    FAMILIES,
    ModelError,
    ModelSpec,
    TrainedModel,
    derive_seed,
    predict_proba,
    train,
)
from .grid import GRID_DESCRIPTION, default_grid, small_grid

__all__ = [
    "FAMILIES",
    "GRID_DESCRIPTION",
    "ModelError",
    "ModelSpec",
    "TrainedModel",
    "default_grid",
    "derive_seed",
    "predict_proba",
    "small_grid",
    "train",
]
