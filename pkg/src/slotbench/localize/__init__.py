from .features import (
    VARIANTS,
    coordinate_labels,
    extract_features,
    mask_centroids,
    state_coordinates,
)
from .mlp import Localizer, predict_coordinates, train_localizer, train_localizer_frozen
from .pck import PCKReport, pck, pck_csv

__all__ = [
    "Localizer",
    "PCKReport",
    "VARIANTS",
    "coordinate_labels",
    "extract_features",
    "mask_centroids",
    "pck",
    "pck_csv",
    "predict_coordinates",
    "state_coordinates",
    "train_localizer",
    "train_localizer_frozen",
]
