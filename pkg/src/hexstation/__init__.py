"""Station-presence prediction on hexagonal micro-regions built from OpenStreetMap data."""

__version__ = "0.1.0"

from .config import ConfigError, ExperimentConfig, derive_seed
from .evaluation import (
    DatasetError,
    MetricsReport,
    TransferMatrix,
    compute_metrics,
    cross_city,
    eda_stats,
    select_cities,
    run_experiment,
    sweep,
    transfer_matrix,
)
from .features import FeatureBuilder, MissingEmbeddingError
from .learning import StationModel, fit_classifier, predict_proba, sample_training_set
from .predict import PredictionMap, export_geojson, predict_city
from .study_area import CellBucket, CityDataset, build_city_dataset, build_study_area, label_cells

__all__ = [
    "CellBucket",
    "CityDataset",
    "ConfigError",
    "DatasetError",
    "ExperimentConfig",
    "FeatureBuilder",
    "MetricsReport",
    "MissingEmbeddingError",
    "PredictionMap",
    "StationModel",
    "TransferMatrix",
    "build_city_dataset",
    "build_study_area",
    "compute_metrics",
    "cross_city",
    "derive_seed",
    "eda_stats",
    "select_cities",
    "export_geojson",
    "fit_classifier",
    "label_cells",
    "predict_city",
    "predict_proba",
    "run_experiment",
    "sample_training_set",
    "sweep",
    "transfer_matrix",
]
