"""From a city dataset to the feature matrix a classifier sees."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .config import ConfigError, ExperimentConfig, derive_seed
from .embeddings import Autoencoder, NeighbourhoodEmbedder, RegionEmbedder
from .study_area import CityDataset


class MissingEmbeddingError(KeyError):
    def __init__(self, cells: Sequence[str]):
        self.cells = list(cells)
        shown = ", ".join(self.cells[:10]) + (" ..." if len(self.cells) > 10 else "")
        super().__init__(f"{len(self.cells)} cells have no region embedding: {shown}")


class FeatureBuilder:
    """Region embedding (+ optional encoder) followed by neighbourhood combination.

    ``fit`` learns whatever depends on the training city: the all-tag
    vocabulary for AT and the encoder when ``cfg.encoder_dim`` is set.
    Precomputed tables in ``ds.embeddings[cfg.region_key]`` take priority
    over computing vectors from buckets.
    """

    def __init__(self, cfg: ExperimentConfig, encoder_epochs: int = 200):
        self.cfg = cfg
        self.encoder_epochs = encoder_epochs
        self._tables: dict[int, dict] = {}

    def fit(self, train: CityDataset) -> "FeatureBuilder":
        cfg = self.cfg
        self.embedder_ = None
        self.encoder_ = None
        if cfg.region_key not in train.embeddings:
            self.embedder_ = RegionEmbedder(cfg.region_method).fit(train.buckets)
            if cfg.encoder_dim is not None:
                raw = self.embedder_.table(train.buckets)
                X = np.vstack([raw[c] for c in sorted(raw)]) if raw else np.zeros((0, self.embedder_.n_features_out_))
                self.encoder_ = Autoencoder(
                    bottleneck=cfg.encoder_dim, epochs=self.encoder_epochs, random_state=derive_seed(cfg.seed, 7)
                ).fit(X)
        self.neighbourhood_ = NeighbourhoodEmbedder(cfg.neighbourhood_K, cfg.neighbourhood_method).fit()
        return self

    def region_table(self, ds: CityDataset) -> dict[str, np.ndarray]:
        key = id(ds)
        if key in self._tables:
            return self._tables[key]
        if self.cfg.region_key in ds.embeddings:
            table = ds.embeddings[self.cfg.region_key]
        else:
            if self.embedder_ is None:
                embedder = RegionEmbedder(self.cfg.region_method).fit(ds.buckets)
                if self.cfg.encoder_dim is not None:
                    raise ConfigError(
                        f"{ds.city} has no precomputed {self.cfg.region_key} table and no encoder was trained"
                    )
            else:
                embedder = self.embedder_
            table = embedder.table(ds.buckets)
            if self.encoder_ is not None and table:
                cells = sorted(table)
                Z = self.encoder_.transform(np.vstack([table[c] for c in cells]))
                table = dict(zip(cells, Z))
        if not table:
            table = {"": np.zeros(self.dim_hint())}
        self._tables[key] = table
        return table

    def dim_hint(self) -> int:
        if self.cfg.encoder_dim is not None:
            return self.cfg.encoder_dim
        return self.embedder_.n_features_out_ if self.embedder_ is not None else 20

    def transform(self, ds: CityDataset, cells: Optional[Sequence[str]] = None) -> np.ndarray:
        cells = sorted(ds.cells) if cells is None else list(cells)
        table = self.region_table(ds)
        if self.cfg.region_key in ds.embeddings:
            missing = [c for c in cells if c not in table]
            if missing:
                raise MissingEmbeddingError(missing)
        return self.neighbourhood_.transform(cells, region_vectors=table)

    def feature_dim(self, ds: CityDataset) -> int:
        d = len(next(iter(self.region_table(ds).values())))
        return d * (self.cfg.neighbourhood_K + 1) if self.cfg.neighbourhood_method == "concatenate" else d
