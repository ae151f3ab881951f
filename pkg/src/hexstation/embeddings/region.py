"""Region vectors built from cell buckets.

Axis layouts are frozen; reordering them invalidates every stored embedding.

``CC``  20 axes, object counts per category in :data:`CATEGORIES` order.
``SA``  36 axes: (area m², point count) for each of the 16 shape categories in
        :data:`CATEGORIES` order, then water area, then bike, drive and walk
        road lengths (m).
``ST``  888 axes over the selected tag table: (area, count) per tag row, one
        area axis for water and one length axis per road row.
``AT``  (area, count) per row of a corpus-derived tag vocabulary.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..config import ConfigError
from ..osm.tags import (
    CATEGORIES,
    ROAD_CATEGORIES,
    SHAPE_CATEGORIES,
    Category,
    TagVocabulary,
    build_all_tag_vocab,
    classify,
    selected_vocabulary,
)
from ..study_area import CellBucket

METHODS = ("CC", "SA", "ST", "AT")
CC_DIM = len(CATEGORIES)
SA_DIM = 2 * len(SHAPE_CATEGORIES) + 1 + len(ROAD_CATEGORIES)

SA_AXES: tuple[str, ...] = tuple(
    [f"{c.value}_{m}" for c in SHAPE_CATEGORIES for m in ("area", "count")]
    + ["water_area"]
    + [f"{c.value}_length" for c in ROAD_CATEGORIES]
)



def _tag_match(tag: str):
    key, _, value = tag.partition("=")
    return classify({key: value})


def embed_cc(b: CellBucket) -> np.ndarray:
    return np.array([float(b.counts.get(c, 0)) for c in CATEGORIES])


def embed_sa(b: CellBucket) -> np.ndarray:
    v = []
    for c in SHAPE_CATEGORIES:
        v.append(float(b.area_sums.get(c, 0.0)))
        v.append(float(b.point_counts.get(c, 0)))
    v.append(float(b.area_sums.get(Category.WATER, 0.0)))
    v.extend(float(b.length_sums.get(c, 0.0)) for c in ROAD_CATEGORIES)
    return np.array(v)


def embed_tags(b: CellBucket, vocab: TagVocabulary) -> np.ndarray:
    v = np.zeros(vocab.dim)
    for tag, area in b.tag_areas.items():
        m = _tag_match(tag)
        i = None if m is None else vocab.index_of(m)
        if i is not None and not vocab.entries[i].single_measure:
            v[vocab.offset(i)] += area
    for tag, n in b.tag_counts.items():
        m = _tag_match(tag)
        i = None if m is None else vocab.index_of(m)
        if i is not None and not vocab.entries[i].single_measure:
            v[vocab.offset(i) + 1] += n
    i = vocab.category_index(Category.WATER)
    if i is not None:
        v[vocab.offset(i)] += b.area_sums.get(Category.WATER, 0.0)
    for cat in ROAD_CATEGORIES:
        i = vocab.category_index(cat)
        if i is not None:
            v[vocab.offset(i)] += b.length_sums.get(cat, 0.0)
    return v


def embed_region(b: CellBucket, method: str, vocab: Optional[TagVocabulary] = None) -> np.ndarray:
    """Vector of one cell under ``method`` (one of CC, SA, ST, AT)."""
    if method == "CC":
        return embed_cc(b)
    if method == "SA":
        return embed_sa(b)
    if method in ("ST", "AT"):
        if vocab is None:
            raise ConfigError(f"the {method} method needs a tag vocabulary")
        return embed_tags(b, vocab)
    raise ConfigError(f"unknown region method {method!r}; expected one of {METHODS}")


def bucket_tag_maps(buckets: Iterable[CellBucket]) -> list[dict[str, str]]:
    """One single-tag map per deciding tag seen in the buckets."""
    seen = set()
    for b in buckets:
        seen.update(b.tag_counts)
        seen.update(b.tag_areas)
    out = []
    for tag in sorted(seen):
        k, _, v = tag.partition("=")
        out.append({k: v})
    return out


class RegionEmbedder(TransformerMixin, BaseEstimator):
    """Maps cell buckets to fixed-length region vectors.

    Parameters
    ----------
    method : {'CC', 'SA', 'ST', 'AT'}
    vocabulary : TagVocabulary, optional
        Used by ST/AT. ST defaults to the selected tag table; AT builds one
        from the buckets passed to :meth:`fit` when not given.
    """

    def __init__(self, method: str = "CC", vocabulary: Optional[TagVocabulary] = None):
        self.method = method
        self.vocabulary = vocabulary

    def fit(self, buckets=None, y=None):
        if self.method not in METHODS:
            raise ConfigError(f"unknown region method {self.method!r}")
        vocab = self.vocabulary
        if self.method == "ST" and vocab is None:
            vocab = selected_vocabulary()
        if self.method == "AT" and vocab is None:
            if buckets is None:
                raise ConfigError("AT needs buckets (or a vocabulary) to fit")
            vocab = build_all_tag_vocab(bucket_tag_maps(_as_buckets(buckets)))
        self.vocabulary_ = vocab
        self.n_features_out_ = {"CC": CC_DIM, "SA": SA_DIM}.get(self.method) or vocab.dim
        return self

    def transform(self, buckets) -> np.ndarray:
        check_is_fitted(self, "n_features_out_")
        rows = [embed_region(b, self.method, self.vocabulary_) for b in _as_buckets(buckets)]
        if not rows:
            return np.zeros((0, self.n_features_out_))
        return np.vstack(rows)

    def table(self, buckets: Mapping[str, CellBucket]) -> dict[str, np.ndarray]:
        """Cell -> vector for a bucket mapping."""
        cells = sorted(buckets)
        X = self.transform([buckets[c] for c in cells])
        return dict(zip(cells, X))


def _as_buckets(buckets) -> list[CellBucket]:
    if isinstance(buckets, Mapping):
        return [buckets[c] for c in sorted(buckets)]
    return list(buckets)
