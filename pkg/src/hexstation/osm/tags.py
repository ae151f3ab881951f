"""OSM tag tables: the 20 object categories and the tag vocabularies.

Category precedence follows :data:`CATEGORIES` order, except that
``buildings`` is only a fallback for objects no other category claims.
Roads are non-exclusive: one way may be bike, drive and walk at once.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, NamedTuple, Optional


class Category(str, enum.Enum):
    AERIALWAY = "aerialway"
    AIRPORTS = "airports"
    BUILDINGS = "buildings"
    CULTURE_AND_ENTERTAINMENT = "culture_and_entertainment"
    EDUCATION = "education"
    EMERGENCY = "emergency"
    FINANCES = "finances"
    HEALTHCARE = "healthcare"
    HISTORIC = "historic"
    LEISURE = "leisure"
    OTHER = "other"
    ROADS_BIKE = "roads_bike"
    ROADS_DRIVE = "roads_drive"
    ROADS_WALK = "roads_walk"
    SHOPS = "shops"
    SPORT = "sport"
    SUSTENANCE = "sustenance"
    TOURISM = "tourism"
    TRANSPORTATION = "transportation"
    WATER = "water"

    def __str__(self):
        return self.value


#: Fixed axis order for every per-category vector.
CATEGORIES: tuple[Category, ...] = tuple(Category)
ROAD_CATEGORIES = (Category.ROADS_BIKE, Category.ROADS_DRIVE, Category.ROADS_WALK)
#: The 16 categories measured as (area, count) pairs.
SHAPE_CATEGORIES: tuple[Category, ...] = tuple(
    c for c in CATEGORIES if c not in ROAD_CATEGORIES and c is not Category.WATER
)

WILDCARD = "*"

_DRIVE = {
    "motorway", "motorway_link", "trunk", "trunk_link", "primary", "primary_link",
    "secondary", "secondary_link", "tertiary", "tertiary_link", "unclassified",
    "residential", "living_street", "service", "road",
}
_SHARED = {
    "primary", "primary_link", "secondary", "secondary_link", "tertiary", "tertiary_link",
    "unclassified", "residential", "living_street", "service", "road",
}
_BIKE = _SHARED | {"cycleway", "path", "track", "busway"}
_WALK = _SHARED | {"pedestrian", "footway", "path", "steps", "track", "bridleway", "corridor"}

ROAD_ALLOWLISTS: dict[Category, frozenset[str]] = {
    Category.ROADS_BIKE: frozenset(_BIKE),
    Category.ROADS_DRIVE: frozenset(_DRIVE),
    Category.ROADS_WALK: frozenset(_WALK),
}

_YES = {"yes", "designated", "permissive", "destination"}

# keys whose every value belongs to the category (beyond the explicit rows)
_WILDCARD_KEYS: dict[Category, tuple[str, ...]] = {
    Category.AERIALWAY: ("aerialway",),
    Category.EMERGENCY: ("emergency",),
    Category.HEALTHCARE: ("healthcare",),
    Category.HISTORIC: ("historic",),
    Category.LEISURE: ("leisure",),
    Category.SHOPS: ("shop",),
    Category.SPORT: ("sport",),
    Category.TOURISM: ("tourism",),
    Category.TRANSPORTATION: ("public_transport",),
    Category.WATER: ("waterway", "water"),
}

# extra (key, value) rows not listed in the selected-tag table
_EXTRA_ROWS: dict[Category, tuple[tuple[str, str], ...]] = {
    Category.AIRPORTS: (
        ("aeroway", "terminal"), ("aeroway", "helipad"), ("aeroway", "runway"),
        ("aeroway", "taxiway"), ("aeroway", "apron"), ("aeroway", "hangar"),
    ),
    Category.OTHER: (("landuse", "cemetery"),),
    Category.TRANSPORTATION: (
        ("highway", "bus_stop"), ("railway", "station"), ("railway", "halt"),
        ("railway", "tram_stop"), ("railway", "subway_entrance"),
    ),
    Category.WATER: (
        ("natural", "water"), ("natural", "bay"), ("natural", "beach"),
        ("natural", "strait"), ("natural", "coastline"),
        ("landuse", "reservoir"), ("landuse", "basin"),
    ),
}

_NEGATIVE_VALUES = {"no", "none", "disused", "abandoned"}


class VocabEntry(NamedTuple):
    category: Category
    key: str
    value: str

    @property
    def single_measure(self) -> bool:
        """Roads and water rows carry one measure (length/area), the rest two."""
        return self.category in ROAD_CATEGORIES or self.category is Category.WATER


class TagMatch(NamedTuple):
    category: Category
    key: str
    value: str

    @property
    def tag(self) -> str:
        return f"{self.key}={self.value}"


@lru_cache(maxsize=1)
def selected_rows() -> tuple[VocabEntry, ...]:
    with resources.files("hexstation.data").joinpath("selected_tags.csv").open(encoding="utf-8") as f:
        return tuple(
            VocabEntry(Category(r["category"]), r["key"], r["value"]) for r in csv.DictReader(f)
        )


@lru_cache(maxsize=1)
def _rules() -> dict[Category, dict[str, set[str]]]:
    """category -> key -> allowed values (``*`` meaning any)."""
    rules: dict[Category, dict[str, set[str]]] = {c: {} for c in CATEGORIES}
    for row in selected_rows():
        if row.key == WILDCARD:
            continue
        rules[row.category].setdefault(row.key, set()).add(row.value)
    for cat, keys in _WILDCARD_KEYS.items():
        for k in keys:
            rules[cat].setdefault(k, set()).add(WILDCARD)
    for cat, rows in _EXTRA_ROWS.items():
        for k, v in rows:
            rules[cat].setdefault(k, set()).add(v)
    rules[Category.BUILDINGS].setdefault("office", set()).add(WILDCARD)
    return rules


def is_excluded(tags: Mapping[str, str]) -> bool:
    """Shared-bike stations are dropped so models never see the label as a feature."""
    return (
        tags.get("amenity") in ("bicycle_rental", "bicycle_sharing")
        or "bicycle_rental" in tags
    )


def road_categories(tags: Mapping[str, str]) -> tuple[Category, ...]:
    hw = tags.get("highway")
    if hw is None:
        return ()
    out = []
    for cat in ROAD_CATEGORIES:
        member = hw in ROAD_ALLOWLISTS[cat]
        if cat is Category.ROADS_BIKE:
            if tags.get("bicycle") in _YES or any(
                tags.get(k, "no") not in _NEGATIVE_VALUES
                for k in ("cycleway", "cycleway:left", "cycleway:right", "cycleway:both")
            ):
                member = True
            if tags.get("bicycle") == "no":
                member = False
        elif cat is Category.ROADS_WALK:
            if tags.get("foot") in _YES or tags.get("sidewalk") in ("both", "left", "right", "yes"):
                member = True
            if tags.get("foot") == "no":
                member = False
        elif cat is Category.ROADS_DRIVE:
            if tags.get("motor_vehicle") == "no" or tags.get("access") == "no":
                member = False
        if member:
            out.append(cat)
    return tuple(out)


def _match_in(cat: Category, tags: Mapping[str, str]) -> Optional[TagMatch]:
    for key, values in _rules()[cat].items():
        v = tags.get(key)
        if v is None or v in _NEGATIVE_VALUES:
            continue
        if v in values or WILDCARD in values:
            return TagMatch(cat, key, v)
    return None


def classify(tags: Mapping[str, str]) -> Optional[TagMatch]:
    """First matching category together with the tag that decided it."""
    if not tags or is_excluded(tags):
        return None
    for cat in CATEGORIES:
        if cat is Category.BUILDINGS:
            continue
        if cat in ROAD_CATEGORIES:
            roads = road_categories(tags)
            if cat in roads:
                return TagMatch(cat, "highway", tags["highway"])
            continue
        m = _match_in(cat, tags)
        if m is not None:
            return m
    b = tags.get("building")
    if b is not None and b not in _NEGATIVE_VALUES:
        return TagMatch(Category.BUILDINGS, "building", b)
    return _match_in(Category.BUILDINGS, tags)


def _tags_of(obj) -> Mapping[str, str]:
    """Tag map of a GeoObject, or the argument itself if it is already a mapping."""
    return obj if isinstance(obj, Mapping) else obj.tags


def categorize(obj) -> Optional[Category]:
    """Category of an object (or tag map); ``None`` for unmatched or excluded objects."""
    m = classify(_tags_of(obj))
    return None if m is None else m.category


def categories(tags: Mapping[str, str]) -> tuple[Category, ...]:
    """All categories an object counts towards (several only for roads)."""
    m = classify(tags)
    if m is None:
        return ()
    if m.category in ROAD_CATEGORIES:
        return road_categories(tags)
    return (m.category,)


@dataclass(frozen=True)
class TagVocabulary:
    """Ordered tag rows defining the axes of the per-tag region vectors.

    Each row with two measures yields an (area, count) axis pair; road rows
    yield one length axis and the water row one area axis.
    """

    entries: tuple[VocabEntry, ...]
    mode: str = "selected"
    _index: dict = field(init=False, repr=False, compare=False)
    _offsets: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in ("selected", "all"):
            raise ValueError(f"unknown vocabulary mode {self.mode!r}")
        if len(set(self.entries)) != len(self.entries):
            raise ValueError("vocabulary entries must be unique")
        index = {}
        offsets = []
        pos = 0
        for i, e in enumerate(self.entries):
            index[(e.category, e.key, e.value)] = i
            offsets.append(pos)
            pos += 1 if e.single_measure else 2
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_offsets", tuple(offsets) + (pos,))

    def __len__(self):
        return len(self.entries)

    @property
    def dim(self) -> int:
        """Length of the region vector this vocabulary produces."""
        return self._offsets[-1]

    def offset(self, i: int) -> int:
        return self._offsets[i]

    def index_of(self, match: TagMatch) -> Optional[int]:
        idx = self._index
        for key in (
            (match.category, match.key, match.value),
            (match.category, match.key, WILDCARD),
            (match.category, WILDCARD, WILDCARD),
        ):
            if key in idx:
                return idx[key]
        return None

    def category_index(self, cat: Category) -> Optional[int]:
        return self._index.get((cat, WILDCARD, WILDCARD))

    def to_json(self) -> dict:
        return {"mode": self.mode, "entries": [[str(e.category), e.key, e.value] for e in self.entries]}

    @classmethod
    def from_json(cls, d: dict) -> "TagVocabulary":
        return cls(tuple(VocabEntry(Category(c), k, v) for c, k, v in d["entries"]), d["mode"])


@lru_cache(maxsize=1)
def selected_vocabulary() -> TagVocabulary:
    return TagVocabulary(selected_rows(), "selected")


def vocab_index(obj, vocab: TagVocabulary) -> Optional[int]:
    """Row of ``vocab`` the object (or tag map) falls into, or None when rejected."""
    m = classify(_tags_of(obj))
    if m is None:
        return None
    return vocab.index_of(m)


def build_all_tag_vocab(tag_maps: Iterable) -> TagVocabulary:
    """Sorted vocabulary of every deciding (key, value) pair seen in the corpus.

    Only the 16 non-road, non-water categories contribute.
    """
    seen = set()
    n = 0
    for obj in tag_maps:
        n += 1
        m = classify(_tags_of(obj))
        if m is not None and m.category in SHAPE_CATEGORIES:
            seen.add(VocabEntry(m.category, m.key, m.value))
    if n == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    entries = sorted(seen, key=lambda e: (CATEGORIES.index(e.category), e.key, e.value))
    return TagVocabulary(tuple(entries), "all")
