from .ingest import (
    GeoJSONError,
    GeoObject,
    StationFileError,
    StationRecord,
    load_stations,
    parse_geojson,
    read_jsonl,
    serialize_geojson,
    write_jsonl,
    write_stations,
)
from .overpass import AreaLookupError, FetchError, OverpassConfig, fetch_overpass
from .tags import (
    CATEGORIES,
    ROAD_CATEGORIES,
    SHAPE_CATEGORIES,
    Category,
    TagMatch,
    TagVocabulary,
    VocabEntry,
    build_all_tag_vocab,
    categories,
    categorize,
    classify,
    selected_vocabulary,
    vocab_index,
)
