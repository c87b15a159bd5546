"""Check-in parsing, daily sessionization and the trajectory store."""

from stgraphrl.ingest.categories import POI_CLASSES, CategoryMap, default_category_map, map_category
from stgraphrl.ingest.checkins import (
    CheckinParseError,
    FormatConfig,
    ParseResult,
    assign_location_key,
    parse_checkins,
    time_bin,
)
from stgraphrl.ingest.sessions import (
    IngestReport,
    IngestResult,
    build_histories,
    filter_users,
    sessionize,
    to_visit,
)
from stgraphrl.ingest.store import (
    TrajectoryStoreError,
    read_trajectory_store,
    write_trajectory_store,
)

__all__ = [
    "POI_CLASSES",
    "CategoryMap",
    "CheckinParseError",
    "FormatConfig",
    "IngestReport",
    "IngestResult",
    "ParseResult",
    "TrajectoryStoreError",
    "assign_location_key",
    "build_histories",
    "default_category_map",
    "filter_users",
    "map_category",
    "parse_checkins",
    "read_trajectory_store",
    "sessionize",
    "time_bin",
    "to_visit",
    "write_trajectory_store",
]
