from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime
from typing import Annotated

import numpy as np
from pydantic import AwareDatetime, BaseModel, ConfigDict, Field, StringConstraints, field_validator

from stgraphrl.autodiff.tensor import FloatArray

DEFAULT_NUM_CATEGORIES = 10
DEFAULT_NUM_BINS = 48


class CheckinRecord(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    user_id: Annotated[str, StringConstraints(strip_whitespace=True, min_length=1)]
    timestamp: AwareDatetime
    latitude: float = Field(ge=-90, le=90, allow_inf_nan=False)
    longitude: float = Field(ge=-180, le=180, allow_inf_nan=False)
    venue_id: str | None = None
    raw_category: str | None = None

    @field_validator("venue_id", "raw_category")
    @classmethod
    def _blank_is_missing(cls, value: str | None) -> str | None:
        if value is None:
            return None
        stripped = value.strip()
        return stripped or None


@dataclass(frozen=True, slots=True)
class Visit:
    location_key: str
    category: int
    timestamp: datetime
    latitude: float
    longitude: float

    def __post_init__(self) -> None:
        if not self.location_key or any(char.isspace() for char in self.location_key):
            raise ValueError("location key must be non-empty and contain no whitespace")
        if self.category < 0:
            raise ValueError("visit category must not be negative")
        if self.timestamp.tzinfo is None or self.timestamp.utcoffset() is None:
            raise ValueError("visit timestamp must be timezone-aware")
        if not (-90 <= self.latitude <= 90 and -180 <= self.longitude <= 180):
            raise ValueError("visit coordinates are out of bounds")

    @property
    def local_date(self) -> date:
        return self.timestamp.date()


@dataclass(frozen=True, slots=True)
class DailyTrajectory:
    user_id: str
    date: date
    visits: tuple[Visit, ...]

    def __post_init__(self) -> None:
        if len(self.visits) < 2:
            raise ValueError("a daily trajectory needs at least two visits")
        for earlier, later in zip(self.visits, self.visits[1:]):
            if later.timestamp <= earlier.timestamp:
                raise ValueError("trajectory visits must be strictly ascending in time")
        if any(visit.local_date != self.date for visit in self.visits):
            raise ValueError("all visits of a daily trajectory must share its civil date")

    @property
    def movement_count(self) -> int:
        return len(self.visits) - 1


@dataclass(frozen=True, slots=True)
class UserHistory:
    """The trajectory set R(u) of one user, ordered by date.

    The three-trajectory minimum is applied by ``filter_users``; a history is
    also the intermediate value before that filter runs.
    """

    user_id: str
    trajectories: tuple[DailyTrajectory, ...]

    def __post_init__(self) -> None:
        if any(trajectory.user_id != self.user_id for trajectory in self.trajectories):
            raise ValueError("every trajectory must belong to the history's user")
        dates = [trajectory.date for trajectory in self.trajectories]
        if any(later <= earlier for earlier, later in zip(dates, dates[1:])):
            raise ValueError("trajectories must be sorted by strictly ascending date")

    @property
    def movement_count(self) -> int:
        return sum(trajectory.movement_count for trajectory in self.trajectories)


@dataclass(frozen=True, slots=True)
class GraphNode:
    node_index: int
    location_key: str
    category: int

    def feature(self, num_categories: int) -> FloatArray:
        one_hot = np.zeros(num_categories)
        one_hot[self.category] = 1.0
        return one_hot


@dataclass(frozen=True, slots=True)
class GraphEdge:
    src: int
    dst: int
    departure_bin: int
    arrival_bin: int
    frequency: int
    distance_m: float
    duration_min: float

    def __post_init__(self) -> None:
        if self.arrival_bin < self.departure_bin:
            raise ValueError("edge arrival bin precedes its departure bin")
        if self.frequency < 1:
            raise ValueError("edge frequency must be at least 1")
        if self.distance_m < 0:
            raise ValueError("edge distance must not be negative")
        same_slot = self.src == self.dst and self.departure_bin == self.arrival_bin
        if self.duration_min < 0 or (self.duration_min == 0 and not same_slot):
            raise ValueError("edge duration must be positive")

    @property
    def key(self) -> tuple[int, int, int, int]:
        return (self.src, self.dst, self.departure_bin, self.arrival_bin)

    def transit_vector(self, num_bins: int) -> FloatArray:
        vector = np.zeros(num_bins)
        vector[self.departure_bin] = 1.0
        vector[self.arrival_bin] = 1.0
        return vector


@dataclass(frozen=True, slots=True)
class MobilityGraph:
    user_id: str
    num_categories: int
    num_bins: int
    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]
    # (frequency, distance, duration) per edge, each channel scaled to [0, 1].
    normalized_weights: tuple[tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        if not self.edges:
            raise ValueError("a mobility graph needs at least one edge")
        if any(node.node_index != position for position, node in enumerate(self.nodes)):
            raise ValueError("node indices must be 0..|V|-1 in order")
        if any(not 0 <= node.category < self.num_categories for node in self.nodes):
            raise ValueError("node category is outside [0, C_s)")
        keys = set()
        for edge in self.edges:
            if not (0 <= edge.src < len(self.nodes) and 0 <= edge.dst < len(self.nodes)):
                raise ValueError("edge references a missing node")
            if edge.arrival_bin >= self.num_bins:
                raise ValueError("edge bin is outside [0, C_t)")
            keys.add(edge.key)
        if len(keys) != len(self.edges):
            raise ValueError("duplicate (src, dst, transit vector) edges must be merged")
        if len(self.normalized_weights) != len(self.edges):
            raise ValueError("one normalized weight triple is required per edge")

    @property
    def sources(self) -> np.ndarray:
        return np.array([edge.src for edge in self.edges], dtype=np.intp)

    @property
    def targets(self) -> np.ndarray:
        return np.array([edge.dst for edge in self.edges], dtype=np.intp)

    def node_features(self) -> FloatArray:
        return np.stack([node.feature(self.num_categories) for node in self.nodes])

    def transit_matrix(self) -> FloatArray:
        return np.stack([edge.transit_vector(self.num_bins) for edge in self.edges])

    def weight_matrix(self) -> FloatArray:
        return np.array(self.normalized_weights, dtype=np.float64).reshape(len(self.edges), 3)

    def out_degrees(self) -> list[int]:
        degrees = [0] * len(self.nodes)
        for edge in self.edges:
            degrees[edge.src] += 1
        return degrees


@dataclass(frozen=True, slots=True, eq=False)
class DistributionTargets:
    """Binary occurrence vectors y_s, y_t and y_st (cell (c, t) at index c * C_t + t)."""

    y_s: FloatArray
    y_t: FloatArray
    y_st: FloatArray

    def __post_init__(self) -> None:
        num_categories, num_bins = self.y_s.shape[0], self.y_t.shape[0]
        if self.y_st.shape != (num_categories * num_bins,):
            raise ValueError("joint target must have C_s * C_t entries")
        joint = self.y_st.reshape(num_categories, num_bins)
        categories, bins = np.nonzero(joint)
        if np.any(self.y_s[categories] != 1.0) or np.any(self.y_t[bins] != 1.0):
            raise ValueError("a joint cell is set without its category and bin")


@dataclass(frozen=True, slots=True, eq=False)
class LabelPriors:
    """Empirical positive rate of every label, measured on the training split."""

    spatial: FloatArray
    temporal: FloatArray
    joint: FloatArray

    def __post_init__(self) -> None:
        for rates in (self.spatial, self.temporal, self.joint):
            if np.any(rates < 0.0) or np.any(rates > 1.0):
                raise ValueError("label priors must lie in [0, 1]")
