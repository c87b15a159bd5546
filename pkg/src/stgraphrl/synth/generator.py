from __future__ import annotations

import csv
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from stgraphrl.autodiff.tensor import FloatArray
from stgraphrl.domain.models import CheckinRecord
from stgraphrl.ingest.categories import POI_CLASSES
from stgraphrl.ingest.checkins import BIN_MINUTES, time_bin
from stgraphrl.synth.profiles import KernelRow, MobilityProfile, ProfileError

logger = logging.getLogger(__name__)

START_DATE = date(2012, 4, 2)
LOCAL_ZONE = timezone(timedelta(hours=9))
CITY_CENTER = (35.68, 139.76)
CHECKIN_COLUMNS = ("user_id", "timestamp", "latitude", "longitude", "venue_id", "category")
_START = -1
_MAX_DECK = 24


@dataclass(frozen=True, slots=True, eq=False)
class SyntheticCorpus:
    records: tuple[CheckinRecord, ...]
    labels: dict[str, str]
    # Per user: (destination category, arrival bin) frequencies of the emitted
    # movements and their total-variation distance to the profile marginal.
    empirical_marginals: dict[str, FloatArray]
    total_variation: dict[str, float]

    def worst_total_variation(self) -> dict[str, float]:
        """Largest per-user distance within each profile, in profile order."""
        worst: dict[str, float] = {}
        for user_id, profile_id in self.labels.items():
            worst[profile_id] = max(worst.get(profile_id, 0.0), self.total_variation[user_id])
        return worst


class _BranchDecks:
    """Stratified choice among the kernel rows leaving each walk state.

    Every state keeps a shuffled deck holding its rows in proportion to their
    mass; a draw takes the next card and an empty deck is reshuffled. Over many
    days each row is taken at its kernel share with far less spread than
    independent draws.
    """

    def __init__(self, profile: MobilityProfile, rng: np.random.Generator) -> None:
        self._rng = rng
        self._rows: dict[tuple[int, int, int], list[KernelRow]] = {}
        for slot_index, slot in enumerate(profile.slots):
            for row in slot.rows:
                if row.probability > 0:
                    key = (slot_index, row.origin, row.departure_bin if slot_index else _START)
                    self._rows.setdefault(key, []).append(row)
        self._decks: dict[tuple[int, int, int], list[int]] = {}

    def draw(self, slot_index: int, category: int, arrival_bin: int) -> KernelRow:
        key = (slot_index, category, arrival_bin if slot_index else _START)
        rows = self._rows[key]
        deck = self._decks.get(key)
        if not deck:
            weights = np.array([row.probability for row in rows])
            counts = _deck_counts(weights / weights.sum())
            cards = np.repeat(np.arange(len(rows)), counts)
            deck = [int(card) for card in self._rng.permutation(cards)]
            self._decks[key] = deck
        return rows[deck.pop()]


def _deck_counts(shares: FloatArray) -> NDArray[np.int64]:
    """Smallest whole-card split reproducing ``shares``, else largest remainder at full size."""
    for size in range(1, _MAX_DECK + 1):
        scaled = shares * size
        rounded = np.rint(scaled)
        if np.allclose(scaled, rounded, rtol=0.0, atol=1e-9):
            return rounded.astype(np.int64)
    scaled = shares * _MAX_DECK
    counts = np.floor(scaled).astype(np.int64)
    order = np.argsort(counts - scaled, kind="stable")
    counts[order[: _MAX_DECK - int(counts.sum())]] += 1
    return counts


def _venue_coordinates(rng: np.random.Generator, category: int) -> tuple[float, float]:
    # Categories sit on a ring ~1 km apart around a per-user home point.
    angle = 2 * np.pi * category / len(POI_CLASSES)
    jitter = rng.uniform(-0.002, 0.002, size=2)
    return (
        float(np.cos(angle) * 0.01 + jitter[0]),
        float(np.sin(angle) * 0.01 + jitter[1]),
    )


def _stamp(
    day: date, bin_index: int, previous: datetime | None, rng: np.random.Generator
) -> datetime:
    start = datetime(day.year, day.month, day.day, tzinfo=LOCAL_ZONE)
    start += timedelta(minutes=bin_index * BIN_MINUTES)
    if previous is not None and previous >= start:
        return previous + timedelta(minutes=1)
    return start + timedelta(minutes=int(rng.integers(0, 10)))


def _user_days(
    profile: MobilityProfile, days: int, rng: np.random.Generator
) -> list[list[tuple[int, datetime]]]:
    """One walk per day as (category, check-in time) stops, starting at home."""
    decks = _BranchDecks(profile, rng)
    walks: list[list[tuple[int, datetime]]] = []
    for day_offset in range(days):
        day = START_DATE + timedelta(days=day_offset)
        count = int(rng.integers(profile.movements_min, profile.movements_max + 1))
        category, current_bin = profile.home_category, _START
        stops: list[tuple[int, datetime]] = []
        for slot_index in range(count):
            row = decks.draw(slot_index, category, current_bin)
            if not stops:
                stops.append((category, _stamp(day, row.departure_bin, None, rng)))
            stops.append((row.destination, _stamp(day, row.arrival_bin, stops[-1][1], rng)))
            category, current_bin = row.destination, row.arrival_bin
        walks.append(stops)
    return walks


def _movement_marginal(
    walks: Sequence[Sequence[tuple[int, datetime]]], profile: MobilityProfile
) -> FloatArray:
    cells = np.zeros((profile.num_categories, profile.num_bins))
    for stops in walks:
        for category, timestamp in stops[1:]:
            cells[category, time_bin(timestamp)] += 1.0
    total = cells.sum()
    return (cells / total).reshape(-1) if total else cells.reshape(-1)


def _user_records(
    user_id: str, walks: Sequence[Sequence[tuple[int, datetime]]], rng: np.random.Generator
) -> list[CheckinRecord]:
    home = (
        CITY_CENTER[0] + float(rng.uniform(-0.05, 0.05)),
        CITY_CENTER[1] + float(rng.uniform(-0.05, 0.05)),
    )
    offsets = [_venue_coordinates(rng, category) for category in range(len(POI_CLASSES))]
    return [
        CheckinRecord(
            user_id=user_id,
            timestamp=timestamp,
            latitude=round(home[0] + offsets[category][0], 6),
            longitude=round(home[1] + offsets[category][1], 6),
            venue_id=f"{user_id}-v{category}",
            raw_category=POI_CLASSES[category],
        )
        for stops in walks
        for category, timestamp in stops
    ]


def generate(
    profiles: Sequence[MobilityProfile],
    users_per_profile: int,
    days: int,
    seed: int,
) -> SyntheticCorpus:
    """Users ``u0000``, ``u0001``, ... assigned to profiles in blocks; each user has its own seeded stream."""
    if len(profiles) < 2:
        raise ProfileError("generation needs at least two profiles")
    if len({profile.profile_id for profile in profiles}) != len(profiles):
        raise ProfileError("profile ids must be distinct")
    if days < 3:
        raise ProfileError("generation needs at least three days per user")
    if users_per_profile < 1:
        raise ProfileError("generation needs at least one user per profile")
    for profile in profiles:
        if profile.num_categories > len(POI_CLASSES):
            raise ProfileError(f"profile {profile.profile_id} has categories without a place class")
        if not np.any(profile.marginal() > 0):
            raise ProfileError(f"profile {profile.profile_id} has no feasible movement")

    records: list[CheckinRecord] = []
    labels: dict[str, str] = {}
    empirical: dict[str, FloatArray] = {}
    total_variation: dict[str, float] = {}
    user_index = 0
    for profile in profiles:
        kernel = profile.marginal()
        for _ in range(users_per_profile):
            user_id = f"u{user_index:04d}"
            rng = np.random.default_rng([seed, user_index])
            walks = _user_days(profile, days, rng)
            records.extend(_user_records(user_id, walks, rng))
            labels[user_id] = profile.profile_id
            empirical[user_id] = _movement_marginal(walks, profile)
            total_variation[user_id] = 0.5 * float(np.abs(empirical[user_id] - kernel).sum())
            user_index += 1

    logger.info(
        "Generated synthetic corpus",
        extra={"users": len(labels), "records": len(records), "seed": seed},
    )
    return SyntheticCorpus(
        records=tuple(records),
        labels=labels,
        empirical_marginals=empirical,
        total_variation=total_variation,
    )


def write_checkins(records: Sequence[CheckinRecord], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CHECKIN_COLUMNS)
        for record in records:
            writer.writerow(
                (
                    record.user_id,
                    record.timestamp.isoformat(),
                    repr(record.latitude),
                    repr(record.longitude),
                    record.venue_id or "",
                    record.raw_category or "",
                )
            )


def write_labels(labels: dict[str, str], path: Path) -> None:
    rows = ["user_id,profile_id", *(f"{user_id},{profile}" for user_id, profile in labels.items())]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_labels(path: Path) -> dict[str, str]:
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["user_id", "profile_id"]:
            raise ProfileError(f"{path}: expected header 'user_id,profile_id'")
        return {row[0]: row[1] for row in reader if len(row) == 2}
