from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from stgraphrl.autodiff.tensor import FloatArray
from stgraphrl.domain.models import DEFAULT_NUM_BINS, DEFAULT_NUM_CATEGORIES
from stgraphrl.evaluation.similarity import jensen_distance

_MASS_TOLERANCE = 1e-9
# Same-bin arrivals step one minute apart inside a half-hour bin.
MAX_SLOTS = 20


class ProfileError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class KernelRow:
    origin: int
    destination: int
    departure_bin: int
    duration_bins: int
    probability: float

    @property
    def arrival_bin(self) -> int:
        return self.departure_bin + self.duration_bins


@dataclass(frozen=True, slots=True)
class ProfileSlot:
    """Kernel rows for one movement of the day, in day order."""

    rows: tuple[KernelRow, ...]

    @property
    def mass(self) -> float:
        return math.fsum(row.probability for row in self.rows)


State = tuple[int, int]


def _state_mass(pairs: list[tuple[State, float]]) -> dict[State, float]:
    mass: dict[State, float] = {}
    for state, probability in pairs:
        mass[state] = mass.get(state, 0.0) + probability
    return {state: value for state, value in mass.items() if value > _MASS_TOLERANCE}


def _arrivals(slot: ProfileSlot) -> dict[State, float]:
    return _state_mass([((row.destination, row.arrival_bin), row.probability) for row in slot.rows])


def _departures(slot: ProfileSlot) -> dict[State, float]:
    return _state_mass([((row.origin, row.departure_bin), row.probability) for row in slot.rows])


def _same_mass(first: dict[State, float], second: dict[State, float]) -> bool:
    return first.keys() == second.keys() and all(
        abs(first[state] - second[state]) <= _MASS_TOLERANCE for state in first
    )


@dataclass(frozen=True, slots=True)
class MobilityProfile:
    """A transition kernel walked once per simulated day.

    Slot ``k`` holds the ``k``-th movement of a day. A day starts at
    ``home_category``, every movement departs from the category and bin where
    the previous one arrived, and the last slot returns home. Mass flowing
    into each (category, bin) state equals the mass of the next slot leaving
    it, so a full-length day visits kernel rows with their kernel
    probabilities.
    """

    profile_id: str
    slots: tuple[ProfileSlot, ...]
    home_category: int
    movements_min: int
    movements_max: int
    num_categories: int = DEFAULT_NUM_CATEGORIES
    num_bins: int = DEFAULT_NUM_BINS

    def __post_init__(self) -> None:
        if not self.profile_id or any(char.isspace() for char in self.profile_id):
            raise ProfileError("profile id must be non-empty without whitespace")
        if not self.slots or any(not slot.rows for slot in self.slots):
            raise ProfileError(f"profile {self.profile_id}: every slot needs kernel rows")
        if len(self.slots) > MAX_SLOTS:
            raise ProfileError(f"profile {self.profile_id}: at most {MAX_SLOTS} slots")
        if not 1 <= self.movements_min <= self.movements_max <= len(self.slots):
            raise ProfileError(
                f"profile {self.profile_id}: daily movements must satisfy 1 <= min <= max <= slots"
            )
        if not 0 <= self.home_category < self.num_categories:
            raise ProfileError(f"profile {self.profile_id}: home category out of range")
        for slot in self.slots:
            for row in slot.rows:
                self._check_row(row)
        total = math.fsum(slot.mass for slot in self.slots)
        if abs(total - 1.0) > _MASS_TOLERANCE:
            raise ProfileError(f"profile {self.profile_id}: kernel mass sums to {total}, not 1")
        share = 1.0 / len(self.slots)
        if any(abs(slot.mass - share) > _MASS_TOLERANCE for slot in self.slots):
            raise ProfileError(f"profile {self.profile_id}: slots must carry equal mass")
        if any(row.origin != self.home_category for row in self.slots[0].rows):
            raise ProfileError(f"profile {self.profile_id}: the first slot must leave home")
        if any(row.destination != self.home_category for row in self.slots[-1].rows):
            raise ProfileError(f"profile {self.profile_id}: the last slot must return home")
        for earlier, later in zip(self.slots, self.slots[1:]):
            if not _same_mass(_arrivals(earlier), _departures(later)):
                raise ProfileError(
                    f"profile {self.profile_id}: slot mass does not chain into the next slot"
                )

    def _check_row(self, row: KernelRow) -> None:
        if row.probability < 0:
            raise ProfileError(f"profile {self.profile_id}: negative kernel probability")
        if not (0 <= row.origin < self.num_categories and 0 <= row.destination < self.num_categories):
            raise ProfileError(f"profile {self.profile_id}: kernel category out of range")
        if row.duration_bins < 0 or row.departure_bin < 0:
            raise ProfileError(f"profile {self.profile_id}: kernel bins must not be negative")
        if row.arrival_bin >= self.num_bins:
            raise ProfileError(
                f"profile {self.profile_id}: departure + duration must stay below {self.num_bins}"
            )
        if row.duration_bins == 0 and row.origin == row.destination:
            raise ProfileError(
                f"profile {self.profile_id}: a same-category movement needs a positive duration"
            )

    @property
    def rows(self) -> tuple[KernelRow, ...]:
        return tuple(row for slot in self.slots for row in slot.rows)

    def marginal(self) -> FloatArray:
        """Kernel mass per (destination category, arrival bin), flattened as ``c * C_t + t``."""
        cells = np.zeros((self.num_categories, self.num_bins))
        for row in self.rows:
            cells[row.destination, row.arrival_bin] += row.probability
        return cells.reshape(-1)


def profile_distance(first: MobilityProfile, second: MobilityProfile) -> float:
    if (first.num_categories, first.num_bins) != (second.num_categories, second.num_bins):
        raise ProfileError("profiles must share the kernel domain")
    return jensen_distance(first.marginal(), second.marginal())


def _profile(
    profile_id: str, slots: list[list[tuple[int, int, int, int, int]]]
) -> MobilityProfile:
    # Row weights are in sixteenths; each slot sums to four of them.
    return MobilityProfile(
        profile_id=profile_id,
        slots=tuple(
            ProfileSlot(
                rows=tuple(
                    KernelRow(origin, destination, departure, duration, weight / 16)
                    for origin, destination, departure, duration, weight in rows
                )
            )
            for rows in slots
        ),
        home_category=0,
        movements_min=len(slots),
        movements_max=len(slots),
    )


def default_profiles() -> tuple[MobilityProfile, ...]:
    """Four profiles whose arrival cells do not overlap.

    Categories: 0 residential, 1 education, 2 food, 3 transportation, 4 medical,
    5 offices, 6 personal services, 7 government, 8 outdoor, 9 others.
    Rows are (origin, destination, departure bin, duration in bins, weight).
    Each profile has two morning routes, and one of them forks in the afternoon.
    """
    return (
        _profile(
            "commuter",
            [
                [(0, 3, 14, 1, 2), (0, 5, 15, 2, 2)],
                [(3, 5, 15, 1, 2), (5, 2, 17, 8, 2)],
                [(5, 2, 16, 8, 1), (5, 3, 16, 9, 1), (2, 5, 25, 2, 2)],
                [(2, 0, 24, 18, 1), (3, 0, 25, 18, 1), (5, 0, 27, 17, 2)],
            ],
        ),
        _profile(
            "student",
            [
                [(0, 1, 16, 1, 2), (0, 1, 17, 1, 2)],
                [(1, 2, 17, 6, 2), (1, 8, 18, 6, 2)],
                [(2, 1, 23, 3, 2), (8, 1, 24, 4, 1), (8, 9, 24, 3, 1)],
                [(1, 0, 26, 9, 2), (1, 0, 28, 8, 1), (9, 0, 27, 10, 1)],
            ],
        ),
        _profile(
            "leisure",
            [
                [(0, 8, 18, 2, 2), (0, 6, 19, 1, 2)],
                [(8, 2, 20, 6, 2), (6, 2, 20, 7, 2)],
                [(2, 9, 26, 12, 2), (2, 8, 27, 12, 1), (2, 9, 27, 13, 1)],
                [(9, 0, 38, 7, 2), (8, 0, 39, 7, 1), (9, 0, 40, 7, 1)],
            ],
        ),
        _profile(
            "errands",
            [
                [(0, 4, 19, 1, 2), (0, 7, 20, 1, 2)],
                [(4, 7, 20, 2, 2), (7, 4, 21, 2, 2)],
                [(7, 6, 22, 7, 2), (4, 6, 23, 7, 1), (4, 3, 23, 8, 1)],
                [(6, 0, 29, 4, 2), (6, 0, 30, 4, 1), (3, 0, 31, 1, 1)],
            ],
        ),
    )
