from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import date

from stgraphrl.domain.models import CheckinRecord, DailyTrajectory, UserHistory, Visit
from stgraphrl.ingest.categories import CategoryMap, default_category_map, map_category
from stgraphrl.ingest.checkins import ParseResult, assign_location_key, iter_user_records, time_bin

logger = logging.getLogger(__name__)

MIN_TRAJECTORIES_PER_USER = 3
MIN_VISITS_PER_TRAJECTORY = 2


@dataclass(frozen=True, slots=True)
class SessionResult:
    trajectories: tuple[DailyTrajectory, ...]
    kept_visits: int
    collapsed_visits: int
    dropped_visits: int


@dataclass(frozen=True, slots=True)
class IngestReport:
    """Visit accounting for one ingest run.

    Every input line ends up in exactly one of kept, collapsed, dropped or invalid.
    """

    total_lines: int
    invalid_lines: int
    kept_visits: int
    collapsed_visits: int
    dropped_visits: int
    users_seen: int
    users_kept: int
    visits_of_removed_users: int

    def __post_init__(self) -> None:
        accounted = (
            self.kept_visits + self.collapsed_visits + self.dropped_visits + self.invalid_lines
        )
        if accounted != self.total_lines:
            raise ValueError(
                f"ingest accounting mismatch: {accounted} accounted for, {self.total_lines} read"
            )
        if self.users_kept > self.users_seen:
            raise ValueError("cannot keep more users than were seen")

    def as_lines(self) -> list[str]:
        return [
            f"total_lines\t{self.total_lines}",
            f"invalid_lines\t{self.invalid_lines}",
            f"kept_visits\t{self.kept_visits}",
            f"collapsed_visits\t{self.collapsed_visits}",
            f"dropped_visits\t{self.dropped_visits}",
            f"users_seen\t{self.users_seen}",
            f"users_kept\t{self.users_kept}",
            f"visits_of_removed_users\t{self.visits_of_removed_users}",
        ]


@dataclass(frozen=True, slots=True)
class IngestResult:
    histories: tuple[UserHistory, ...]
    report: IngestReport


def to_visit(record: CheckinRecord, category_map: CategoryMap) -> Visit:
    return Visit(
        location_key=assign_location_key(record),
        category=map_category(record.raw_category, category_map),
        timestamp=record.timestamp,
        latitude=record.latitude,
        longitude=record.longitude,
    )


def _is_duplicate(previous: Visit, current: Visit) -> bool:
    # Trajectories need strictly ascending times, so a tie keeps only the first visit.
    if current.timestamp == previous.timestamp:
        return True
    return current.location_key == previous.location_key and time_bin(
        current.timestamp
    ) == time_bin(previous.timestamp)


def sessionize(visits: Iterable[Visit], user_id: str) -> SessionResult:
    """Split one user's visits into local civil days.

    Consecutive visits to the same location inside the same half-hour bin, or at
    the same instant, collapse into the first one. Days left with a single visit
    are dropped. Running this on its own output changes nothing.
    """
    ordered = sorted(visits, key=lambda visit: visit.timestamp)
    by_day: dict[date, list[Visit]] = {}
    for visit in ordered:
        by_day.setdefault(visit.local_date, []).append(visit)

    trajectories: list[DailyTrajectory] = []
    kept = collapsed = dropped = 0
    for day in sorted(by_day):
        day_visits: list[Visit] = []
        for visit in by_day[day]:
            if day_visits and _is_duplicate(day_visits[-1], visit):
                collapsed += 1
                continue
            day_visits.append(visit)
        if len(day_visits) < MIN_VISITS_PER_TRAJECTORY:
            dropped += len(day_visits)
            continue
        kept += len(day_visits)
        trajectories.append(DailyTrajectory(user_id=user_id, date=day, visits=tuple(day_visits)))

    return SessionResult(
        trajectories=tuple(trajectories),
        kept_visits=kept,
        collapsed_visits=collapsed,
        dropped_visits=dropped,
    )


def filter_users(
    histories: Iterable[UserHistory],
    *,
    min_trajectories: int = MIN_TRAJECTORIES_PER_USER,
    min_visits: int = MIN_VISITS_PER_TRAJECTORY,
) -> list[UserHistory]:
    kept: list[UserHistory] = []
    for history in histories:
        qualifying = [t for t in history.trajectories if len(t.visits) >= min_visits]
        if len(qualifying) >= min_trajectories:
            kept.append(UserHistory(user_id=history.user_id, trajectories=tuple(qualifying)))
    return kept


def _sessionize_user(job: tuple[str, Sequence[Visit]]) -> SessionResult:
    user_id, visits = job
    return sessionize(visits, user_id)


def build_histories(
    parsed: ParseResult,
    category_map: CategoryMap | None = None,
    *,
    jobs: int = 1,
) -> IngestResult:
    mapping = category_map if category_map is not None else default_category_map()
    user_jobs = [
        (user_id, [to_visit(record, mapping) for record in records])
        for user_id, records in iter_user_records(parsed.records)
    ]

    if jobs > 1 and len(user_jobs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            sessions = list(pool.map(_sessionize_user, user_jobs))
    else:
        sessions = [_sessionize_user(job) for job in user_jobs]

    candidates = [
        UserHistory(user_id=user_id, trajectories=session.trajectories)
        for (user_id, _), session in zip(user_jobs, sessions, strict=True)
    ]
    histories = filter_users(candidates)
    kept_ids = {history.user_id for history in histories}
    removed_visits = sum(
        sum(len(trajectory.visits) for trajectory in candidate.trajectories)
        for candidate in candidates
        if candidate.user_id not in kept_ids
    )

    report = IngestReport(
        total_lines=parsed.total_lines,
        invalid_lines=len(parsed.invalid_lines),
        kept_visits=sum(session.kept_visits for session in sessions),
        collapsed_visits=sum(session.collapsed_visits for session in sessions),
        dropped_visits=sum(session.dropped_visits for session in sessions),
        users_seen=len(user_jobs),
        users_kept=len(histories),
        visits_of_removed_users=removed_visits,
    )
    logger.info(
        "Built user histories",
        extra={"users_seen": report.users_seen, "users_kept": report.users_kept},
    )
    return IngestResult(histories=tuple(histories), report=report)
