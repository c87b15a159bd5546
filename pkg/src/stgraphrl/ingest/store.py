from __future__ import annotations

import csv
from datetime import date, datetime
from pathlib import Path

from stgraphrl.domain.models import DailyTrajectory, UserHistory, Visit

STORE_COLUMNS = (
    "user_id",
    "date",
    "visit_index",
    "location_key",
    "category",
    "timestamp",
    "latitude",
    "longitude",
)


class TrajectoryStoreError(ValueError):
    pass


def write_trajectory_store(histories: list[UserHistory] | tuple[UserHistory, ...], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(STORE_COLUMNS)
        for history in histories:
            for trajectory in history.trajectories:
                for index, visit in enumerate(trajectory.visits):
                    writer.writerow(
                        (
                            history.user_id,
                            trajectory.date.isoformat(),
                            index,
                            visit.location_key,
                            visit.category,
                            visit.timestamp.isoformat(),
                            repr(visit.latitude),
                            repr(visit.longitude),
                        )
                    )


def read_trajectory_store(path: Path) -> list[UserHistory]:
    if not path.is_file():
        raise TrajectoryStoreError(f"trajectory store not found: {path}")

    users: dict[str, dict[date, list[Visit]]] = {}
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != STORE_COLUMNS:
            raise TrajectoryStoreError(f"{path}: unexpected header {header!r}")
        for row in reader:
            if not row:
                continue
            line = reader.line_num
            try:
                user_id, day_text, index_text, key, category, stamp, lat, lon = row
                day = date.fromisoformat(day_text)
                days = users.setdefault(user_id, {})
                visits = days.setdefault(day, [])
                if int(index_text) != len(visits):
                    raise ValueError(f"visit index {index_text} out of sequence")
                visits.append(
                    Visit(
                        location_key=key,
                        category=int(category),
                        timestamp=datetime.fromisoformat(stamp),
                        latitude=float(lat),
                        longitude=float(lon),
                    )
                )
            except ValueError as error:
                raise TrajectoryStoreError(f"{path}:{line}: {error}") from error

    try:
        return [
            UserHistory(
                user_id=user_id,
                trajectories=tuple(
                    DailyTrajectory(user_id=user_id, date=day, visits=tuple(visits))
                    for day, visits in sorted(days.items())
                ),
            )
            for user_id, days in users.items()
        ]
    except ValueError as error:
        raise TrajectoryStoreError(f"{path}: {error}") from error
