from __future__ import annotations

from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from stgraphrl.domain.models import DailyTrajectory, UserHistory, Visit
from stgraphrl.ingest.store import (
    STORE_COLUMNS,
    TrajectoryStoreError,
    read_trajectory_store,
    write_trajectory_store,
)


def _history() -> UserHistory:
    zone = timezone(timedelta(hours=-4))
    trajectories = []
    for day in range(3):
        start = datetime(2012, 4, 3 + day, 7, 45, tzinfo=zone)
        visits = tuple(
            Visit(
                location_key=f"40.7{i}:-74.0{i}",
                category=i,
                timestamp=start + timedelta(minutes=50 * i),
                latitude=40.7 + i / 3,
                longitude=-74.0 - i / 7,
            )
            for i in range(3)
        )
        trajectories.append(DailyTrajectory(user_id="u 1", date=start.date(), visits=visits))
    return UserHistory(user_id="u 1", trajectories=tuple(trajectories))


def test_store_reloads_to_equal_histories_with_exact_coordinates(tmp_path: Path) -> None:
    path = tmp_path / "store" / "trajectories.csv"
    history = _history()

    write_trajectory_store([history], path)

    assert read_trajectory_store(path) == [history]


def test_missing_store_is_a_store_error(tmp_path: Path) -> None:
    with pytest.raises(TrajectoryStoreError, match="not found"):
        read_trajectory_store(tmp_path / "absent.csv")


def test_unexpected_header_is_rejected(tmp_path: Path) -> None:
    path = tmp_path / "bad.csv"
    path.write_text("user,date\n", encoding="utf-8")

    with pytest.raises(TrajectoryStoreError, match="unexpected header"):
        read_trajectory_store(path)


def test_out_of_sequence_visit_index_names_the_line(tmp_path: Path) -> None:
    path = tmp_path / "bad.csv"
    path.write_text(
        ",".join(STORE_COLUMNS)
        + "\nu,2012-04-03,1,k,0,2012-04-03T08:00:00+00:00,0.0,0.0\n",
        encoding="utf-8",
    )

    with pytest.raises(TrajectoryStoreError, match=r"bad\.csv:2: visit index 1 out of sequence"):
        read_trajectory_store(path)


def test_a_stored_day_with_one_visit_is_rejected(tmp_path: Path) -> None:
    path = tmp_path / "short.csv"
    path.write_text(
        ",".join(STORE_COLUMNS)
        + "\nu,2012-04-03,0,k,0,2012-04-03T08:00:00+00:00,0.0,0.0\n",
        encoding="utf-8",
    )

    with pytest.raises(TrajectoryStoreError, match="at least two visits"):
        read_trajectory_store(path)
