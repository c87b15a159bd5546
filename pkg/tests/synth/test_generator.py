from __future__ import annotations

from datetime import date
from pathlib import Path

import numpy as np
import pytest

from stgraphrl.domain.models import CheckinRecord
from stgraphrl.graph.build import build_graph
from stgraphrl.ingest.categories import POI_CLASSES
from stgraphrl.ingest.checkins import parse_checkins
from stgraphrl.ingest.sessions import build_histories
from stgraphrl.synth.generator import generate, read_labels, write_checkins, write_labels
from stgraphrl.synth.profiles import ProfileError, default_profiles


def test_users_are_assigned_to_profiles_in_blocks() -> None:
    corpus = generate(default_profiles(), users_per_profile=2, days=3, seed=1)

    assert corpus.labels == {
        "u0000": "commuter",
        "u0001": "commuter",
        "u0002": "student",
        "u0003": "student",
        "u0004": "leisure",
        "u0005": "leisure",
        "u0006": "errands",
        "u0007": "errands",
    }


def test_generation_is_deterministic_for_a_seed() -> None:
    first = generate(default_profiles(), users_per_profile=2, days=4, seed=9)
    second = generate(default_profiles(), users_per_profile=2, days=4, seed=9)
    other = generate(default_profiles(), users_per_profile=2, days=4, seed=10)

    assert first.records == second.records
    assert first.records != other.records


def test_each_day_is_one_walk_from_home_and_back() -> None:
    corpus = generate(default_profiles(), users_per_profile=3, days=5, seed=2)
    home = POI_CLASSES[0]

    per_day: dict[tuple[str, date], list[CheckinRecord]] = {}
    for record in corpus.records:
        per_day.setdefault((record.user_id, record.timestamp.date()), []).append(record)

    assert len(per_day) == 4 * 3 * 5
    for stops in per_day.values():
        assert len(stops) == 5
        assert [stop.timestamp for stop in stops] == sorted(stop.timestamp for stop in stops)
        assert stops[0].raw_category == home
        assert stops[-1].raw_category == home


def test_built_graphs_follow_the_kernel_for_every_user(tmp_path: Path) -> None:
    days = 10
    profiles = {profile.profile_id: profile for profile in default_profiles()}
    corpus = generate(tuple(profiles.values()), users_per_profile=20, days=days, seed=7)
    path = tmp_path / "checkins.csv"
    write_checkins(corpus.records, path)
    with path.open("rb") as stream:
        histories = build_histories(parse_checkins(stream)).histories

    assert len(histories) == 80
    for history in histories:
        graph = build_graph(history)
        profile = profiles[corpus.labels[history.user_id]]
        cells = np.zeros((profile.num_categories, profile.num_bins))
        for edge in graph.edges:
            cells[graph.nodes[edge.dst].category, edge.arrival_bin] += edge.frequency
        assert cells.sum() == len(profile.slots) * days
        observed = cells.reshape(-1) / cells.sum()
        distance = 0.5 * float(np.abs(observed - profile.marginal()).sum())
        assert distance < 0.15
        assert distance == pytest.approx(corpus.total_variation[history.user_id])
        np.testing.assert_allclose(observed, corpus.empirical_marginals[history.user_id])


def test_worst_total_variation_is_reported_per_profile() -> None:
    corpus = generate(default_profiles(), users_per_profile=3, days=4, seed=5)

    worst = corpus.worst_total_variation()

    assert list(worst) == ["commuter", "student", "leisure", "errands"]
    for profile_id, distance in worst.items():
        members = [user for user, label in corpus.labels.items() if label == profile_id]
        assert distance == max(corpus.total_variation[user] for user in members)


@pytest.mark.parametrize(
    ("profile_count", "users", "days", "message"),
    [
        (1, 2, 5, "two profiles"),
        (4, 2, 2, "three days"),
        (4, 0, 5, "one user"),
    ],
)
def test_generation_rejects_degenerate_requests(
    profile_count: int, users: int, days: int, message: str
) -> None:
    with pytest.raises(ProfileError, match=message):
        generate(default_profiles()[:profile_count], users, days, seed=0)


def test_duplicate_profile_ids_are_rejected() -> None:
    profile = default_profiles()[0]

    with pytest.raises(ProfileError, match="distinct"):
        generate((profile, profile), 1, 5, seed=0)


def test_synthetic_checkins_survive_ingest(tmp_path: Path) -> None:
    corpus = generate(default_profiles(), users_per_profile=2, days=4, seed=3)
    path = tmp_path / "checkins.csv"
    write_checkins(corpus.records, path)

    with path.open("rb") as stream:
        parsed = parse_checkins(stream)
    result = build_histories(parsed)

    assert parsed.invalid_lines == ()
    assert len(parsed.records) == len(corpus.records)
    assert sorted(history.user_id for history in result.histories) == sorted(corpus.labels)
    assert all(len(history.trajectories) == 4 for history in result.histories)
    commuter_categories = {0, 2, 3, 5}
    for history in result.histories:
        if corpus.labels[history.user_id] == "commuter":
            for trajectory in history.trajectories:
                assert {visit.category for visit in trajectory.visits} <= commuter_categories


def test_labels_round_trip(tmp_path: Path) -> None:
    labels = {"u0000": "commuter", "u0001": "student"}
    path = tmp_path / "labels.csv"

    write_labels(labels, path)

    assert read_labels(path) == labels


def test_labels_need_their_header(tmp_path: Path) -> None:
    path = tmp_path / "labels.csv"
    path.write_text("u0000,commuter\n", encoding="utf-8")

    with pytest.raises(ProfileError, match="header"):
        read_labels(path)
