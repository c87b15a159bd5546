from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from stgraphrl.graph.geo import EARTH_RADIUS_M, haversine

# Kept short of antipodal pairs, where both closed forms lose precision.
_latitude = st.floats(-60.0, 60.0)
_longitude = st.floats(-90.0, 90.0)


def test_identical_points_are_zero_meters_apart() -> None:
    assert haversine(35.68, 139.76, 35.68, 139.76) == 0.0


def test_one_degree_of_longitude_on_the_equator() -> None:
    assert haversine(0.0, 0.0, 0.0, 1.0) == pytest.approx(111_195.0, abs=1.0)


@given(_latitude, _longitude, _latitude, _longitude)
def test_distance_is_symmetric(lat1: float, lon1: float, lat2: float, lon2: float) -> None:
    assert haversine(lat1, lon1, lat2, lon2) == pytest.approx(haversine(lat2, lon2, lat1, lon1))


@given(_latitude, _longitude, _latitude, _longitude)
def test_distance_matches_the_atan2_form(lat1: float, lon1: float, lat2: float, lon2: float) -> None:
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    a = (
        math.sin((phi2 - phi1) / 2) ** 2
        + math.cos(phi1) * math.cos(phi2) * math.sin(math.radians(lon2 - lon1) / 2) ** 2
    )
    a = min(1.0, a)
    expected = 2 * EARTH_RADIUS_M * math.atan2(math.sqrt(a), math.sqrt(1 - a))

    assert haversine(lat1, lon1, lat2, lon2) == pytest.approx(expected, rel=1e-10, abs=1e-6)
