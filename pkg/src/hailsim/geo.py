"""Geographic primitives shared across the package.

All coordinates are WGS84 decimal degrees. Distances use the haversine
great-circle formula, which is accurate to well under 0.1% at city scale.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from shapely.geometry import Point, Polygon
from shapely.prepared import prep

EARTH_RADIUS_M = 6_371_000.0


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters between two lat/lon points."""
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dphi = phi2 - phi1
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def haversine_m_vec(lat: float, lon: float, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    """Distances in meters from one point to arrays of points."""
    phi1 = math.radians(lat)
    phi2 = np.radians(lats)
    dphi = phi2 - phi1
    dlmb = np.radians(lons - lon)
    a = np.sin(dphi / 2.0) ** 2 + math.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(a)))


def initial_bearing_deg(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Initial great-circle bearing from point 1 to point 2, degrees clockwise from north."""
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dlmb = math.radians(lon2 - lon1)
    y = math.sin(dlmb) * math.cos(phi2)
    x = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlmb)
    return math.degrees(math.atan2(y, x)) % 360.0


def turn_angle_deg(bearing_in: float, bearing_out: float) -> float:
    """Signed heading change in degrees, normalized to (-180, 180].

    Positive values are clockwise (right turns), negative counter-clockwise
    (left turns); +-180 is a U-turn.
    """
    delta = (bearing_out - bearing_in) % 360.0
    if delta > 180.0:
        delta -= 360.0
    return delta


def interpolate(lat1: float, lon1: float, lat2: float, lon2: float, fraction: float) -> tuple[float, float]:
    """Linear interpolation between two points; adequate for sub-km city edges."""
    return (lat1 + (lat2 - lat1) * fraction, lon1 + (lon2 - lon1) * fraction)


class Boundary:
    """A closed polygon used to decide whether coordinates are in the service area.

    Points on the boundary line count as inside.
    """

    def __init__(self, exterior_lonlat: list[tuple[float, float]]):
        if len(exterior_lonlat) < 3:
            raise ValueError("boundary polygon needs at least 3 vertices")
        polygon = Polygon(exterior_lonlat)
        if not polygon.is_valid:
            raise ValueError("boundary polygon is degenerate or self-intersecting")
        self._polygon = polygon
        self._prepared = prep(polygon)

    @property
    def exterior_lonlat(self) -> list[tuple[float, float]]:
        return [(x, y) for x, y in self._polygon.exterior.coords]

    def contains(self, lat: float, lon: float) -> bool:
        return bool(self._prepared.intersects(Point(lon, lat)))

    @classmethod
    def from_geojson(cls, path: str | Path) -> "Boundary":
        """Load from a GeoJSON-style polygon file (coordinates in lon/lat order)."""
        with open(path) as fh:
            data = json.load(fh)
        geom = data.get("geometry", data)
        if geom.get("type") != "Polygon":
            raise ValueError(f"expected a Polygon geometry, got {geom.get('type')!r}")
        rings = geom.get("coordinates") or []
        if not rings:
            raise ValueError("polygon has no coordinate rings")
        return cls([(float(x), float(y)) for x, y in rings[0]])

    def to_geojson(self, path: str | Path) -> None:
        data = {"type": "Polygon", "coordinates": [[[x, y] for x, y in self.exterior_lonlat]]}
        with open(path, "w") as fh:
            json.dump(data, fh)
