"""Pickup-location clustering and hotspot queries.

DBSCAN over raw lat/lon points with the haversine metric. A bucket grid
accelerates neighborhood queries; the clustering itself follows the classic
scan-order expansion, so labels (including border-point claiming) are
deterministic for a given input order and match a brute-force reference.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geo import haversine_m_vec

log = logging.getLogger(__name__)

M_PER_DEG_LAT = 111_320.0


class _Grid:
    """Bucket grid over lat/lon sized so that any two points within
    ``eps_m`` share adjacent cells; membership is still checked with true
    haversine distances."""

    def __init__(self, lats: np.ndarray, lons: np.ndarray, eps_m: float):
        self.lats = lats
        self.lons = lons
        cos_min = max(0.01, math.cos(math.radians(float(np.max(np.abs(lats))))))
        self.dlat = eps_m / M_PER_DEG_LAT * 1.001
        self.dlon = eps_m / (M_PER_DEG_LAT * cos_min) * 1.001
        self.cells: dict[tuple[int, int], list[int]] = {}
        for i in range(len(lats)):
            key = (int(lats[i] // self.dlat), int(lons[i] // self.dlon))
            self.cells.setdefault(key, []).append(i)
        self._bucket_arrays = {k: np.array(v) for k, v in self.cells.items()}

    def region(self, i: int, eps_m: float) -> np.ndarray:
        """Indices within eps of point i, ascending (scan order)."""
        ci = int(self.lats[i] // self.dlat)
        cj = int(self.lons[i] // self.dlon)
        chunks = []
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                arr = self._bucket_arrays.get((ci + di, cj + dj))
                if arr is not None:
                    chunks.append(arr)
        cand = np.concatenate(chunks)
        d = haversine_m_vec(float(self.lats[i]), float(self.lons[i]), self.lats[cand], self.lons[cand])
        hit = cand[d <= eps_m]
        hit.sort()
        return hit


def dbscan(points: list[tuple[float, float]], eps_m: float, min_pts: int) -> list[int]:
    """Density-based clustering; returns a label per point, noise = -1.

    A point is core when at least ``min_pts`` points (itself included) lie
    within ``eps_m``. Points are scanned in input order and clusters grown
    with a FIFO seed list, so border points join the first cluster that
    reaches them and labels are deterministic given the input order.
    """
    if eps_m <= 0:
        raise ValueError("eps_m must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be at least 1")
    n = len(points)
    if n == 0:
        return []
    lats = np.array([p[0] for p in points])
    lons = np.array([p[1] for p in points])
    grid = _Grid(lats, lons, eps_m)

    labels = np.full(n, -2, dtype=np.int64)  # -2 unclaimed, -1 noise
    visited = np.zeros(n, dtype=bool)
    cluster = -1
    for i in range(n):
        if visited[i]:
            continue
        visited[i] = True
        neigh = grid.region(i, eps_m)
        if len(neigh) < min_pts:
            labels[i] = -1
            continue
        cluster += 1
        labels[i] = cluster
        seeds = [int(j) for j in neigh if j != i]
        k = 0
        while k < len(seeds):
            q = seeds[k]
            k += 1
            if not visited[q]:
                visited[q] = True
                qn = grid.region(q, eps_m)
                if len(qn) >= min_pts:
                    seeds.extend(int(x) for x in qn)
            if labels[q] < 0:
                labels[q] = cluster
    return [int(l) for l in labels]


@dataclass(frozen=True)
class Hotspot:
    hotspot_id: int
    lat: float
    lon: float
    member_count: int


@dataclass
class HotspotSet:
    """Clustered pickup locations plus the parameters that produced them."""

    hotspots: list[Hotspot]
    eps_m: float
    min_pts: int

    def __post_init__(self):
        ids = [h.hotspot_id for h in self.hotspots]
        if ids != list(range(len(ids))):
            raise ValueError("hotspot ids must be dense from 0")
        self._lats = np.array([h.lat for h in self.hotspots])
        self._lons = np.array([h.lon for h in self.hotspots])

    def __len__(self) -> int:
        return len(self.hotspots)

    def nearest(self, lat: float, lon: float) -> int:
        return nearest_hotspot(self, lat, lon)

    def write(self, path: str | Path) -> None:
        path = Path(path)
        with open(path, "w") as fh:
            fh.write("id,lat,lon,member_count\n")
            for h in self.hotspots:
                fh.write(f"{h.hotspot_id},{h.lat:.7f},{h.lon:.7f},{h.member_count}\n")
        with open(path.with_suffix(path.suffix + ".meta.json"), "w") as fh:
            json.dump({"eps_m": self.eps_m, "min_pts": self.min_pts}, fh)

    @classmethod
    def read(cls, path: str | Path) -> "HotspotSet":
        path = Path(path)
        hotspots = []
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if header != ["id", "lat", "lon", "member_count"]:
                raise ValueError(f"{path}: unexpected hotspot header {header}")
            for line in fh:
                hid, lat, lon, count = line.strip().split(",")
                hotspots.append(Hotspot(int(hid), float(lat), float(lon), int(count)))
        meta_path = path.with_suffix(path.suffix + ".meta.json")
        try:
            with open(meta_path) as fh:
                meta = json.load(fh)
        except FileNotFoundError:
            log.warning("%s missing; clustering parameters unknown", meta_path)
            meta = {"eps_m": float("nan"), "min_pts": 0}
        return cls(hotspots, float(meta["eps_m"]), int(meta["min_pts"]))


def _cluster_set(points, labels, eps_m, min_pts) -> HotspotSet:
    by_label: dict[int, list[int]] = {}
    for i, label in enumerate(labels):
        if label >= 0:
            by_label.setdefault(label, []).append(i)
    hotspots = []
    for hid, label in enumerate(sorted(by_label)):
        members = by_label[label]
        lat = sum(points[i][0] for i in members) / len(members)
        lon = sum(points[i][1] for i in members) / len(members)
        hotspots.append(Hotspot(hid, lat, lon, len(members)))
    return HotspotSet(hotspots, eps_m, min_pts)


def derive_hotspots(
    pickups: list[tuple[float, float]],
    target_count: int = 60,
    min_pts: int = 10,
    eps_range_m: tuple[float, float] = (50.0, 5000.0),
    iterations: int = 18,
) -> HotspotSet:
    """Cluster pickups, searching eps to approach ``target_count`` clusters.

    Bisects eps over ``eps_range_m`` under the usual rule that a larger
    radius merges clusters; keeps the candidate whose cluster count is
    closest to the target, breaking ties toward smaller eps. Warns when
    the best count misses the target by more than 50%.
    """
    if not pickups:
        raise ValueError("pickups must be non-empty")
    lo, hi = eps_range_m
    best: HotspotSet | None = None
    best_key: tuple[int, float] | None = None
    for _ in range(iterations):
        mid = (lo + hi) / 2.0
        labels = dbscan(pickups, mid, min_pts)
        candidate = _cluster_set(pickups, labels, mid, min_pts)
        key = (abs(len(candidate) - target_count), mid)
        if best_key is None or key < best_key:
            best, best_key = candidate, key
        if len(candidate) > target_count:
            lo = mid  # too many clusters: grow the radius to merge
        else:
            hi = mid  # too few (or exact): try smaller radii, ties prefer small eps
        if hi - lo < 1.0:
            break
    assert best is not None
    if abs(len(best) - target_count) > target_count * 0.5:
        log.warning(
            "eps search reached %d clusters (target %d); returning best effort",
            len(best), target_count,
        )
    return best


def nearest_hotspot(hotspot_set: HotspotSet, lat: float, lon: float) -> int:
    """Id of the closest hotspot; ties go to the lowest id."""
    if not len(hotspot_set):
        raise ValueError("hotspot set is empty")
    d = haversine_m_vec(lat, lon, hotspot_set._lats, hotspot_set._lons)
    return int(np.argmin(d))
