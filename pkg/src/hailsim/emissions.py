"""Pollutant accounting over trip logs.

Emissions are charged per kilometre with factors selected by a trip's mean
speed (distance over duration), a deliberately coarse stand-in for
acceleration-resolved models: the quantity the study validates is the
per-km fleet aggregate, which this reproduces.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

if TYPE_CHECKING:
    from .network import RoadGraph
    from .sim.output import TripLog

log = logging.getLogger(__name__)

POLLUTANTS = ("CO2", "CO", "NOx", "PMx")

DEFAULT_TABLE_RESOURCE = "emission_factors_phev_euro6d.csv"


@dataclass(frozen=True)
class SpeedBin:
    low_mps: float  # exclusive
    high_mps: float  # inclusive
    grams_per_km: float


@dataclass
class EmissionFactorTable:
    """Per-pollutant speed-binned grams-per-km factors for one vehicle class."""

    vehicle_class: str
    factors: dict[str, list[SpeedBin]]

    def __post_init__(self):
        for pollutant, bins in self.factors.items():
            bins.sort(key=lambda b: b.low_mps)
            prev_high = 0.0
            for b in bins:
                if b.grams_per_km < 0:
                    raise ValueError(f"{pollutant}: negative factor")
                if b.low_mps != prev_high:
                    raise ValueError(
                        f"{pollutant}: bins must tile (0, max] without gaps or overlap"
                    )
                prev_high = b.high_mps

    @property
    def max_speed_mps(self) -> float:
        return max(bins[-1].high_mps for bins in self.factors.values())

    def lookup(self, pollutant: str, speed_mps: float) -> tuple[float, bool]:
        """(grams per km, was the speed clamped to the table range)."""
        bins = self.factors[pollutant]
        if speed_mps <= bins[0].low_mps:
            return bins[0].grams_per_km, True
        for b in bins:
            if b.low_mps < speed_mps <= b.high_mps:
                return b.grams_per_km, False
        return bins[-1].grams_per_km, True

    @classmethod
    def from_csv(cls, path: str | Path, vehicle_class: str = "") -> "EmissionFactorTable":
        factors: dict[str, list[SpeedBin]] = {}
        with open(path) as fh:
            rows = [line for line in fh if not line.startswith("#")]
        for row in csv.DictReader(rows):
            factors.setdefault(row["pollutant"], []).append(
                SpeedBin(
                    float(row["bin_low_kmh"]) / 3.6,
                    float(row["bin_high_kmh"]) / 3.6,
                    float(row["grams_per_km"]),
                )
            )
        return cls(vehicle_class or Path(path).stem, factors)


def default_factor_table() -> EmissionFactorTable:
    """The bundled PHEV Euro-6d table (see the CSV header for calibration)."""
    ref = resources.files("hailsim.data") / DEFAULT_TABLE_RESOURCE
    with resources.as_file(ref) as path:
        return EmissionFactorTable.from_csv(path, "phev_euro6d")


@dataclass
class EmissionTotals:
    grams: dict[str, float] = field(default_factory=lambda: {p: 0.0 for p in POLLUTANTS})
    distance_km: float = 0.0
    clamped_trips: int = 0

    def mean_g_per_km(self, pollutant: str) -> float:
        if self.distance_km == 0.0:
            return 0.0
        return self.grams[pollutant] / self.distance_km


def _trip_grams(
    trip: "TripLog", table: EmissionFactorTable, graph: "RoadGraph | None", per_edge: bool
) -> tuple[dict[str, float], bool]:
    grams = {p: 0.0 for p in table.factors}
    if trip.distance_m <= 0.0:
        return grams, False
    clamped = False
    if per_edge:
        if graph is None:
            raise ValueError("per-edge accounting needs the graph")
        for eidx in trip.route_edges:
            e = graph.edges[eidx]
            for p in table.factors:
                f, c = table.lookup(p, e.speed_mps)
                grams[p] += f * e.length_m / 1000.0
                clamped = clamped or c
        return grams, clamped
    speed = trip.distance_m / trip.duration_s
    for p in table.factors:
        f, c = table.lookup(p, speed)
        grams[p] += f * trip.distance_m / 1000.0
        clamped = clamped or c
    return grams, clamped


def compute_trip_emissions(
    trip: "TripLog",
    table: EmissionFactorTable,
    graph: "RoadGraph | None" = None,
    per_edge: bool = False,
) -> dict[str, float]:
    """Grams per pollutant for one trip.

    The factor bin is chosen by the trip's mean speed; zero-distance trips
    emit nothing. With ``per_edge`` each edge is binned by its own speed.
    """
    grams, _ = _trip_grams(trip, table, graph, per_edge)
    return grams


def aggregate_emissions(
    trips: Iterable["TripLog"],
    table: EmissionFactorTable,
    graph: "RoadGraph | None" = None,
    per_edge: bool = False,
) -> EmissionTotals:
    """Sum per-trip emissions; mean speeds outside the table are clamped to
    the nearest bin and counted."""
    totals = EmissionTotals(grams={p: 0.0 for p in table.factors})
    for trip in trips:
        grams, clamped = _trip_grams(trip, table, graph, per_edge)
        for p, g in grams.items():
            totals.grams[p] += g
        totals.distance_km += trip.distance_m / 1000.0
        if clamped:
            totals.clamped_trips += 1
    if totals.clamped_trips:
        log.warning("%d trips had mean speeds outside the factor table", totals.clamped_trips)
    return totals
