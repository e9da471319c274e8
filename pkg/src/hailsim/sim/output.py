"""Simulation outputs and their CSV serialization.

All writers use fixed numeric formatting (millisecond times, millimetre
distances, 1e-7 degree coordinates) so that identical runs serialize to
identical bytes on any platform.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path


class TripReason(enum.Enum):
    PICKUP = "pickup"
    RIDE = "ride"
    REBALANCING = "rebalancing"


@dataclass(frozen=True)
class TripLog:
    """One continuous vehicle movement.

    ``route_edges`` holds edge indices of the scenario graph; a diverted
    trip may begin partway along its first edge (``start_frac``) and a
    truncated rebalancing trip ends partway along its last (``end_frac``),
    so ``distance_m`` is the driven length of the (partial) route.
    """

    vehicle_id: str
    shift_idx: int
    reason: TripReason
    order_id: int | None
    start_s: float
    end_s: float
    start_lat: float
    start_lon: float
    end_lat: float
    end_lon: float
    distance_m: float
    route_edges: tuple[int, ...]
    start_frac: float = 0.0
    end_frac: float = 1.0

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class OrderOutcome:
    order_id: int
    vehicle_id: str
    status: str  # served | unroutable
    pickup_s: float | None
    dropoff_s: float | None


@dataclass(frozen=True)
class ShiftSummary:
    """Per-shift roll-up; duration runs from the first pickup-leg departure
    to the final arrival of the shift's last trip, including any closing
    rebalancing leg."""

    shift_idx: int
    vehicle_id: str
    n_rides: int
    start_s: float
    end_s: float
    pickup_km: float
    ride_km: float
    rebalancing_km: float

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    @property
    def total_km(self) -> float:
        return self.pickup_km + self.ride_km + self.rebalancing_km


@dataclass
class SimOutput:
    """Everything one run produced."""

    trips: list[TripLog]
    outcomes: list[OrderOutcome]
    shifts: list[ShiftSummary]
    meta: dict = field(default_factory=dict)
    event_trace: list[str] | None = None

    def mileage_by_reason_m(self) -> dict[TripReason, float]:
        totals = {r: 0.0 for r in TripReason}
        for t in self.trips:
            totals[t.reason] += t.distance_m
        return totals

    @property
    def total_mileage_m(self) -> float:
        by_reason = self.mileage_by_reason_m()
        return (
            by_reason[TripReason.PICKUP]
            + by_reason[TripReason.RIDE]
            + by_reason[TripReason.REBALANCING]
        )

    def write_dir(self, out_dir: str | Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_trips_csv(out_dir / "trips.csv", self.trips)
        write_orders_csv(out_dir / "orders.csv", self.outcomes)
        write_shifts_csv(out_dir / "shifts.csv", self.shifts)
        if self.event_trace is not None:
            (out_dir / "events.log").write_text("\n".join(self.event_trace) + "\n")


TRIP_COLUMNS = [
    "vehicle_id", "shift_idx", "reason", "order_id", "start_s", "end_s",
    "start_lat", "start_lon", "end_lat", "end_lon", "distance_m",
    "start_frac", "end_frac", "route_edges",
]


def write_trips_csv(path: str | Path, trips: list[TripLog]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRIP_COLUMNS)
        for t in trips:
            w.writerow(
                [
                    t.vehicle_id,
                    t.shift_idx,
                    t.reason.value,
                    "" if t.order_id is None else t.order_id,
                    f"{t.start_s:.3f}",
                    f"{t.end_s:.3f}",
                    f"{t.start_lat:.7f}",
                    f"{t.start_lon:.7f}",
                    f"{t.end_lat:.7f}",
                    f"{t.end_lon:.7f}",
                    f"{t.distance_m:.3f}",
                    f"{t.start_frac:.9f}",
                    f"{t.end_frac:.9f}",
                    "|".join(str(e) for e in t.route_edges),
                ]
            )


def read_trips_csv(path: str | Path) -> list[TripLog]:
    trips = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            trips.append(
                TripLog(
                    vehicle_id=row["vehicle_id"],
                    shift_idx=int(row["shift_idx"]),
                    reason=TripReason(row["reason"]),
                    order_id=int(row["order_id"]) if row["order_id"] else None,
                    start_s=float(row["start_s"]),
                    end_s=float(row["end_s"]),
                    start_lat=float(row["start_lat"]),
                    start_lon=float(row["start_lon"]),
                    end_lat=float(row["end_lat"]),
                    end_lon=float(row["end_lon"]),
                    distance_m=float(row["distance_m"]),
                    start_frac=float(row["start_frac"]),
                    end_frac=float(row["end_frac"]),
                    route_edges=tuple(
                        int(e) for e in row["route_edges"].split("|") if e != ""
                    ),
                )
            )
    return trips


def write_orders_csv(path: str | Path, outcomes: list[OrderOutcome]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["order_id", "vehicle_id", "status", "pickup_s", "dropoff_s"])
        for o in outcomes:
            w.writerow(
                [
                    o.order_id,
                    o.vehicle_id,
                    o.status,
                    "" if o.pickup_s is None else f"{o.pickup_s:.3f}",
                    "" if o.dropoff_s is None else f"{o.dropoff_s:.3f}",
                ]
            )


def read_orders_csv(path: str | Path) -> list[OrderOutcome]:
    outcomes = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            outcomes.append(
                OrderOutcome(
                    order_id=int(row["order_id"]),
                    vehicle_id=row["vehicle_id"],
                    status=row["status"],
                    pickup_s=float(row["pickup_s"]) if row["pickup_s"] else None,
                    dropoff_s=float(row["dropoff_s"]) if row["dropoff_s"] else None,
                )
            )
    return outcomes


def write_shifts_csv(path: str | Path, shifts: list[ShiftSummary]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["shift_idx", "vehicle_id", "n_rides", "start_s", "end_s",
             "pickup_km", "ride_km", "rebalancing_km", "total_km"]
        )
        for s in shifts:
            w.writerow(
                [
                    s.shift_idx,
                    s.vehicle_id,
                    s.n_rides,
                    f"{s.start_s:.3f}",
                    f"{s.end_s:.3f}",
                    f"{s.pickup_km:.6f}",
                    f"{s.ride_km:.6f}",
                    f"{s.rebalancing_km:.6f}",
                    f"{s.total_km:.6f}",
                ]
            )


def read_shifts_csv(path: str | Path) -> list[ShiftSummary]:
    shifts = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            shifts.append(
                ShiftSummary(
                    shift_idx=int(row["shift_idx"]),
                    vehicle_id=row["vehicle_id"],
                    n_rides=int(row["n_rides"]),
                    start_s=float(row["start_s"]),
                    end_s=float(row["end_s"]),
                    pickup_km=float(row["pickup_km"]),
                    ride_km=float(row["ride_km"]),
                    rebalancing_km=float(row["rebalancing_km"]),
                )
            )
    return shifts
