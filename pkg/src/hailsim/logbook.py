"""Ride-order logbook: data model, CSV parsing, shifts, area filtering.

A logbook row records one completed ride: when it was ordered, where the
vehicle was when it accepted, and the pickup/dropoff times and locations.
Timestamps are kept as integer epoch seconds internally and serialized as
ISO 8601 UTC.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from .geo import Boundary

log = logging.getLogger(__name__)

MAX_SHIFT_GAP_S = 2 * 3600

CSV_COLUMNS = [
    "order_time",
    "vehicle_id",
    "accept_lat",
    "accept_lon",
    "pickup_time",
    "pickup_lat",
    "pickup_lon",
    "dropoff_time",
    "dropoff_lat",
    "dropoff_lon",
]


class LogbookError(ValueError):
    """Raised for unreadable logbook files (not for rejected rows)."""


@dataclass(frozen=True)
class RideOrder:
    """One ride. ``order_id`` is the row position in the source logbook and
    is the join key between simulation outputs and the reference data."""

    order_id: int
    vehicle_id: str
    order_time: int
    accept_lat: float
    accept_lon: float
    pickup_time: int
    pickup_lat: float
    pickup_lon: float
    dropoff_time: int
    dropoff_lat: float
    dropoff_lon: float

    @property
    def accept_location(self) -> tuple[float, float]:
        return (self.accept_lat, self.accept_lon)

    @property
    def pickup_location(self) -> tuple[float, float]:
        return (self.pickup_lat, self.pickup_lon)

    @property
    def dropoff_location(self) -> tuple[float, float]:
        return (self.dropoff_lat, self.dropoff_lon)

    def shifted(self, delta_s: int) -> "RideOrder":
        return replace(
            self,
            order_time=self.order_time + delta_s,
            pickup_time=self.pickup_time + delta_s,
            dropoff_time=self.dropoff_time + delta_s,
        )


@dataclass(frozen=True)
class Shift:
    """Consecutive rides of one vehicle with no pause longer than the gap
    threshold between a dropoff and the next order."""

    vehicle_id: str
    rides: tuple[RideOrder, ...]

    def __post_init__(self):
        if not self.rides:
            raise ValueError("shift must contain at least one ride")
        if any(r.vehicle_id != self.vehicle_id for r in self.rides):
            raise ValueError("shift mixes vehicle ids")

    @property
    def start(self) -> int:
        return self.rides[0].order_time

    @property
    def end(self) -> int:
        return self.rides[-1].dropoff_time

    @property
    def duration_s(self) -> int:
        return self.end - self.start

    def weekday(self) -> int:
        return datetime.fromtimestamp(self.start, tz=timezone.utc).weekday()


def parse_ts(text: str) -> int:
    """ISO 8601 timestamp with timezone to epoch seconds."""
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise LogbookError(f"malformed timestamp {text!r}") from exc
    if dt.tzinfo is None:
        raise LogbookError(f"timestamp {text!r} lacks a timezone")
    return int(dt.timestamp())


def format_ts(epoch_s: int) -> str:
    return datetime.fromtimestamp(int(epoch_s), tz=timezone.utc).isoformat()


def parse_logbook(
    path: str | Path,
    on_reject: Callable[[int, str], None] | None = None,
) -> list[RideOrder]:
    """Read a logbook CSV, returning valid rows in file order.

    Rows that violate order_time ≤ pickup_time ≤ dropoff_time or carry
    non-finite coordinates are skipped and reported with their file line
    number through ``on_reject`` (default: a WARNING log line). Structural
    problems (missing columns, malformed values) raise LogbookError.
    """

    def reject(line: int, reason: str):
        if on_reject is not None:
            on_reject(line, reason)
        else:
            log.warning("%s line %d: %s (row rejected)", path, line, reason)

    orders: list[RideOrder] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise LogbookError(f"{path}: empty file")
        missing = [c for c in CSV_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise LogbookError(f"{path}: missing columns {missing}")
        for row in reader:
            line = reader.line_num
            try:
                order_t = parse_ts(row["order_time"])
                pickup_t = parse_ts(row["pickup_time"])
                dropoff_t = parse_ts(row["dropoff_time"])
                coords = {
                    k: float(row[k])
                    for k in CSV_COLUMNS
                    if k.endswith("_lat") or k.endswith("_lon")
                }
            except LogbookError as exc:
                raise LogbookError(f"{path} line {line}: {exc}") from exc
            except (TypeError, ValueError) as exc:
                raise LogbookError(f"{path} line {line}: malformed coordinate") from exc
            if not order_t <= pickup_t <= dropoff_t:
                reject(line, "times out of order (order ≤ pickup ≤ dropoff required)")
                continue
            if any(not math.isfinite(v) for v in coords.values()):
                reject(line, "non-finite coordinate")
                continue
            orders.append(
                RideOrder(
                    order_id=len(orders),
                    vehicle_id=row["vehicle_id"],
                    order_time=order_t,
                    pickup_time=pickup_t,
                    dropoff_time=dropoff_t,
                    accept_lat=coords["accept_lat"],
                    accept_lon=coords["accept_lon"],
                    pickup_lat=coords["pickup_lat"],
                    pickup_lon=coords["pickup_lon"],
                    dropoff_lat=coords["dropoff_lat"],
                    dropoff_lon=coords["dropoff_lon"],
                )
            )
    return orders


def write_logbook(path: str | Path, orders: list[RideOrder]) -> None:
    """Write orders as CSV; row order defines order_id on re-parse."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for o in orders:
            writer.writerow(
                [
                    format_ts(o.order_time),
                    o.vehicle_id,
                    f"{o.accept_lat:.7f}",
                    f"{o.accept_lon:.7f}",
                    format_ts(o.pickup_time),
                    f"{o.pickup_lat:.7f}",
                    f"{o.pickup_lon:.7f}",
                    format_ts(o.dropoff_time),
                    f"{o.dropoff_lat:.7f}",
                    f"{o.dropoff_lon:.7f}",
                ]
            )


def extract_shifts(orders: list[RideOrder], max_gap_s: int = MAX_SHIFT_GAP_S) -> list[Shift]:
    """Group rides into shifts per vehicle.

    Rides are ordered by order_time (stable for ties) and split wherever
    the pause between a dropoff and the next order exceeds ``max_gap_s``;
    a pause of exactly ``max_gap_s`` stays within one shift.
    """
    by_vehicle: dict[str, list[RideOrder]] = {}
    for o in orders:
        by_vehicle.setdefault(o.vehicle_id, []).append(o)
    shifts: list[Shift] = []
    for vid in sorted(by_vehicle):
        rides = sorted(by_vehicle[vid], key=lambda o: o.order_time)
        current = [rides[0]]
        for o in rides[1:]:
            if o.order_time - current[-1].dropoff_time > max_gap_s:
                shifts.append(Shift(vid, tuple(current)))
                current = [o]
            else:
                current.append(o)
        shifts.append(Shift(vid, tuple(current)))
    return shifts


def filter_out_of_area(
    shifts: list[Shift], boundary: Boundary
) -> tuple[list[Shift], list[Shift]]:
    """Split shifts into (kept, dismissed).

    A shift is dismissed as a whole if any of its pickup or dropoff
    locations falls outside the boundary.
    """
    kept: list[Shift] = []
    dismissed: list[Shift] = []
    for shift in shifts:
        ok = all(
            boundary.contains(r.pickup_lat, r.pickup_lon)
            and boundary.contains(r.dropoff_lat, r.dropoff_lon)
            for r in shift.rides
        )
        (kept if ok else dismissed).append(shift)
    return kept, dismissed
