"""Static (non-simulated) analysis of a logbook on an empty network.

Answers two questions directly from the data: when was each follow-up order
accepted relative to the driver's return trip, and how does fleet mileage
split between pickup, ride, and return driving. Return trips are estimated
with fastest paths at free-flow speeds.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import datetime, timezone

from . import routing
from .logbook import RideOrder, Shift
from .network import RoadGraph, nearest_node_index

REFERENCE_SPLIT_LINE = "reference split (observed fleet): pickup 17% / ride 52% / return 31%"


class FollowUpCategory(enum.Enum):
    """When the next order arrived, relative to the current ride."""

    DURING_RIDE = "during_ride"
    DURING_RETURN = "during_return"
    AT_POB = "at_pob"
    NONE = "none"  # last ride of the shift


class MissingReturnArrival(ValueError):
    """A ride needed a return-arrival estimate that was not supplied."""


def classify_follow_up(
    shift: Shift, return_arrivals: list[float | None]
) -> list[FollowUpCategory]:
    """Categorize every ride of a shift by its follow-up order timing.

    ``return_arrivals[i]`` is when vehicle i would reach the PoB after ride
    i's dropoff (None allowed where it is not needed). Ride i is
    DURING_RIDE if the next order arrived before its dropoff, DURING_RETURN
    if it arrived by the return arrival, AT_POB after that; the last ride
    has no follow-up (NONE).
    """
    n = len(shift.rides)
    if len(return_arrivals) != n:
        raise MissingReturnArrival(
            f"expected {n} return arrivals, got {len(return_arrivals)}"
        )
    out: list[FollowUpCategory] = []
    for i, ride in enumerate(shift.rides):
        if i == n - 1:
            out.append(FollowUpCategory.NONE)
            continue
        next_order = shift.rides[i + 1].order_time
        if next_order <= ride.dropoff_time:
            out.append(FollowUpCategory.DURING_RIDE)
            continue
        arrival = return_arrivals[i]
        if arrival is None:
            raise MissingReturnArrival(
                f"ride {ride.order_id}: follow-up after dropoff but no return arrival"
            )
        if next_order <= arrival:
            out.append(FollowUpCategory.DURING_RETURN)
        else:
            out.append(FollowUpCategory.AT_POB)
    return out


def estimate_return_arrivals(
    shifts: list[Shift], graph: RoadGraph, pob: tuple[float, float]
) -> dict[int, float]:
    """Empty-network return arrival time per ride, keyed by order_id.

    One backward all-to-one search from the PoB covers every dropoff, which
    keeps year-scale logbooks cheap. Unreachable dropoffs are omitted.
    """
    pob_node = nearest_node_index(graph, *pob)
    time_to_pob, _ = routing.travel_time_field(graph, graph.node_ids[pob_node])
    arrivals: dict[int, float] = {}
    for shift in shifts:
        for ride in shift.rides:
            node = nearest_node_index(graph, ride.dropoff_lat, ride.dropoff_lon)
            t = time_to_pob[node]
            if t != float("inf"):
                arrivals[ride.order_id] = ride.dropoff_time + float(t)
    return arrivals


def classify_logbook(
    shifts: list[Shift], graph: RoadGraph, pob: tuple[float, float]
) -> dict[int, FollowUpCategory]:
    """Follow-up category per order_id across a whole logbook."""
    arrivals = estimate_return_arrivals(shifts, graph, pob)
    result: dict[int, FollowUpCategory] = {}
    for shift in shifts:
        per_ride = [arrivals.get(r.order_id) for r in shift.rides]
        for ride, cat in zip(shift.rides, classify_follow_up(shift, per_ride)):
            result[ride.order_id] = cat
    return result


def follow_up_shares(categories) -> dict[FollowUpCategory, float]:
    """Shares over rides that have a follow-up (NONE excluded)."""
    cats = list(categories)
    counted = [c for c in cats if c != FollowUpCategory.NONE]
    if not counted:
        return {c: 0.0 for c in FollowUpCategory if c != FollowUpCategory.NONE}
    return {
        c: sum(1 for x in counted if x == c) / len(counted)
        for c in FollowUpCategory
        if c != FollowUpCategory.NONE
    }


@dataclass
class DayMileage:
    pickup_km: float = 0.0
    ride_km: float = 0.0
    return_km: float = 0.0

    @property
    def total_km(self) -> float:
        return self.pickup_km + self.ride_km + self.return_km


@dataclass
class StaticMileageReport:
    """Fleet mileage split by driving reason, from fastest-path estimates."""

    per_day: dict[str, DayMileage] = field(default_factory=dict)
    unroutable_order_ids: list[int] = field(default_factory=list)
    category_counts: dict[FollowUpCategory, int] = field(default_factory=dict)

    @property
    def totals(self) -> DayMileage:
        agg = DayMileage()
        for day in self.per_day.values():
            agg.pickup_km += day.pickup_km
            agg.ride_km += day.ride_km
            agg.return_km += day.return_km
        return agg

    @property
    def shares(self) -> dict[str, float]:
        t = self.totals
        if t.total_km == 0.0:
            return {"pickup": 0.0, "ride": 0.0, "return": 0.0}
        return {
            "pickup": t.pickup_km / t.total_km,
            "ride": t.ride_km / t.total_km,
            "return": t.return_km / t.total_km,
        }

    def format(self) -> str:
        lines = ["day,pickup_km,ride_km,return_km"]
        for day in sorted(self.per_day):
            m = self.per_day[day]
            lines.append(f"{day},{m.pickup_km:.3f},{m.ride_km:.3f},{m.return_km:.3f}")
        s = self.shares
        lines.append(
            "shares: pickup {:.1%} / ride {:.1%} / return {:.1%}".format(
                s["pickup"], s["ride"], s["return"]
            )
        )
        lines.append(REFERENCE_SPLIT_LINE)
        if self.unroutable_order_ids:
            lines.append(f"unroutable rides excluded: {len(self.unroutable_order_ids)}")
        return "\n".join(lines)


def _day_key(epoch_s: int) -> str:
    return datetime.fromtimestamp(epoch_s, tz=timezone.utc).strftime("%Y-%m-%d")


def static_mileage_report(
    shifts: list[Shift], graph: RoadGraph, pob: tuple[float, float]
) -> StaticMileageReport:
    """Mileage split into pickup, ride, and return legs per calendar day.

    Pickup legs run accept → pickup, ride legs pickup → dropoff. A return
    leg dropoff → PoB is counted whenever the follow-up was not accepted
    during the ride: in full after AT_POB and last rides, truncated at the
    order-arrival instant after DURING_RETURN (the driver diverts there).
    Rides with any unroutable leg are excluded and reported.
    """
    pob_node = nearest_node_index(graph, *pob)
    pob_id = graph.node_ids[pob_node]
    report = StaticMileageReport()
    counts: dict[FollowUpCategory, int] = {c: 0 for c in FollowUpCategory}

    for shift in shifts:
        legs: list[tuple[RideOrder, float, float]] = []
        return_routes: list[routing.Route | None] = []
        arrivals: list[float | None] = []
        broken = False
        for ride in shift.rides:
            accept = nearest_node_index(graph, ride.accept_lat, ride.accept_lon)
            pickup = nearest_node_index(graph, ride.pickup_lat, ride.pickup_lon)
            dropoff = nearest_node_index(graph, ride.dropoff_lat, ride.dropoff_lon)
            leg_in = routing.fastest_path(graph, graph.node_ids[accept], graph.node_ids[pickup])
            leg_ride = routing.fastest_path(graph, graph.node_ids[pickup], graph.node_ids[dropoff])
            leg_back = routing.fastest_path(graph, graph.node_ids[dropoff], pob_id)
            if leg_in is None or leg_ride is None:
                report.unroutable_order_ids.append(ride.order_id)
                broken = True
                break
            legs.append((ride, leg_in.length_m, leg_ride.length_m))
            return_routes.append(leg_back)
            arrivals.append(
                ride.dropoff_time + leg_back.duration_s if leg_back is not None else None
            )
        if broken:
            continue
        try:
            categories = classify_follow_up(shift, arrivals)
        except MissingReturnArrival:
            # a follow-up needed an unroutable return leg
            report.unroutable_order_ids.extend(r.order_id for r in shift.rides)
            continue
        for i, ((ride, pickup_m, ride_m), cat, back) in enumerate(
            zip(legs, categories, return_routes)
        ):
            counts[cat] += 1
            return_m = 0.0
            if cat in (FollowUpCategory.AT_POB, FollowUpCategory.NONE):
                if back is None:
                    report.unroutable_order_ids.append(ride.order_id)
                    continue
                return_m = back.length_m
            elif cat == FollowUpCategory.DURING_RETURN:
                next_order = shift.rides[i + 1].order_time
                schedule = routing.RouteSchedule.from_route(graph, back, ride.dropoff_time)
                return_m = schedule.distance_at(next_order)
            day = report.per_day.setdefault(_day_key(ride.pickup_time), DayMileage())
            day.pickup_km += pickup_m / 1000.0
            day.ride_km += ride_m / 1000.0
            day.return_km += return_m / 1000.0
    report.category_counts = counts
    return report
