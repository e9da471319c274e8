"""Synthetic demand and logbook generation.

Two generators live here. ``synthesize_demand`` fabricates a full year of
ride orders with a controlled spatial law (tight venue clusters over a
smooth city core) and controlled follow-up timing, standing in for a real
operator's logbook. ``generate_logbook`` then builds a single-day fleet
logbook by resampling whole shifts from such a source, the same way a
fleet of a chosen size would replay typical behavior of that weekday.

All randomness flows through named ``random.Random`` streams seeded with
strings, so equal seeds give byte-identical outputs on any platform.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta, timezone

from .geo import haversine_m, interpolate
from .logbook import MAX_SHIFT_GAP_S, RideOrder, Shift

log = logging.getLogger(__name__)

# reference week used to place single-day logbooks on a canonical date
_CANONICAL_MONDAY = date(2025, 6, 2)

WEEKDAY_NAMES = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]


class DemandConfigError(ValueError):
    """Raised for invalid demand parameters."""


@dataclass(frozen=True)
class DemandParams:
    """Knobs of the synthetic-demand law.

    Spatial model: a pickup/dropoff is drawn from a venue (tight Gaussian
    around one of ``n_venues`` rank-weighted anchor points) with
    probability ``p_venue``, from a smooth Gaussian core with ``p_core``,
    else uniformly over the bounding box. Temporal model: shifts start in
    a two-peak daytime distribution; every non-final ride draws a
    follow-up class per weekday and the next order time is constructed so
    that routed classification reproduces the class (see the bound
    arguments ``v_max_mps`` / ``snap_slack_m``).
    """

    center: tuple[float, float]
    pob: tuple[float, float]
    bbox: tuple[float, float, float, float]  # lat_min, lon_min, lat_max, lon_max
    start_date: str = "2025-01-01"
    n_days: int = 365
    # Mon..Sun
    daily_orders: tuple[int, ...] = (150, 145, 155, 150, 170, 210, 180)
    during_ride_p: tuple[float, ...] = (0.33, 0.33, 0.31, 0.33, 0.37, 0.49, 0.48)
    during_return_frac: float = 5.0 / 6.0
    n_venues: int = 90
    venue_sigma_m: float = 40.0
    venue_spread_m: float = 1400.0
    core_sigma_m: float = 1100.0
    p_venue: float = 0.55
    p_core: float = 0.35
    p_uniform: float = 0.10
    venue_rank_exp: float = 0.8
    rides_per_shift_mean: float = 4.2
    max_rides_per_shift: int = 9
    shift_start_hours: tuple[float, float] = (5.0, 21.0)
    day_cutoff_hour: float = 22.5
    ride_speed_mps: float = 7.0
    pickup_speed_mps: float = 8.5
    detour_factor: float = 1.35
    # conservative network bounds backing the follow-up constructions
    v_max_mps: float = 14.0
    snap_slack_m: float = 600.0
    min_return_dist_m: float = 1200.0
    atpob_wait_s: tuple[int, int] = (3600, 7199)

    def validate(self) -> None:
        if any(n < 0 for n in self.daily_orders) or len(self.daily_orders) != 7:
            raise DemandConfigError("daily_orders must be 7 nonnegative counts")
        if len(self.during_ride_p) != 7 or any(not 0 <= p <= 1 for p in self.during_ride_p):
            raise DemandConfigError("during_ride_p must be 7 probabilities")
        if not 0 <= self.during_return_frac <= 1:
            raise DemandConfigError("during_return_frac must be in [0, 1]")
        weights = (self.p_venue, self.p_core, self.p_uniform)
        if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
            raise DemandConfigError("spatial weights must be nonnegative and sum to 1")
        if self.n_venues < 1 or self.n_days < 0:
            raise DemandConfigError("n_venues and n_days must be positive")
        lat_min, lon_min, lat_max, lon_max = self.bbox
        if not (lat_min < lat_max and lon_min < lon_max):
            raise DemandConfigError("bbox must span a nonempty area")
        if self.v_max_mps <= 0 or self.min_return_dist_m <= self.snap_slack_m:
            raise DemandConfigError("v_max_mps must be positive and min_return_dist_m > snap_slack_m")


class _SpatialMixture:
    """Venue-quantized spatial law over a bounding box."""

    def __init__(self, params: DemandParams, rng: random.Random):
        self.p = params
        lat_min, lon_min, lat_max, lon_max = params.bbox
        self._m_per_deg_lat = 111_320.0
        self._m_per_deg_lon = 111_320.0 * math.cos(math.radians(params.center[0]))
        self.venues = []
        while len(self.venues) < params.n_venues:
            lat = rng.gauss(params.center[0], params.venue_spread_m / self._m_per_deg_lat)
            lon = rng.gauss(params.center[1], params.venue_spread_m / self._m_per_deg_lon)
            if lat_min <= lat <= lat_max and lon_min <= lon <= lon_max:
                self.venues.append((lat, lon))
        weights = [(i + 1) ** -params.venue_rank_exp for i in range(params.n_venues)]
        total = sum(weights)
        self.cum_weights = []
        acc = 0.0
        for w in weights:
            acc += w / total
            self.cum_weights.append(acc)

    def _clip(self, lat: float, lon: float) -> tuple[float, float]:
        lat_min, lon_min, lat_max, lon_max = self.p.bbox
        return min(max(lat, lat_min), lat_max), min(max(lon, lon_min), lon_max)

    def draw(self, rng: random.Random) -> tuple[float, float]:
        u = rng.random()
        if u < self.p.p_venue:
            r = rng.random()
            idx = 0
            while idx < len(self.cum_weights) - 1 and r > self.cum_weights[idx]:
                idx += 1
            vlat, vlon = self.venues[idx]
            lat = rng.gauss(vlat, self.p.venue_sigma_m / self._m_per_deg_lat)
            lon = rng.gauss(vlon, self.p.venue_sigma_m / self._m_per_deg_lon)
        elif u < self.p.p_venue + self.p.p_core:
            lat = rng.gauss(self.p.center[0], self.p.core_sigma_m / self._m_per_deg_lat)
            lon = rng.gauss(self.p.center[1], self.p.core_sigma_m / self._m_per_deg_lon)
        else:
            lat_min, lon_min, lat_max, lon_max = self.p.bbox
            lat = rng.uniform(lat_min, lat_max)
            lon = rng.uniform(lon_min, lon_max)
        return self._clip(lat, lon)

    def draw_far_from(
        self, rng: random.Random, anchor: tuple[float, float], min_dist_m: float
    ) -> tuple[float, float]:
        for _ in range(200):
            lat, lon = self.draw(rng)
            if haversine_m(lat, lon, *anchor) >= min_dist_m:
                return (lat, lon)
        raise DemandConfigError(
            f"cannot place a point at least {min_dist_m} m from {anchor}; bbox too small"
        )


def _shift_start_s(params: DemandParams, rng: random.Random) -> int:
    lo, hi = params.shift_start_hours
    u = rng.random()
    if u < 0.35:
        h = rng.gauss(8.5, 1.5)
    elif u < 0.80:
        h = rng.gauss(17.5, 2.0)
    else:
        h = rng.uniform(lo, hi)
    return int(min(max(h, lo), hi) * 3600.0)


def _drive_estimate_s(dist_m: float, speed_mps: float, factor: float) -> float:
    return dist_m * factor / speed_mps


def synthesize_demand(params: DemandParams, seed: int | str = 0) -> list[RideOrder]:
    """Emit a seeded synthetic logbook covering ``params.n_days`` days.

    Each shift occupies its own synthetic vehicle, so shift extraction
    recovers the generated shifts one to one. order_id equals the row
    position after sorting all rides by order time.
    """
    params.validate()
    mix = _SpatialMixture(params, random.Random(f"{seed}|venues"))
    rng = random.Random(f"{seed}|demand")
    start = datetime.combine(
        date.fromisoformat(params.start_date), time(0, 0), tzinfo=timezone.utc
    )
    orders: list[RideOrder] = []
    pob = params.pob

    for day_idx in range(params.n_days):
        day_start = int((start + timedelta(days=day_idx)).timestamp())
        weekday = (start + timedelta(days=day_idx)).weekday()
        remaining = params.daily_orders[weekday]
        cutoff = day_start + int(params.day_cutoff_hour * 3600)
        shift_no = 0
        while remaining > 0:
            geom_p = 1.0 / params.rides_per_shift_mean
            n_rides = 1
            while (
                n_rides < params.max_rides_per_shift
                and n_rides < remaining
                and rng.random() > geom_p
            ):
                n_rides += 1
            vehicle_id = f"d{day_idx:03d}s{shift_no:03d}"
            shift_no += 1
            rides = _build_shift(
                params, mix, rng, vehicle_id, day_start + _shift_start_s(params, rng),
                n_rides, cutoff, pob,
            )
            remaining -= len(rides)
            orders.extend(rides)

    orders.sort(key=lambda o: (o.order_time, o.vehicle_id))
    return [replace(o, order_id=i) for i, o in enumerate(orders)]


def _build_shift(
    params: DemandParams,
    mix: _SpatialMixture,
    rng: random.Random,
    vehicle_id: str,
    start_s: int,
    n_rides: int,
    cutoff_s: int,
    pob: tuple[float, float],
) -> list[RideOrder]:
    rides: list[RideOrder] = []
    order_t = start_s
    accept = pob
    for i in range(n_rides):
        pickup = mix.draw(rng)
        approach_m = haversine_m(*accept, *pickup)
        pickup_t = order_t + max(
            30,
            int(
                _drive_estimate_s(approach_m, params.pickup_speed_mps, params.detour_factor)
                + rng.gauss(60.0, 20.0)
            ),
        )
        last = i == n_rides - 1 or order_t > cutoff_s
        follow_up = None
        if not last:
            u = rng.random()
            if u < params.during_ride_p[_weekday_of(order_t)]:
                follow_up = "during_ride"
            elif rng.random() < params.during_return_frac:
                follow_up = "during_return"
            else:
                follow_up = "at_pob"
        if follow_up == "during_return":
            dropoff = mix.draw_far_from(rng, pob, params.min_return_dist_m)
        else:
            dropoff = mix.draw(rng)
        ride_m = haversine_m(*pickup, *dropoff)
        dropoff_t = pickup_t + max(
            60,
            int(
                _drive_estimate_s(ride_m, params.ride_speed_mps, params.detour_factor)
                + rng.gauss(90.0, 30.0)
            ),
        )
        rides.append(
            RideOrder(
                order_id=-1,
                vehicle_id=vehicle_id,
                order_time=order_t,
                accept_lat=accept[0],
                accept_lon=accept[1],
                pickup_time=pickup_t,
                pickup_lat=pickup[0],
                pickup_lon=pickup[1],
                dropoff_time=dropoff_t,
                dropoff_lat=dropoff[0],
                dropoff_lon=dropoff[1],
            )
        )
        if follow_up is None:
            break
        if follow_up == "during_ride":
            order_t = rng.randint(pickup_t + 1, max(pickup_t + 1, dropoff_t - 1))
            frac = (order_t - pickup_t) / max(1, dropoff_t - pickup_t)
            accept = interpolate(*pickup, *dropoff, frac)
        elif follow_up == "during_return":
            # stays below the routed return time: straight distance is a
            # lower bound on route length and v_max on speed, minus slack
            # for node snapping
            to_pob_m = haversine_m(*dropoff, *pob)
            usable_s = (to_pob_m - params.snap_slack_m) / params.v_max_mps
            offset = max(1, int(rng.uniform(1.0, max(2.0, usable_s))))
            order_t = dropoff_t + offset
            frac = min(1.0, offset * 0.7 * params.v_max_mps / max(1.0, to_pob_m))
            accept = interpolate(*dropoff, *pob, frac)
        else:
            order_t = dropoff_t + rng.randint(*params.atpob_wait_s)
            accept = pob
    return rides


def _weekday_of(epoch_s: int) -> int:
    return datetime.fromtimestamp(epoch_s, tz=timezone.utc).weekday()


@dataclass
class SyntheticLogbook:
    """A single-day fleet logbook resampled from source shifts."""

    day_of_week: int
    fleet_size: int
    seed: int | str
    assignments: dict[str, list[Shift]]
    partial: bool = False
    orders: list[RideOrder] = field(default_factory=list)

    @property
    def n_vehicles(self) -> int:
        return len(self.assignments)

    @property
    def shifts(self) -> list[Shift]:
        return [s for shifts in self.assignments.values() for s in shifts]


def generate_logbook(
    source: list[Shift],
    day_of_week: int,
    fleet_size: int,
    seed: int | str = 0,
) -> SyntheticLogbook:
    """Build a fleet logbook for one weekday by resampling source shifts.

    Repeatedly draws a uniformly random ride executed on that weekday and
    expands it to its full shift (so longer shifts are proportionally more
    likely). The shift is placed on the vehicle currently being filled
    when it keeps a pause of at least 2 h to that vehicle's other shifts
    and the vehicle holds fewer than 3; otherwise the next vehicle is
    opened, until ``fleet_size`` vehicles are populated. Each source shift
    is used at most once; running out of shifts yields a partial logbook
    with a warning.
    """
    if fleet_size < 1:
        raise ValueError("fleet_size must be at least 1")
    pool = [s for s in source if s.weekday() == day_of_week]
    if not pool:
        raise ValueError(f"no source shifts on weekday {day_of_week}")
    # uniform ride draw = shift draw weighted by ride count
    ride_owner: list[int] = []
    for idx, s in enumerate(pool):
        ride_owner.extend([idx] * len(s.rides))

    canonical = _CANONICAL_MONDAY + timedelta(days=day_of_week)
    rng = random.Random(f"{seed}|logbook")
    used: set[int] = set()
    vehicles: list[list[Shift]] = []
    partial = False

    while True:
        if len(used) == len(pool):
            partial = len(vehicles) < fleet_size
            break
        while True:
            idx = ride_owner[rng.randrange(len(ride_owner))]
            if idx not in used:
                break
        used.add(idx)
        shift = _normalize_to(pool[idx], canonical)
        if vehicles and _fits(vehicles[-1], shift):
            vehicles[-1].append(shift)
        elif len(vehicles) < fleet_size:
            vehicles.append([shift])
        else:
            break
    if partial:
        log.warning(
            "source exhausted at %d of %d vehicles; logbook is partial",
            len(vehicles), fleet_size,
        )

    assignments: dict[str, list[Shift]] = {}
    all_rides: list[RideOrder] = []
    for v_no, shifts in enumerate(vehicles, start=1):
        vid = f"v{v_no:03d}"
        relabeled = [
            Shift(vid, tuple(replace(r, vehicle_id=vid) for r in s.rides))
            for s in sorted(shifts, key=lambda s: s.start)
        ]
        assignments[vid] = relabeled
        for s in relabeled:
            all_rides.extend(s.rides)

    all_rides.sort(key=lambda o: (o.order_time, o.vehicle_id, o.pickup_time))
    all_rides = [replace(o, order_id=i) for i, o in enumerate(all_rides)]
    by_key = {(o.vehicle_id, o.order_time, o.pickup_time): o for o in all_rides}
    assignments = {
        vid: [
            Shift(vid, tuple(by_key[(vid, r.order_time, r.pickup_time)] for r in s.rides))
            for s in shifts
        ]
        for vid, shifts in assignments.items()
    }
    return SyntheticLogbook(
        day_of_week=day_of_week,
        fleet_size=fleet_size,
        seed=seed,
        assignments=assignments,
        partial=partial,
        orders=all_rides,
    )


def _normalize_to(shift: Shift, target_day: date) -> Shift:
    """Move a shift to the canonical date, preserving time of day and all
    intra-shift deltas."""
    start_day = datetime.fromtimestamp(shift.start, tz=timezone.utc).date()
    delta_s = int((target_day - start_day).days) * 86400
    return Shift(shift.vehicle_id, tuple(r.shifted(delta_s) for r in shift.rides))


def _fits(existing: list[Shift], candidate: Shift) -> bool:
    if len(existing) >= 3:
        return False
    return all(
        candidate.start - s.end >= MAX_SHIFT_GAP_S or s.start - candidate.end >= MAX_SHIFT_GAP_S
        for s in existing
    )
