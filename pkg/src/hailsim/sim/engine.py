"""Deterministic discrete-event fleet simulation.

One run replays a day's logbook orders against a road graph under a
rebalancing strategy. The dispatcher keeps the logbook's original
vehicle assignment; vehicles move along fastest-path routes as points
at profile-adjusted edge speeds, dwell at stops, and apply the strategy
after every drop-off without a pending follow-up.

Determinism: events are processed in (time, kind, subject, insertion)
order, every random draw comes from a named per-vehicle stream, and all
event times derive from route schedules, so identical inputs yield
byte-identical outputs.
"""

from __future__ import annotations

import enum
import logging
import random
import time
from dataclasses import dataclass, field
from typing import Callable

from .. import routing
from ..logbook import RideOrder, extract_shifts
from ..network import RoadGraph, nearest_node_index
from .config import ScenarioConfig, Strategy
from .events import EventKind, EventQueue
from .output import OrderOutcome, ShiftSummary, SimOutput, TripLog, TripReason

log = logging.getLogger(__name__)


class SimulationStuck(RuntimeError):
    """A run exceeded its wall-clock budget without draining its events."""


class VehicleState(enum.Enum):
    IDLE_AT_POB = "IdleAtPoB"
    EN_ROUTE_TO_PICKUP = "EnRouteToPickup"
    DWELL_AT_PICKUP = "DwellAtPickup"
    IN_RIDE = "InRide"
    DWELL_AT_DROPOFF = "DwellAtDropoff"
    REBALANCING_TO_POB = "RebalancingToPoB"
    REBALANCING_TO_HOTSPOT = "RebalancingToHotspot"
    WAITING_AT_DROPOFF = "WaitingAtDropoff"
    WAITING_AT_HOTSPOT = "WaitingAtHotspot"


_STATIONARY = frozenset(
    {
        VehicleState.IDLE_AT_POB,
        VehicleState.WAITING_AT_DROPOFF,
        VehicleState.WAITING_AT_HOTSPOT,
    }
)
_REBALANCING = frozenset(
    {VehicleState.REBALANCING_TO_POB, VehicleState.REBALANCING_TO_HOTSPOT}
)


class RebalanceKind(enum.Enum):
    GO_TO_POB = "GoToPoB"
    STAY = "Stay"
    GO_TO_HOTSPOT = "GoToHotspot"


@dataclass(frozen=True)
class RebalanceAction:
    kind: RebalanceKind
    hotspot_id: int | None = None


def decide_rebalancing(
    config: ScenarioConfig,
    state: VehicleState,
    dropoff: tuple[float, float],
    rng: random.Random,
) -> RebalanceAction:
    """Post-dropoff move for a vehicle with no pending follow-up.

    Return sends the vehicle home, Wait keeps it in place, Hotspot keeps
    it in place with probability ``hotspot_wait_probability`` and
    otherwise targets the hotspot nearest the drop-off.
    """
    if config.strategy is Strategy.RETURN:
        return RebalanceAction(RebalanceKind.GO_TO_POB)
    if config.strategy is Strategy.WAIT:
        return RebalanceAction(RebalanceKind.STAY)
    if config.hotspot_set is None:
        raise ValueError("Hotspot strategy requires a hotspot set")
    if rng.random() < config.hotspot_wait_probability:
        return RebalanceAction(RebalanceKind.STAY)
    hid = config.hotspot_set.nearest(*dropoff)
    return RebalanceAction(RebalanceKind.GO_TO_HOTSPOT, hid)


Dispatcher = Callable[[RideOrder, dict[str, VehicleState]], str]


def dispatch_order(order: RideOrder, fleet: dict[str, VehicleState]) -> str:
    """Default dispatcher: honor the logbook's recorded assignment."""
    if order.vehicle_id not in fleet:
        raise ValueError(f"order {order.order_id} assigned to unknown vehicle "
                         f"{order.vehicle_id!r}")
    return order.vehicle_id


@dataclass
class _Vehicle:
    vid: str
    state: VehicleState
    node: int  # node index while stationary or dwelling
    rng: random.Random
    version: int = 0  # bumps whenever the movement plan is replaced
    plan: routing.RouteSchedule | None = None
    purpose: str = ""  # pickup | ride | pob | hotspot
    order: RideOrder | None = None
    queue: list[RideOrder] = field(default_factory=list)
    last_shift: int = -1


@dataclass
class _Outcome:
    vehicle_id: str = ""
    status: str = "pending"
    pickup_s: float | None = None
    dropoff_s: float | None = None


class _Sim:
    def __init__(
        self,
        config: ScenarioConfig,
        orders: list[RideOrder],
        graph: RoadGraph,
        dispatcher: Dispatcher,
        trace: bool,
    ):
        config.validate()
        self.config = config
        self.graph = graph
        self.orders = sorted(orders, key=lambda o: (o.order_time, o.order_id))
        self.dispatcher = dispatcher
        self.events = EventQueue()
        self.trips: list[TripLog] = []
        self.trace: list[str] | None = [] if trace else None

        self.pob_node = nearest_node_index(graph, *config.pob)
        self.hotspot_node: dict[int, int] = {}
        if config.hotspot_set is not None:
            for h in config.hotspot_set.hotspots:
                self.hotspot_node[h.hotspot_id] = nearest_node_index(
                    graph, h.lat, h.lon
                )
        self.pickup_node = {
            o.order_id: nearest_node_index(graph, o.pickup_lat, o.pickup_lon)
            for o in self.orders
        }
        self.dropoff_node = {
            o.order_id: nearest_node_index(graph, o.dropoff_lat, o.dropoff_lon)
            for o in self.orders
        }

        self.source_shifts = extract_shifts(self.orders)
        self.shift_of: dict[int, int] = {}
        for idx, shift in enumerate(self.source_shifts):
            for ride in shift.rides:
                self.shift_of[ride.order_id] = idx

        self.vehicles: dict[str, _Vehicle] = {}
        for vid in sorted({o.vehicle_id for o in self.orders}):
            self.vehicles[vid] = _Vehicle(
                vid,
                VehicleState.IDLE_AT_POB,
                self.pob_node,
                random.Random(f"{config.seed}|rebalance|{vid}"),
            )
        self.outcomes: dict[int, _Outcome] = {
            o.order_id: _Outcome() for o in self.orders
        }

    # -- small helpers ---------------------------------------------------

    def node_id(self, idx: int):
        return self.graph.node_ids[idx]

    def factor_at(self, t: float) -> float:
        return self.config.profile.factor_at(t)

    def log_event(self, t: float, kind: EventKind, subject: str, detail: str) -> None:
        if self.trace is not None:
            self.trace.append(f"{t:.3f} {kind.name} {subject} {detail}")

    def schedule_start(self, sched: routing.RouteSchedule) -> tuple[float, float]:
        if sched.segments:
            return sched.segments[0].a
        return self.graph.node_latlon(sched.start_node)

    # -- leg construction ------------------------------------------------

    def plan_from_node(self, node: int, dest: int, now: float):
        route = routing.fastest_path(
            self.graph, self.node_id(node), self.node_id(dest), now,
            self.config.profile,
        )
        if route is None:
            return None
        return routing.RouteSchedule.from_route(
            self.graph, route, now, self.factor_at(now)
        )

    def plan_from_cut(self, cut: routing.CutPoint, dest: int, now: float):
        """Continuation plan for a vehicle interrupted mid-route."""
        if cut.edge is None:
            return self.plan_from_node(cut.node, dest, now)
        cont = routing.fastest_path_from_edge(
            self.graph, cut.edge, self.node_id(dest), now, self.config.profile
        )
        if cont is None:
            return None
        if cut.edge_frac >= 1.0:
            # already at the edge's head (turn wait or arrival instant)
            return routing.RouteSchedule.from_route(
                self.graph, cont, now, self.factor_at(now)
            )
        return routing.RouteSchedule(
            self.graph,
            (cut.edge,) + cont.edges,
            now,
            self.factor_at(now),
            start_frac=cut.edge_frac,
        )

    def begin_leg(self, veh: _Vehicle, sched: routing.RouteSchedule,
                  purpose: str) -> None:
        veh.version += 1
        veh.plan = sched
        veh.purpose = purpose
        self.events.push(sched.arrival_s, EventKind.VEHICLE_ARRIVED, veh.vid,
                         veh.version)

    def finish_leg(self, veh: _Vehicle, reason: TripReason, now: float,
                   shift_idx: int, order_id: int | None) -> TripLog:
        sched = veh.plan
        start = self.schedule_start(sched)
        end = self.graph.node_latlon(sched.end_node)
        trip = TripLog(
            vehicle_id=veh.vid,
            shift_idx=shift_idx,
            reason=reason,
            order_id=order_id,
            start_s=sched.depart_s,
            end_s=now,
            start_lat=start[0],
            start_lon=start[1],
            end_lat=end[0],
            end_lon=end[1],
            distance_m=sched.total_length_m,
            route_edges=sched.edges,
            start_frac=sched.start_frac,
        )
        self.trips.append(trip)
        veh.node = sched.end_node
        veh.plan = None
        veh.purpose = ""
        return trip

    # -- order flow ------------------------------------------------------

    def begin_pickup(self, veh: _Vehicle, order: RideOrder, now: float,
                     cut: routing.CutPoint | None = None) -> bool:
        """Start the pickup leg; returns False if the leg is unroutable."""
        dest = self.pickup_node[order.order_id]
        if cut is None:
            sched = self.plan_from_node(veh.node, dest, now)
        else:
            sched = self.plan_from_cut(cut, dest, now)
        if sched is None:
            self.flag_unroutable(order, now, "pickup leg")
            return False
        veh.state = VehicleState.EN_ROUTE_TO_PICKUP
        veh.order = order
        veh.last_shift = self.shift_of[order.order_id]
        self.begin_leg(veh, sched, "pickup")
        return True

    def flag_unroutable(self, order: RideOrder, now: float, leg: str) -> None:
        out = self.outcomes[order.order_id]
        out.status = "unroutable"
        out.pickup_s = None
        out.dropoff_s = None
        log.warning("order %d: %s unroutable, order flagged", order.order_id, leg)
        self.log_event(now, EventKind.REBALANCE_DECISION, order.vehicle_id,
                       f"order={order.order_id} unroutable {leg}")

    def next_task(self, veh: _Vehicle, now: float) -> None:
        """At a stop with nothing in hand: follow-up first, else strategy."""
        while veh.queue:
            order = veh.queue.pop(0)
            if self.begin_pickup(veh, order, now):
                return
        veh.state = VehicleState.DWELL_AT_DROPOFF
        self.events.push(now, EventKind.REBALANCE_DECISION, veh.vid, veh.version)

    # -- event handlers ---------------------------------------------------

    def on_order_issued(self, order: RideOrder, now: float) -> None:
        fleet = {vid: v.state for vid, v in self.vehicles.items()}
        vid = self.dispatcher(order, fleet)
        if vid not in self.vehicles:
            raise ValueError(f"dispatcher returned unknown vehicle {vid!r}")
        self.outcomes[order.order_id].vehicle_id = vid
        self.events.push(
            now + self.config.message_latency_s,
            EventKind.ASSIGNMENT_DELIVERED, vid, order,
        )

    def on_assignment(self, veh: _Vehicle, order: RideOrder, now: float) -> None:
        if veh.state in _STATIONARY:
            self.begin_pickup(veh, order, now)
        elif veh.state in _REBALANCING:
            self.divert(veh, order, now)
        else:
            veh.queue.append(order)

    def divert(self, veh: _Vehicle, order: RideOrder, now: float) -> None:
        """Truncate the rebalancing trip and head to the new pickup.

        The continuation is computed first; if the pickup is unreachable
        from here the vehicle keeps its original plan untouched.
        """
        old_plan = veh.plan
        cut = old_plan.cut_at(now)
        dest = self.pickup_node[order.order_id]
        sched = self.plan_from_cut(cut, dest, now)
        if sched is None:
            self.flag_unroutable(order, now, "diverted pickup leg")
            return
        if cut.edge is None:
            driven: tuple[int, ...] = ()
            end_frac = 1.0
        else:
            driven = old_plan.edges[: old_plan.edges.index(cut.edge) + 1]
            end_frac = cut.edge_frac
        start = self.schedule_start(old_plan)
        self.trips.append(
            TripLog(
                vehicle_id=veh.vid,
                shift_idx=veh.last_shift,
                reason=TripReason.REBALANCING,
                order_id=None,
                start_s=old_plan.depart_s,
                end_s=cut.time_s,
                start_lat=start[0],
                start_lon=start[1],
                end_lat=cut.position[0],
                end_lon=cut.position[1],
                distance_m=cut.distance_m,
                route_edges=driven,
                start_frac=old_plan.start_frac,
                end_frac=end_frac,
            )
        )
        veh.state = VehicleState.EN_ROUTE_TO_PICKUP
        veh.order = order
        veh.last_shift = self.shift_of[order.order_id]
        self.begin_leg(veh, sched, "pickup")
        self.log_event(now, EventKind.VEHICLE_ARRIVED, veh.vid,
                       f"diverted at {cut.distance_m:.1f} m")

    def on_arrival(self, veh: _Vehicle, now: float) -> None:
        order = veh.order
        if veh.purpose == "pickup":
            self.finish_leg(veh, TripReason.PICKUP, now,
                            self.shift_of[order.order_id], order.order_id)
            veh.state = VehicleState.DWELL_AT_PICKUP
            self.events.push(now + self.config.min_dwell_s,
                             EventKind.DWELL_COMPLETE, veh.vid, veh.version)
        elif veh.purpose == "ride":
            self.finish_leg(veh, TripReason.RIDE, now,
                            self.shift_of[order.order_id], order.order_id)
            out = self.outcomes[order.order_id]
            out.status = "served"
            out.dropoff_s = now
            self.log_event(now, EventKind.PASSENGER_ALIGHTED, veh.vid,
                           f"order={order.order_id}")
            veh.state = VehicleState.DWELL_AT_DROPOFF
            veh.order = None
            self.events.push(now + self.config.min_dwell_s,
                             EventKind.DWELL_COMPLETE, veh.vid, veh.version)
        elif veh.purpose == "pob":
            self.finish_leg(veh, TripReason.REBALANCING, now, veh.last_shift,
                            None)
            veh.state = VehicleState.IDLE_AT_POB
            if veh.queue:
                self.next_task(veh, now)
        elif veh.purpose == "hotspot":
            self.finish_leg(veh, TripReason.REBALANCING, now, veh.last_shift,
                            None)
            veh.state = VehicleState.WAITING_AT_HOTSPOT
            if veh.queue:
                self.next_task(veh, now)
        else:
            raise AssertionError(f"arrival with no purpose for {veh.vid}")

    def on_dwell_complete(self, veh: _Vehicle, now: float) -> None:
        if veh.state is VehicleState.DWELL_AT_PICKUP:
            board = max(now, float(veh.order.order_time))
            self.events.push(board, EventKind.PASSENGER_BOARDED, veh.vid,
                             veh.version)
        elif veh.state is VehicleState.DWELL_AT_DROPOFF:
            self.next_task(veh, now)

    def on_boarded(self, veh: _Vehicle, now: float) -> None:
        order = veh.order
        out = self.outcomes[order.order_id]
        dest = self.dropoff_node[order.order_id]
        sched = self.plan_from_node(veh.node, dest, now)
        if sched is None:
            self.flag_unroutable(order, now, "ride leg")
            veh.order = None
            self.next_task(veh, now)
            return
        out.pickup_s = now
        veh.state = VehicleState.IN_RIDE
        self.begin_leg(veh, sched, "ride")

    def on_rebalance_decision(self, veh: _Vehicle, now: float) -> None:
        if veh.queue:
            # an assignment slipped in at this very instant; it wins
            self.next_task(veh, now)
            return
        dropoff = self.graph.node_latlon(veh.node)
        action = decide_rebalancing(self.config, veh.state, dropoff, veh.rng)
        self.log_event(now, EventKind.REBALANCE_DECISION, veh.vid,
                       action.kind.value)
        if action.kind is RebalanceKind.STAY:
            veh.state = VehicleState.WAITING_AT_DROPOFF
            return
        if action.kind is RebalanceKind.GO_TO_POB:
            target = self.pob_node
            veh.state = VehicleState.REBALANCING_TO_POB
            purpose = "pob"
        else:
            target = self.hotspot_node[action.hotspot_id]
            veh.state = VehicleState.REBALANCING_TO_HOTSPOT
            purpose = "hotspot"
        sched = self.plan_from_node(veh.node, target, now)
        if sched is None:
            log.warning("vehicle %s: rebalancing target unreachable, staying",
                        veh.vid)
            veh.state = VehicleState.WAITING_AT_DROPOFF
            return
        self.begin_leg(veh, sched, purpose)

    # -- main loop ---------------------------------------------------------

    def run(self) -> SimOutput:
        for order in self.orders:
            self.events.push(float(order.order_time), EventKind.ORDER_ISSUED,
                             f"{order.order_id:08d}", order)
        started = time.monotonic()
        n = 0
        while self.events:
            n += 1
            if n % 1024 == 0 and time.monotonic() - started > self.config.max_wall_s:
                raise SimulationStuck(self.diagnostic(n))
            ev = self.events.pop()
            veh = self.vehicles.get(ev.subject)
            if ev.kind is EventKind.ORDER_ISSUED:
                self.log_event(ev.time, ev.kind, ev.subject, "")
                self.on_order_issued(ev.payload, ev.time)
                continue
            if ev.kind is EventKind.ASSIGNMENT_DELIVERED:
                self.log_event(ev.time, ev.kind, ev.subject,
                               f"order={ev.payload.order_id}")
                self.on_assignment(veh, ev.payload, ev.time)
                continue
            # movement/dwell events are stale once the plan they belong
            # to was replaced (diversion)
            if ev.payload != veh.version:
                continue
            self.log_event(ev.time, ev.kind, ev.subject, veh.state.value)
            if ev.kind is EventKind.VEHICLE_ARRIVED:
                self.on_arrival(veh, ev.time)
            elif ev.kind is EventKind.DWELL_COMPLETE:
                self.on_dwell_complete(veh, ev.time)
            elif ev.kind is EventKind.PASSENGER_BOARDED:
                self.on_boarded(veh, ev.time)
            elif ev.kind is EventKind.REBALANCE_DECISION:
                self.on_rebalance_decision(veh, ev.time)
        return self.collect()

    def diagnostic(self, n_events: int) -> str:
        states: dict[str, int] = {}
        for v in self.vehicles.values():
            states[v.state.value] = states.get(v.state.value, 0) + 1
        pending = sum(1 for o in self.outcomes.values() if o.status == "pending")
        return (
            f"wall-clock budget {self.config.max_wall_s:.0f}s exceeded after "
            f"{n_events} events; {len(self.events)} queued, {pending} orders "
            f"pending, vehicle states {states}"
        )

    def collect(self) -> SimOutput:
        undispatched = [oid for oid, o in self.outcomes.items()
                        if o.status == "pending"]
        if undispatched:
            raise AssertionError(f"orders never resolved: {undispatched[:5]}")
        outcomes = [
            OrderOutcome(oid, o.vehicle_id, o.status, o.pickup_s, o.dropoff_s)
            for oid, o in sorted(self.outcomes.items())
        ]
        trips = sorted(
            self.trips,
            key=lambda t: (t.start_s, t.end_s, t.vehicle_id, t.reason.value),
        )
        by_shift: dict[int, list[TripLog]] = {}
        for t in trips:
            by_shift.setdefault(t.shift_idx, []).append(t)
        shift_vehicle = {
            idx: shift.vehicle_id for idx, shift in enumerate(self.source_shifts)
        }
        shifts = []
        for idx in sorted(by_shift):
            ts = by_shift[idx]
            km = {r: 0.0 for r in TripReason}
            for t in ts:
                km[t.reason] += t.distance_m / 1000.0
            shifts.append(
                ShiftSummary(
                    shift_idx=idx,
                    vehicle_id=shift_vehicle[idx],
                    n_rides=sum(1 for t in ts if t.reason is TripReason.RIDE),
                    start_s=ts[0].start_s,
                    end_s=max(t.end_s for t in ts),
                    pickup_km=km[TripReason.PICKUP],
                    ride_km=km[TripReason.RIDE],
                    rebalancing_km=km[TripReason.REBALANCING],
                )
            )
        meta = {
            "strategy": self.config.strategy.value,
            "seed": self.config.seed,
            "day_label": self.config.day_label,
            "n_orders": len(self.orders),
            "n_vehicles": len(self.vehicles),
            "n_unroutable": sum(1 for o in outcomes if o.status == "unroutable"),
        }
        return SimOutput(trips=trips, outcomes=outcomes, shifts=shifts,
                         meta=meta, event_trace=self.trace)


def run_simulation(
    config: ScenarioConfig,
    logbook,
    graph: RoadGraph,
    dispatcher: Dispatcher = dispatch_order,
    trace: bool = False,
) -> SimOutput:
    """Simulate one day of orders and return the full output bundle.

    ``logbook`` is either a SyntheticLogbook or an iterable of RideOrder.
    Raises SimulationStuck when the run exceeds ``config.max_wall_s`` of
    wall-clock time.
    """
    orders = list(getattr(logbook, "orders", logbook))
    if not orders:
        return SimOutput(trips=[], outcomes=[], shifts=[],
                         meta={"strategy": config.strategy.value,
                               "seed": config.seed,
                               "day_label": config.day_label,
                               "n_orders": 0, "n_vehicles": 0,
                               "n_unroutable": 0},
                         event_trace=[] if trace else None)
    return _Sim(config, orders, graph, dispatcher, trace).run()
