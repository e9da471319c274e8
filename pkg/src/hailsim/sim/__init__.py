"""Discrete-event fleet simulation."""

from .config import ScenarioConfig, Strategy, load_scenario
from .engine import (
    RebalanceAction,
    RebalanceKind,
    SimulationStuck,
    VehicleState,
    decide_rebalancing,
    dispatch_order,
    run_simulation,
)
from .output import OrderOutcome, ShiftSummary, SimOutput, TripLog, TripReason

__all__ = [
    "OrderOutcome",
    "RebalanceAction",
    "RebalanceKind",
    "ScenarioConfig",
    "ShiftSummary",
    "SimOutput",
    "SimulationStuck",
    "Strategy",
    "TripLog",
    "TripReason",
    "VehicleState",
    "decide_rebalancing",
    "dispatch_order",
    "load_scenario",
    "run_simulation",
]
