"""Discrete-event ride-hailing fleet simulator and analysis toolkit.

Replays or synthesizes ride logbooks on a road network, simulates vehicle
movement under three idle-repositioning strategies (return to base, wait at
dropoff, drive to demand hotspots), and accounts mileage, emissions, and
annual totals.
"""

from pathlib import Path

from .geo import Boundary, haversine_m
from .network import RoadGraph, SpeedProfile, load_network, nearest_node
from .routing import Route, fastest_path

__version__ = "0.1.0"


def data_path(name: str = "") -> Path:
    """Path to a bundled data file (no argument: the data directory)."""
    return Path(__file__).parent / "data" / name


__all__ = [
    "Boundary",
    "RoadGraph",
    "Route",
    "SpeedProfile",
    "__version__",
    "data_path",
    "fastest_path",
    "haversine_m",
    "load_network",
    "nearest_node",
]
