"""Scenario configuration: strategy, sim parameters, and file references."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..hotspots import HotspotSet
from ..logbook import RideOrder, parse_logbook
from ..network import RoadGraph, SpeedProfile, load_network


class Strategy(enum.Enum):
    RETURN = "return"
    WAIT = "wait"
    HOTSPOT = "hotspot"


class ConfigError(ValueError):
    """Raised for invalid or incomplete scenario configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Parameters of one simulation run.

    ``hotspot_set`` is required for the Hotspot strategy and ignored
    otherwise. ``seed`` feeds named per-vehicle RNG streams; two runs with
    equal config produce byte-identical outputs.
    """

    strategy: Strategy
    pob: tuple[float, float]
    min_dwell_s: float = 30.0
    message_latency_s: float = 1.0
    hotspot_wait_probability: float = 0.2
    seed: int | str = 0
    profile: SpeedProfile = field(default_factory=SpeedProfile.uniform)
    hotspot_set: HotspotSet | None = None
    day_label: str = ""
    max_wall_s: float = 300.0

    def validate(self) -> None:
        if self.min_dwell_s < 0:
            raise ConfigError("min_dwell_s must be >= 0")
        if self.message_latency_s < 0:
            raise ConfigError("message_latency_s must be >= 0")
        if not 0.0 <= self.hotspot_wait_probability <= 1.0:
            raise ConfigError("hotspot_wait_probability must be in [0, 1]")
        if self.strategy == Strategy.HOTSPOT and (
            self.hotspot_set is None or len(self.hotspot_set) == 0
        ):
            raise ConfigError("Hotspot strategy needs a non-empty hotspot set")

    def with_seed(self, seed: int | str) -> "ScenarioConfig":
        return replace(self, seed=seed)

    def with_strategy(self, strategy: Strategy) -> "ScenarioConfig":
        return replace(self, strategy=strategy)


@dataclass
class Scenario:
    """A fully resolved scenario: config plus loaded inputs."""

    config: ScenarioConfig
    graph: RoadGraph
    orders: list[RideOrder]
    source: dict
    base_dir: Path


def load_scenario(path: str | Path) -> Scenario:
    """Read a scenario JSON file and load everything it references.

    Required keys: strategy, pob (lat, lon), network, logbook. Optional:
    min_dwell_s, message_latency_s, hotspot_wait_probability, seed,
    speed_profile (path), hotspots (path; required for strategy
    "hotspot"), day_label, max_wall_s. Relative paths resolve against the
    config file's directory.
    """
    path = Path(path)
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno}: {exc.msg}") from exc
    base = path.parent

    def resolve(key: str) -> Path | None:
        if key not in data or data[key] is None:
            return None
        return (base / str(data[key])).resolve()

    for key in ("strategy", "pob", "network", "logbook"):
        if key not in data:
            raise ConfigError(f"{path}: missing required key {key!r}")
    try:
        strategy = Strategy(str(data["strategy"]).lower())
    except ValueError:
        raise ConfigError(f"{path}: unknown strategy {data['strategy']!r}") from None

    profile_path = resolve("speed_profile")
    hotspot_path = resolve("hotspots")
    config = ScenarioConfig(
        strategy=strategy,
        pob=(float(data["pob"][0]), float(data["pob"][1])),
        min_dwell_s=float(data.get("min_dwell_s", 30.0)),
        message_latency_s=float(data.get("message_latency_s", 1.0)),
        hotspot_wait_probability=float(data.get("hotspot_wait_probability", 0.2)),
        seed=data.get("seed", 0),
        profile=SpeedProfile.from_json(profile_path) if profile_path else SpeedProfile.uniform(),
        hotspot_set=HotspotSet.read(hotspot_path) if hotspot_path else None,
        day_label=str(data.get("day_label", "")),
        max_wall_s=float(data.get("max_wall_s", 300.0)),
    )
    config.validate()
    graph = load_network(resolve("network"))
    orders = parse_logbook(resolve("logbook"))
    return Scenario(config=config, graph=graph, orders=orders, source=data, base_dir=base)
