"""Batch experiment runner.

Executes a plan of (day, strategy, seed) runs, each fully independent,
with optional process-level parallelism. Every run writes its own output
directory plus a JSON manifest of resolved parameters; the batch writes
a merged KPI table. Outputs carry no wall-clock data, so rerunning an
identical plan (at any parallelism) reproduces identical bytes.
"""

from __future__ import annotations

import json
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .analytics import KpiTable, TaggedRun, build_kpi_table
from .hotspots import HotspotSet
from .logbook import parse_logbook
from .network import SpeedProfile, load_network
from .sim import ScenarioConfig, SimOutput, Strategy, run_simulation
from .sim.output import read_orders_csv, read_shifts_csv, read_trips_csv

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunSpec:
    day: str
    strategy: str
    seed: int

    @property
    def run_id(self) -> str:
        return f"run_{self.day}_{self.strategy}_{self.seed:04d}"


@dataclass
class ExperimentPlan:
    runs: list[RunSpec]
    parallelism: int = 1

    def validate(self) -> None:
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        triples = [(r.day, r.strategy, r.seed) for r in self.runs]
        if len(set(triples)) != len(triples):
            raise ValueError("duplicate (day, strategy, seed) in plan")
        if not self.runs:
            raise ValueError("plan has no runs")


@dataclass(frozen=True)
class BatchInputs:
    """Shared, immutable inputs every run resolves against (all paths)."""

    network: str
    logbooks: dict[str, str]  # day label -> logbook CSV
    pob: tuple[float, float]
    hotspots: str | None = None
    speed_profile: str | None = None
    min_dwell_s: float = 30.0
    message_latency_s: float = 1.0
    hotspot_wait_probability: float = 0.2
    max_wall_s: float = 300.0
    baseline: str = "return"


@dataclass
class BatchResult:
    out_dir: Path
    completed: list[TaggedRun]
    failures: list[tuple[RunSpec, str]]
    kpi: KpiTable | None

    @property
    def ok(self) -> bool:
        return not self.failures


# per-process cache of parsed immutable inputs, keyed by path
_CACHE: dict[tuple[str, str], object] = {}


def _cached(kind: str, path: str, loader):
    key = (kind, path)
    if key not in _CACHE:
        _CACHE[key] = loader(path)
    return _CACHE[key]


def _build_config(inputs: BatchInputs, spec: RunSpec) -> ScenarioConfig:
    profile = (
        SpeedProfile.from_json(inputs.speed_profile)
        if inputs.speed_profile
        else SpeedProfile.uniform()
    )
    hotspot_set = None
    if inputs.hotspots:
        hotspot_set = _cached("hotspots", inputs.hotspots, HotspotSet.read)
    return ScenarioConfig(
        strategy=Strategy(spec.strategy),
        pob=inputs.pob,
        min_dwell_s=inputs.min_dwell_s,
        message_latency_s=inputs.message_latency_s,
        hotspot_wait_probability=inputs.hotspot_wait_probability,
        seed=spec.seed,
        profile=profile,
        hotspot_set=hotspot_set,
        day_label=spec.day,
        max_wall_s=inputs.max_wall_s,
    )


def run_manifest(inputs: BatchInputs, spec: RunSpec, output: SimOutput) -> dict:
    """Every resolved parameter of one run, in JSON-ready form."""
    return {
        "version": __version__,
        "day": spec.day,
        "strategy": spec.strategy,
        "seed": spec.seed,
        "network": inputs.network,
        "logbook": inputs.logbooks[spec.day],
        "hotspots": inputs.hotspots,
        "speed_profile": inputs.speed_profile,
        "pob": list(inputs.pob),
        "min_dwell_s": inputs.min_dwell_s,
        "message_latency_s": inputs.message_latency_s,
        "hotspot_wait_probability": inputs.hotspot_wait_probability,
        "max_wall_s": inputs.max_wall_s,
        "n_orders": output.meta.get("n_orders"),
        "n_vehicles": output.meta.get("n_vehicles"),
        "n_unroutable": output.meta.get("n_unroutable"),
    }


def _execute_run(
    inputs: BatchInputs, spec: RunSpec, out_root: str
) -> tuple[RunSpec, SimOutput | None, str | None]:
    try:
        graph = _cached("network", inputs.network, load_network)
        orders = _cached("logbook", inputs.logbooks[spec.day], parse_logbook)
        config = _build_config(inputs, spec)
        output = run_simulation(config, orders, graph)
        run_dir = Path(out_root) / spec.run_id
        output.write_dir(run_dir)
        with open(run_dir / "manifest.json", "w") as fh:
            json.dump(run_manifest(inputs, spec, output), fh, indent=2,
                      sort_keys=True)
            fh.write("\n")
        return spec, output, None
    except Exception:
        return spec, None, traceback.format_exc()


def run_batch(
    plan: ExperimentPlan, inputs: BatchInputs, out_dir: str | Path
) -> BatchResult:
    """Execute the plan and merge a KPI table over all completed runs.

    Failed runs are recorded with their traceback and do not stop the
    batch; the merged table covers the completed subset.
    """
    plan.validate()
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)

    if plan.parallelism == 1:
        results = [_execute_run(inputs, spec, str(out_root)) for spec in plan.runs]
    else:
        with ProcessPoolExecutor(max_workers=plan.parallelism) as pool:
            futures = [
                pool.submit(_execute_run, inputs, spec, str(out_root))
                for spec in plan.runs
            ]
            results = [f.result() for f in futures]

    completed: list[TaggedRun] = []
    failures: list[tuple[RunSpec, str]] = []
    for spec, output, error in results:
        if error is None:
            completed.append(TaggedRun(spec.day, spec.strategy, spec.seed, output))
        else:
            log.error("run %s failed:\n%s", spec.run_id, error)
            failures.append((spec, error))
    completed.sort(key=lambda r: (r.day, r.strategy, str(r.seed)))

    kpi = None
    if completed:
        try:
            kpi = build_kpi_table(completed, baseline=inputs.baseline)
            kpi.write_csv(out_root / "kpi.csv")
            with open(out_root / "kpi.txt", "w") as fh:
                fh.write(kpi.format_text() + "\n")
        except ValueError as exc:
            log.error("KPI merge skipped: %s", exc)

    manifest = {
        "version": __version__,
        "inputs": asdict(inputs),
        "parallelism": plan.parallelism,
        "runs": [asdict(s) for s in plan.runs],
        "failed": [s.run_id for s, _ in failures],
    }
    with open(out_root / "batch_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return BatchResult(out_root, completed, failures, kpi)


def load_batch_config(path: str | Path) -> tuple[ExperimentPlan, BatchInputs]:
    """Read a batch config JSON: shared inputs plus the run grid.

    Required keys: network, pob, days (label -> logbook path), strategies,
    seeds. Optional: hotspots, speed_profile, min_dwell_s,
    message_latency_s, hotspot_wait_probability, max_wall_s, parallelism,
    baseline. Relative paths resolve against the config directory.
    """
    path = Path(path)
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(
            f"{path}: parse error at line {exc.lineno}: {exc.msg}"
        ) from exc
    for key in ("network", "pob", "days", "strategies", "seeds"):
        if key not in data:
            raise ValueError(f"{path}: missing required key {key!r}")
    base = path.parent

    def resolve(p) -> str:
        return str((base / str(p)).resolve())

    inputs = BatchInputs(
        network=resolve(data["network"]),
        logbooks={day: resolve(p) for day, p in sorted(data["days"].items())},
        pob=(float(data["pob"][0]), float(data["pob"][1])),
        hotspots=resolve(data["hotspots"]) if data.get("hotspots") else None,
        speed_profile=(
            resolve(data["speed_profile"]) if data.get("speed_profile") else None
        ),
        min_dwell_s=float(data.get("min_dwell_s", 30.0)),
        message_latency_s=float(data.get("message_latency_s", 1.0)),
        hotspot_wait_probability=float(data.get("hotspot_wait_probability", 0.2)),
        max_wall_s=float(data.get("max_wall_s", 300.0)),
        baseline=str(data.get("baseline", "return")),
    )
    runs = [
        RunSpec(day, str(strategy), int(seed))
        for day in sorted(data["days"])
        for strategy in data["strategies"]
        for seed in data["seeds"]
    ]
    plan = ExperimentPlan(runs=runs, parallelism=int(data.get("parallelism", 1)))
    plan.validate()
    return plan, inputs


def read_run_dir(path: str | Path) -> TaggedRun:
    """Load one run directory (manifest plus CSVs) back into a TaggedRun."""
    run = Path(path)
    manifest_path = run / "manifest.json"
    if not manifest_path.exists():
        raise ValueError(f"{run}: not a run directory (no manifest.json)")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    output = SimOutput(
        trips=read_trips_csv(run / "trips.csv"),
        outcomes=read_orders_csv(run / "orders.csv"),
        shifts=read_shifts_csv(run / "shifts.csv"),
        meta=manifest,
    )
    return TaggedRun(
        day=str(manifest.get("day", "")),
        strategy=str(manifest.get("strategy", "")),
        seed=manifest.get("seed", 0),
        output=output,
    )
