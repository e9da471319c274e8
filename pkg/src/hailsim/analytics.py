"""KPI tables, validation metrics, and annual extrapolation.

Three consumers of simulation output live here: the per-day KPI table
with cross-strategy deltas, the validation report comparing simulated
ride and pickup times against a reference logbook, and the year-scale
mileage/emission extrapolation from daily fleet activity.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

from .emissions import EmissionFactorTable, aggregate_emissions, default_factor_table
from .logbook import RideOrder
from .sim.output import SimOutput, TripReason

VALIDATION_THRESHOLD_S = 200.0
YEAR_DAYS = 365


# ---------------------------------------------------------------------------
# KPI table


@dataclass(frozen=True)
class TaggedRun:
    """One simulation output labeled with its experiment coordinates."""

    day: str
    strategy: str
    seed: int | str
    output: SimOutput


@dataclass
class KpiCell:
    """Averaged KPIs for one (day, strategy) cell."""

    day: str
    strategy: str
    n_runs: int
    n_shifts: float
    total_km: float
    pickup_km: float
    ride_km: float
    rebalancing_km: float
    km_per_shift: float
    shift_duration_s: float
    emissions_g: dict[str, float]
    co2_g_per_km: float

    def metric(self, name: str) -> float:
        if name in self.emissions_g:
            return self.emissions_g[name]
        return getattr(self, name)


@dataclass
class KpiTable:
    cells: list[KpiCell]
    baseline: str

    DELTA_METRICS = (
        "total_km", "rebalancing_km", "pickup_km", "ride_km",
        "CO2", "CO", "NOx", "PMx", "km_per_shift", "shift_duration_s",
    )

    def cell(self, day: str, strategy: str) -> KpiCell:
        for c in self.cells:
            if c.day == day and c.strategy == strategy:
                return c
        raise KeyError((day, strategy))

    def delta(self, day: str, strategy: str, metric: str) -> float:
        """Relative change vs the baseline strategy: (x - base) / base."""
        base = self.cell(day, self.baseline).metric(metric)
        val = self.cell(day, strategy).metric(metric)
        if base == 0.0:
            return 0.0 if val == 0.0 else math.inf
        return (val - base) / base

    def days(self) -> list[str]:
        seen: list[str] = []
        for c in self.cells:
            if c.day not in seen:
                seen.append(c.day)
        return seen

    def strategies(self, day: str) -> list[str]:
        out = [self.baseline]
        for c in self.cells:
            if c.day == day and c.strategy not in out:
                out.append(c.strategy)
        return out

    def write_csv(self, path: str | Path) -> None:
        cols = [
            "day", "strategy", "n_runs", "n_shifts", "total_km", "pickup_km",
            "ride_km", "rebalancing_km", "km_per_shift", "shift_duration_h",
            "co2_kg", "co2_g_per_km", "co_g", "nox_g", "pmx_g",
            "delta_total_pct", "delta_pickup_pct", "delta_ride_pct",
            "delta_rebalancing_pct", "delta_co2_pct",
        ]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for c in self.cells:
                w.writerow(
                    [
                        c.day,
                        c.strategy,
                        c.n_runs,
                        f"{c.n_shifts:.3f}",
                        f"{c.total_km:.3f}",
                        f"{c.pickup_km:.3f}",
                        f"{c.ride_km:.3f}",
                        f"{c.rebalancing_km:.3f}",
                        f"{c.km_per_shift:.3f}",
                        f"{c.shift_duration_s / 3600.0:.4f}",
                        f"{c.emissions_g['CO2'] / 1000.0:.3f}",
                        f"{c.co2_g_per_km:.4f}",
                        f"{c.emissions_g['CO']:.3f}",
                        f"{c.emissions_g['NOx']:.4f}",
                        f"{c.emissions_g['PMx']:.4f}",
                        f"{100.0 * self.delta(c.day, c.strategy, 'total_km'):.3f}",
                        f"{100.0 * self.delta(c.day, c.strategy, 'pickup_km'):.3f}",
                        f"{100.0 * self.delta(c.day, c.strategy, 'ride_km'):.3f}",
                        f"{100.0 * self.delta(c.day, c.strategy, 'rebalancing_km'):.3f}",
                        f"{100.0 * self.delta(c.day, c.strategy, 'CO2'):.3f}",
                    ]
                )

    def format_text(self) -> str:
        """Aligned text table: metrics as rows, (day, strategy) as columns,
        non-baseline values annotated with the integer-percent delta."""
        headers = ["metric"]
        columns: list[tuple[str, str]] = []
        for day in self.days():
            for strat in self.strategies(day):
                columns.append((day, strat))
                headers.append(f"{day}/{strat}")

        rows = [
            ("total mileage [km]", "total_km", 0),
            ("mileage rebalancing [km]", "rebalancing_km", 0),
            ("mileage pickup [km]", "pickup_km", 0),
            ("mileage ride [km]", "ride_km", 0),
            ("total CO2 [kg]", "CO2_kg", 0),
            ("CO2 [g/km]", "co2_g_per_km", 2),
            ("total CO [g]", "CO", 0),
            ("total NOx [g]", "NOx", 2),
            ("total PMx [g]", "PMx", 2),
            ("mileage per shift [km]", "km_per_shift", 0),
            ("shift duration [h]", "shift_duration_h", 2),
            ("shifts", "n_shifts", 1),
        ]
        grid = [headers]
        for label, metric, digits in rows:
            line = [label]
            for day, strat in columns:
                cell = self.cell(day, strat)
                if metric == "CO2_kg":
                    val = cell.emissions_g["CO2"] / 1000.0
                    dmetric = "CO2"
                elif metric == "shift_duration_h":
                    val = cell.shift_duration_s / 3600.0
                    dmetric = "shift_duration_s"
                else:
                    val = cell.metric(metric)
                    dmetric = metric
                text = f"{val:.{digits}f}"
                if strat != self.baseline and metric != "n_shifts":
                    pct = 100.0 * self.delta(day, strat, dmetric)
                    text += f" ({pct:+.0f}%)"
                line.append(text)
            grid.append(line)
        widths = [max(len(r[i]) for r in grid) for i in range(len(headers))]
        out = []
        for r in grid:
            out.append("  ".join(c.rjust(w) for c, w in zip(r, widths)))
        return "\n".join(out)


def _run_kpis(run: TaggedRun, table: EmissionFactorTable) -> dict:
    out = run.output
    by_reason = out.mileage_by_reason_m()
    totals = aggregate_emissions(out.trips, table)
    n_shifts = len(out.shifts)
    pickup_km = by_reason[TripReason.PICKUP] / 1000.0
    ride_km = by_reason[TripReason.RIDE] / 1000.0
    rebalancing_km = by_reason[TripReason.REBALANCING] / 1000.0
    # derived, not independently summed, so the identity is exact
    total_km = pickup_km + ride_km + rebalancing_km
    return {
        "n_shifts": float(n_shifts),
        "total_km": total_km,
        "pickup_km": pickup_km,
        "ride_km": ride_km,
        "rebalancing_km": rebalancing_km,
        "km_per_shift": total_km / n_shifts if n_shifts else 0.0,
        "shift_duration_s": (
            sum(s.duration_s for s in out.shifts) / n_shifts if n_shifts else 0.0
        ),
        "emissions_g": dict(totals.grams),
        "co2_g_per_km": totals.mean_g_per_km("CO2"),
    }


def build_kpi_table(
    runs: list[TaggedRun],
    baseline: str = "return",
    factor_table: EmissionFactorTable | None = None,
) -> KpiTable:
    """Average run KPIs per (day, strategy) cell and attach baseline deltas.

    Every day present must include a baseline-strategy cell.
    """
    if not runs:
        raise ValueError("no runs to tabulate")
    table = factor_table if factor_table is not None else default_factor_table()
    groups: dict[tuple[str, str], list[TaggedRun]] = {}
    day_order: list[str] = []
    for r in runs:
        groups.setdefault((r.day, r.strategy), []).append(r)
        if r.day not in day_order:
            day_order.append(r.day)
    for day in day_order:
        if (day, baseline) not in groups:
            raise ValueError(f"day {day!r} has no {baseline!r} baseline cell")

    cells = []
    for (day, strategy) in sorted(groups, key=lambda k: (day_order.index(k[0]), k[1])):
        members = sorted(groups[(day, strategy)], key=lambda r: str(r.seed))
        kpis = [_run_kpis(r, table) for r in members]
        n = len(kpis)

        def mean(key: str) -> float:
            return sum(k[key] for k in kpis) / n

        pollutants = kpis[0]["emissions_g"].keys()
        pickup_km = mean("pickup_km")
        ride_km = mean("ride_km")
        rebalancing_km = mean("rebalancing_km")
        cells.append(
            KpiCell(
                day=day,
                strategy=strategy,
                n_runs=n,
                n_shifts=mean("n_shifts"),
                total_km=pickup_km + ride_km + rebalancing_km,
                pickup_km=pickup_km,
                ride_km=ride_km,
                rebalancing_km=rebalancing_km,
                km_per_shift=mean("km_per_shift"),
                shift_duration_s=mean("shift_duration_s"),
                emissions_g={
                    p: sum(k["emissions_g"][p] for k in kpis) / n for p in pollutants
                },
                co2_g_per_km=mean("co2_g_per_km"),
            )
        )
    return KpiTable(cells=cells, baseline=baseline)


# ---------------------------------------------------------------------------
# Validation against the reference logbook


@dataclass
class ValidationReport:
    """Differences between simulated and reference times, in seconds.

    ``ride_diffs[i]`` pairs with ``pickup_diffs[i]`` and ``order_ids[i]``;
    shares use a strict |diff| < threshold test.
    """

    order_ids: list[int]
    ride_diffs: list[float]
    pickup_diffs: list[float]
    unmatched: list[int]
    threshold_s: float = VALIDATION_THRESHOLD_S

    @property
    def median_ride_diff_s(self) -> float:
        return statistics.median(self.ride_diffs) if self.ride_diffs else 0.0

    @property
    def median_pickup_diff_s(self) -> float:
        return statistics.median(self.pickup_diffs) if self.pickup_diffs else 0.0

    def share_within(self, diffs: list[float], threshold_s: float) -> float:
        if not diffs:
            return 0.0
        return sum(1 for d in diffs if abs(d) < threshold_s) / len(diffs)

    @property
    def ride_share_within(self) -> float:
        return self.share_within(self.ride_diffs, self.threshold_s)

    @property
    def pickup_share_within(self) -> float:
        return self.share_within(self.pickup_diffs, self.threshold_s)

    def write_summary_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "value"])
            w.writerow(["matched_orders", len(self.ride_diffs)])
            w.writerow(["unmatched_orders", len(self.unmatched)])
            w.writerow(["median_ride_diff_s", f"{self.median_ride_diff_s:.3f}"])
            w.writerow(["median_pickup_diff_s", f"{self.median_pickup_diff_s:.3f}"])
            w.writerow(["threshold_s", f"{self.threshold_s:.0f}"])
            w.writerow(["ride_share_within", f"{self.ride_share_within:.6f}"])
            w.writerow(["pickup_share_within", f"{self.pickup_share_within:.6f}"])

    def write_histogram_csv(self, path: str | Path, bin_s: float = 50.0) -> None:
        """Histogram of both diff distributions on fixed-width bins."""
        all_diffs = self.ride_diffs + self.pickup_diffs
        if all_diffs:
            lo = math.floor(min(all_diffs) / bin_s) * bin_s
            hi = math.ceil(max(all_diffs) / bin_s) * bin_s
            if hi == lo:
                hi = lo + bin_s
        else:
            lo, hi = -bin_s, bin_s
        edges = []
        e = lo
        while e < hi:
            edges.append(e)
            e += bin_s
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_low_s", "bin_high_s", "ride_count", "pickup_count"])
            for b0 in edges:
                b1 = b0 + bin_s
                nr = sum(1 for d in self.ride_diffs if b0 <= d < b1)
                np_ = sum(1 for d in self.pickup_diffs if b0 <= d < b1)
                w.writerow([f"{b0:.0f}", f"{b1:.0f}", nr, np_])


def validation_metrics(
    output: SimOutput, reference: list[RideOrder]
) -> ValidationReport:
    """Compare simulated ride/pickup times against the reference per order.

    Ride diff = simulated (dropoff − pickup) − reference (dropoff_time −
    pickup_time); pickup diff = simulated pickup − reference pickup_time.
    Orders missing on either side (or unserved) are listed and excluded.
    """
    ref_by_id = {o.order_id: o for o in reference}
    order_ids: list[int] = []
    ride_diffs: list[float] = []
    pickup_diffs: list[float] = []
    unmatched: list[int] = []
    for out in output.outcomes:
        ref = ref_by_id.get(out.order_id)
        if ref is None or out.status != "served":
            unmatched.append(out.order_id)
            continue
        sim_ride = out.dropoff_s - out.pickup_s
        ref_ride = float(ref.dropoff_time - ref.pickup_time)
        order_ids.append(out.order_id)
        ride_diffs.append(sim_ride - ref_ride)
        pickup_diffs.append(out.pickup_s - float(ref.pickup_time))
    matched = set(order_ids) | set(unmatched)
    for oid in sorted(ref_by_id):
        if oid not in matched:
            unmatched.append(oid)
    return ValidationReport(order_ids, ride_diffs, pickup_diffs, unmatched)


# ---------------------------------------------------------------------------
# Annual extrapolation


@dataclass(frozen=True)
class DailyActivity:
    """Observed fleet activity for one calendar day.

    Mileages are km per active vehicle; ``n`` is the deployed fleet size
    that day and ``rho`` the utilization share actually on the road.
    """

    day: date
    s_p: float
    s_r: float
    s_b: float
    n: int
    rho: float


@dataclass
class ExtrapolationInputs:
    days: list[DailyActivity]
    c_y: float = 1.17
    co2_g_per_km: float = 102.35

    def validate(self) -> None:
        for d in self.days:
            if not (0.0 <= d.rho <= 1.0):
                raise ValueError(f"{d.day}: utilization {d.rho} outside [0, 1]")
            if min(d.s_p, d.s_r, d.s_b) < 0:
                raise ValueError(f"{d.day}: negative mileage")
            if d.n < 0:
                raise ValueError(f"{d.day}: negative fleet size")
        if self.c_y <= 0 or self.co2_g_per_km < 0:
            raise ValueError("scale factors must be positive")


#: weekday index -> adjustment class (Mon-Thu follow the simulated
#: Wednesday, Fri-Sun the simulated Saturday)
DAY_CLASS = {0: "wednesday", 1: "wednesday", 2: "wednesday", 3: "wednesday",
             4: "saturday", 5: "saturday", 6: "saturday"}


@dataclass(frozen=True)
class StrategyAdjustments:
    """Relative mileage changes vs the baseline, per day class and reason.

    Example: ``pickup={"wednesday": 0.14, "saturday": 0.11}`` raises
    pickup mileage by 14% on Mon-Thu and 11% on Fri-Sun; ride defaults
    to unchanged.
    """

    pickup: dict[str, float] = field(default_factory=dict)
    rebalancing: dict[str, float] = field(default_factory=dict)
    ride: dict[str, float] = field(default_factory=dict)

    def factors(self, day_class: str) -> tuple[float, float, float]:
        return (
            1.0 + self.pickup.get(day_class, 0.0),
            1.0 + self.ride.get(day_class, 0.0),
            1.0 + self.rebalancing.get(day_class, 0.0),
        )


@dataclass
class StrategyTotals:
    strategy: str
    s_p: float
    s_r: float
    s_b: float

    @property
    def s(self) -> float:
        return self.s_p + self.s_r + self.s_b


@dataclass
class ExtrapolationRow:
    strategy: str
    s_p: float
    s_r: float
    s_b: float
    s: float
    delta_s: float
    s_bar: float
    delta_s_bar: float
    e_kg: float
    delta_e_kg: float

    def rounded(self) -> dict[str, int]:
        return {
            "S_p": round(self.s_p),
            "S_r": round(self.s_r),
            "S_b": round(self.s_b),
            "S": round(self.s),
            "dS": round(self.delta_s),
            "S_bar": round(self.s_bar),
            "dS_bar": round(self.delta_s_bar),
            "E_CO2": round(self.e_kg),
            "dE_CO2": round(self.delta_e_kg),
        }


ROW_LABELS = [
    ("S_p", "km"), ("S_r", "km"), ("S_b", "km"), ("S", "km"), ("dS", "km"),
    ("S_bar", "km"), ("dS_bar", "km"), ("E_CO2", "kg"), ("dE_CO2", "kg"),
]


@dataclass
class ExtrapolationTable:
    rows: list[ExtrapolationRow]
    baseline: str
    co2_g_per_km: float

    def row(self, strategy: str) -> ExtrapolationRow:
        for r in self.rows:
            if r.strategy == strategy:
                return r
        raise KeyError(strategy)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "unit"] + [r.strategy for r in self.rows])
            grids = [r.rounded() for r in self.rows]
            for label, unit in ROW_LABELS:
                w.writerow([label, unit] + [g[label] for g in grids])

    def format_text(self) -> str:
        grids = [r.rounded() for r in self.rows]
        names = [r.strategy for r in self.rows]
        width = max(12, *(len(n) for n in names))
        lines = ["  ".join(["metric".ljust(10), "unit".ljust(4)]
                           + [n.rjust(width) for n in names])]
        for label, unit in ROW_LABELS:
            cells = [f"{g[label]:,}".rjust(width) for g in grids]
            lines.append("  ".join([label.ljust(10), unit.ljust(4)] + cells))
        return "\n".join(lines)


def extrapolate_from_totals(
    totals: list[StrategyTotals],
    baseline: str = "return",
    co2_g_per_km: float = 102.35,
    year_days: int = YEAR_DAYS,
) -> ExtrapolationTable:
    """Derive S, deltas, daily means, and CO2 from annual mileage totals.

    Deltas are baseline minus strategy (positive = saving); every derived
    value is computed from unrounded sums and rounded only for display.
    """
    base = None
    for t in totals:
        if t.strategy == baseline:
            base = t
    if base is None:
        raise ValueError(f"baseline strategy {baseline!r} missing")
    rows = []
    e_base = base.s * co2_g_per_km / 1000.0
    for t in totals:
        e = t.s * co2_g_per_km / 1000.0
        rows.append(
            ExtrapolationRow(
                strategy=t.strategy,
                s_p=t.s_p,
                s_r=t.s_r,
                s_b=t.s_b,
                s=t.s,
                delta_s=base.s - t.s,
                s_bar=t.s / year_days,
                delta_s_bar=(base.s - t.s) / year_days,
                e_kg=e,
                delta_e_kg=e_base - e,
            )
        )
    return ExtrapolationTable(rows, baseline, co2_g_per_km)


def extrapolate_annual(
    inputs: ExtrapolationInputs,
    adjustments: dict[str, StrategyAdjustments],
    baseline: str = "return",
    year_days: int = YEAR_DAYS,
) -> ExtrapolationTable:
    """Annual mileage per strategy: S_i = C_y * sum_d rho_d * n_d * s_i(d).

    ``adjustments`` maps each non-baseline strategy to its relative
    per-reason changes, applied by day class before summation; the
    baseline gets none.
    """
    inputs.validate()
    strategies = [baseline] + sorted(k for k in adjustments if k != baseline)
    totals = []
    for strat in strategies:
        adj = adjustments.get(strat, StrategyAdjustments())
        s_p = s_r = s_b = 0.0
        for d in inputs.days:
            f_p, f_r, f_b = adj.factors(DAY_CLASS[d.day.weekday()])
            active = d.rho * d.n
            s_p += active * d.s_p * f_p
            s_r += active * d.s_r * f_r
            s_b += active * d.s_b * f_b
        totals.append(
            StrategyTotals(strat, inputs.c_y * s_p, inputs.c_y * s_r,
                           inputs.c_y * s_b)
        )
    return extrapolate_from_totals(totals, baseline, inputs.co2_g_per_km,
                                   year_days)
