"""Evaluation metrics, scenario comparison table and ledger/figure-data I/O.

Peak demand is reported in kWh summed over the peak-window hours of the
year. With hourly steps each hour's kWh equals its average kW, so the
numbers are the same as a "kW" column summed over those hours.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, TextIO

import numpy as np

from .pricing import TimeOfUseTariff, is_peak
from .simulator import LEDGER_FIELDS, Scenario, ScenarioResult

LEDGER_COLUMNS = ("hour", "farm_id", "load_kwh", "gen_kwh", "buy_kwh", "sell_kwh", "charge_kwh",
                  "discharge_kwh", "forced_kwh", "curtailed_kwh", "cash_eur", "soc_kwh", "isp", "ibp",
                  "scenario")
_COLUMN_FIELD = dict(zip(LEDGER_COLUMNS[2:12], LEDGER_FIELDS))

FIGURE_IDS = ("daily_cost", "daily_revenue", "daily_peak_import")
FIGURE_START = dt.date(2023, 1, 1)  # any non-leap year; only used to label days


class ZeroBaseline(ValueError):
    pass


@dataclass
class MetricsSummary:
    total_purchase_cost: float
    total_sales_revenue: float
    peak_window_grid_import: float
    scenario: Optional[str] = None
    per_farm_cost: dict[int, float] = field(default_factory=dict)
    per_farm_revenue: dict[int, float] = field(default_factory=dict)
    per_farm_peak_import: dict[int, float] = field(default_factory=dict)
    daily_cost: list[float] = field(default_factory=list)
    daily_revenue: list[float] = field(default_factory=list)
    daily_peak_import: list[float] = field(default_factory=list)

    def to_dict(self, daily: bool = False) -> dict:
        out = asdict(self)
        for key in ("per_farm_cost", "per_farm_revenue", "per_farm_peak_import"):
            out[key] = {str(k): v for k, v in out[key].items()}
        if not daily:
            for key in ("daily_cost", "daily_revenue", "daily_peak_import"):
                out.pop(key)
        return out


@dataclass(frozen=True)
class ComparisonRow:
    """One line of the scenario table. Absolute rows carry only ``treatment``."""

    label: str
    baseline: Optional[float]
    treatment: float
    percent_delta: Optional[float] = None
    unit: str = ""


def tariff_from_echo(config: dict) -> TimeOfUseTariff:
    t = config.get("tariff") if config else None
    if not t:
        return TimeOfUseTariff()
    return TimeOfUseTariff(t["night_rate"], t["day_rate"], t["peak_rate"],
                           tuple(t["night_window"]), tuple(t["peak_window"]))


def _hourly_grid_import(result: ScenarioResult) -> np.ndarray:
    """Community grid import per hour, rebuilt from the per-farm columns."""
    purchased = result.purchased
    out = np.zeros(result.hours)
    for t in range(result.hours):
        bids = math.fsum(purchased[t])
        if result.scenario.p2p:
            offers = math.fsum(result.e_sell[t])
            out[t] = bids - offers if offers <= bids else 0.0
        else:
            out[t] = bids
    return out


def _daily_fsum(matrix: np.ndarray, n_days: int) -> list[float]:
    days = matrix.reshape(n_days, -1)
    return [math.fsum(row) for row in days]


def summarize(result: ScenarioResult, tariff: TimeOfUseTariff) -> MetricsSummary:
    """Purchase cost, sales revenue and peak-window grid import of one run.

    Annual totals are sums of the daily totals, so the daily figure series
    add back up to them exactly.
    """
    hours = result.hours
    if hours % 24:
        raise ValueError("ledger must cover whole days")
    n_days = hours // 24
    cost = result.purchased * result.ibp[:, None]
    revenue = result.e_sell * result.isp[:, None]
    peak_mask = np.array([is_peak(tariff, t % 24) for t in range(hours)])

    grid = _hourly_grid_import(result)
    peak_grid = np.where(peak_mask, grid, 0.0)
    purchased = result.purchased
    if result.scenario.p2p:
        with np.errstate(invalid="ignore", divide="ignore"):
            share = np.where(purchased.sum(axis=1) > 0, grid / purchased.sum(axis=1), 0.0)
        farm_grid = purchased * share[:, None]
    else:
        farm_grid = purchased
    farm_peak = farm_grid * peak_mask[:, None]

    daily_cost = _daily_fsum(cost, n_days)
    daily_revenue = _daily_fsum(revenue, n_days)
    daily_peak = _daily_fsum(peak_grid, n_days)
    ids = result.farm_ids
    return MetricsSummary(
        total_purchase_cost=math.fsum(daily_cost),
        total_sales_revenue=math.fsum(daily_revenue),
        peak_window_grid_import=math.fsum(daily_peak),
        scenario=result.scenario.value,
        per_farm_cost={fid: math.fsum(cost[:, i]) for i, fid in enumerate(ids)},
        per_farm_revenue={fid: math.fsum(revenue[:, i]) for i, fid in enumerate(ids)},
        per_farm_peak_import={fid: math.fsum(farm_peak[:, i]) for i, fid in enumerate(ids)},
        daily_cost=daily_cost,
        daily_revenue=daily_revenue,
        daily_peak_import=daily_peak,
    )


def percent_reduction(baseline: float, treatment: float) -> float:
    if baseline <= 0:
        raise ZeroBaseline(f"baseline must be positive, got {baseline!r}")
    return (baseline - treatment) / baseline * 100.0


def percent_increase(baseline: float, treatment: float) -> float:
    if baseline <= 0:
        raise ZeroBaseline(f"baseline must be positive, got {baseline!r}")
    return (treatment - baseline) / baseline * 100.0


def _delta(fn, baseline, treatment):
    try:
        return fn(baseline, treatment)
    except ZeroBaseline:
        return None


def build_comparison(base: MetricsSummary, re_only: MetricsSummary, p2p: MetricsSummary) -> list[ComparisonRow]:
    """Twelve-row cost / revenue / peak comparison across the three scenarios.

    The reduction against the no-renewables baseline appears twice: once
    measured at the renewables-only cost and once at the P2P cost.
    """
    c0, c1, c2 = base.total_purchase_cost, re_only.total_purchase_cost, p2p.total_purchase_cost
    r1, r2 = re_only.total_sales_revenue, p2p.total_sales_revenue
    k1, k2 = re_only.peak_window_grid_import, p2p.peak_window_grid_import
    return [
        ComparisonRow("Electricity cost with no RE", None, c0, unit="EUR"),
        ComparisonRow("Electricity cost with RE, no P2P", None, c1, unit="EUR"),
        ComparisonRow("Electricity cost with P2P and RE", None, c2, unit="EUR"),
        ComparisonRow("Cost reduction, RE without P2P vs no RE", c0, c1,
                      _delta(percent_reduction, c0, c1), "%"),
        ComparisonRow("Cost reduction, P2P and RE vs no RE", c0, c2, _delta(percent_reduction, c0, c2), "%"),
        ComparisonRow("Cost reduction, P2P and RE vs RE only", c1, c2, _delta(percent_reduction, c1, c2), "%"),
        ComparisonRow("Electricity revenue without P2P", None, r1, unit="EUR"),
        ComparisonRow("Electricity revenue with P2P", None, r2, unit="EUR"),
        ComparisonRow("Revenue increase, P2P vs no P2P", r1, r2, _delta(percent_increase, r1, r2), "%"),
        ComparisonRow("Peak-window grid import without P2P", None, k1, unit="kWh"),
        ComparisonRow("Peak-window grid import with P2P", None, k2, unit="kWh"),
        ComparisonRow("Peak import reduction, P2P vs no P2P", k1, k2, _delta(percent_reduction, k1, k2), "%"),
    ]


def format_comparison_text(rows: list[ComparisonRow]) -> str:
    width = max(len(r.label) for r in rows)
    lines = []
    for r in rows:
        if r.unit == "%":
            value = "n/a" if r.percent_delta is None else f"{r.percent_delta:.2f}"
        else:
            value = f"{r.treatment:.2f}"
        lines.append(f"{r.label:<{width}}  {value:>14}  {r.unit}")
    return "\n".join(lines) + "\n"


def emit_summary_json(rows: list[ComparisonRow], sink: TextIO) -> None:
    json.dump([asdict(r) for r in rows], sink, indent=2)
    sink.write("\n")


def emit_ledger_csv(result: ScenarioResult, sink: TextIO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(LEDGER_COLUMNS)
    cols = [getattr(result, name).tolist() for name in LEDGER_FIELDS]
    isp, ibp = result.isp.tolist(), result.ibp.tolist()
    label = result.scenario.value
    for t in range(result.hours):
        for i, fid in enumerate(result.farm_ids):
            writer.writerow([t, fid, *(repr(c[t][i]) for c in cols), repr(isp[t]), repr(ibp[t]), label])


def parse_ledger_csv(stream: TextIO) -> ScenarioResult:
    """Rebuild a :class:`ScenarioResult` from its ledger CSV.

    Community columns that the ledger does not carry (SDR, grid flows) are
    recomputed or left as NaN.
    """
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(header) != LEDGER_COLUMNS:
        raise ValueError(f"unexpected ledger header {header}")
    rows = list(reader)
    if not rows:
        raise ValueError("ledger has no rows")
    farm_ids = []
    for row in rows:
        if int(row[0]) != 0:
            break
        farm_ids.append(int(row[1]))
    n = len(farm_ids)
    if len(rows) % n:
        raise ValueError("ledger rows do not form whole hours")
    hours = len(rows) // n
    scenario = Scenario(rows[0][14])
    cols = {name: np.zeros((hours, n)) for name in LEDGER_FIELDS}
    isp = np.zeros(hours)
    ibp = np.zeros(hours)
    for k, row in enumerate(rows):
        t, i = divmod(k, n)
        if int(row[0]) != t or int(row[1]) != farm_ids[i]:
            raise ValueError(f"ledger row {k + 2} out of order")
        for j, name in enumerate(LEDGER_FIELDS):
            cols[name][t, i] = float(row[2 + j])
        isp[t] = float(row[12])
        ibp[t] = float(row[13])
    result = ScenarioResult(scenario=scenario, farm_ids=tuple(farm_ids), isp=isp, ibp=ibp,
                            sdr=np.full(hours, np.nan), grid_import=np.zeros(hours),
                            grid_export=np.zeros(hours), **cols)
    result.grid_import = _hourly_grid_import(result)
    sells = np.array([math.fsum(r) for r in result.e_sell])
    bought = np.array([math.fsum(r) for r in result.purchased])
    result.grid_export = np.maximum(sells - bought, 0.0) if scenario.p2p else sells
    return result


def figure_series(result: ScenarioResult, figure_id: str, tariff: Optional[TimeOfUseTariff] = None) -> list[float]:
    if figure_id not in FIGURE_IDS:
        raise ValueError(f"unknown figure id {figure_id!r}; expected one of {FIGURE_IDS}")
    summary = summarize(result, tariff or tariff_from_echo(result.config))
    return getattr(summary, figure_id)


def emit_figure_data(result: ScenarioResult, figure_id: str, sink: TextIO,
                     tariff: Optional[TimeOfUseTariff] = None) -> None:
    """Write one daily series as ``date,value`` CSV."""
    series = figure_series(result, figure_id, tariff)
    sink.write("date,value\n")
    for d, value in enumerate(series):
        sink.write(f"{(FIGURE_START + dt.timedelta(days=d)).isoformat()},{value!r}\n")
