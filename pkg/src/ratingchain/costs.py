"""Per-day transaction cost report.

day_cost_wei = sum over functions of count * intrinsic_gas * gas_price;
converted to ether (1e18 wei) and then to a user-supplied currency price
per ether. Prices are inputs, never fetched.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from decimal import Decimal
from typing import Iterable

from .ledger import CallFn, GasSchedule

WEI_PER_ETHER = 10**18

COUNT_FUNCTIONS = (
    CallFn.SET_RATE,
    CallFn.GET_RATE,
    CallFn.GIVE_RIGHT_TO_RATE,
    CallFn.CREATE_PRODUCT,
)


class CostReportError(ValueError):
    pass


@dataclass(frozen=True)
class DayInput:
    label: str
    counts: dict[CallFn, int]
    gas_price: int          # wei per gas unit
    ether_price: Decimal    # currency per ether


@dataclass(frozen=True)
class DayCost:
    label: str
    cost_wei: int
    cost_ether: Decimal
    cost_currency: Decimal


@dataclass(frozen=True)
class CostReport:
    days: tuple[DayCost, ...]

    @property
    def total_wei(self) -> int:
        return sum(d.cost_wei for d in self.days)

    @property
    def total_currency(self) -> Decimal:
        return sum((d.cost_currency for d in self.days), Decimal(0))


def parse_input(obj: dict) -> list[DayInput]:
    days = obj.get("days")
    if not isinstance(days, list) or not days:
        raise CostReportError("input must contain a nonempty 'days' list")
    parsed = []
    for i, d in enumerate(days):
        counts = {}
        for fn in COUNT_FUNCTIONS:
            c = d.get(fn.value, 0)
            if not isinstance(c, int) or c < 0:
                raise CostReportError(f"day {i}: {fn.value} count must be a nonnegative integer")
            counts[fn] = c
        gas_price = d.get("gas_price")
        if not isinstance(gas_price, int) or gas_price < 0:
            raise CostReportError(f"day {i}: gas_price must be a nonnegative integer (wei/gas)")
        try:
            ether_price = Decimal(str(d.get("ether_price", 1)))
        except ArithmeticError as exc:
            raise CostReportError(f"day {i}: bad ether_price") from exc
        if ether_price < 0:
            raise CostReportError(f"day {i}: ether_price must be nonnegative")
        parsed.append(
            DayInput(label=str(d.get("label", f"day {i + 1}")), counts=counts,
                     gas_price=gas_price, ether_price=ether_price)
        )
    return parsed


def load_input(path: str) -> list[DayInput]:
    if path.endswith(".csv"):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        days = []
        for row in rows:
            d: dict = {"label": row.get("label", "")}
            for fn in COUNT_FUNCTIONS:
                d[fn.value] = int(row.get(fn.value, 0) or 0)
            d["gas_price"] = int(row["gas_price"])
            d["ether_price"] = row.get("ether_price", "1")
            days.append(d)
        return parse_input({"days": days})
    with open(path, encoding="utf-8") as fh:
        return parse_input(json.load(fh))


def cost_report(days: Iterable[DayInput], schedule: GasSchedule) -> CostReport:
    out = []
    for day in days:
        wei = sum(
            count * schedule.intrinsic_gas(fn) * day.gas_price
            for fn, count in day.counts.items()
        )
        ether = Decimal(wei) / WEI_PER_ETHER
        out.append(
            DayCost(
                label=day.label,
                cost_wei=wei,
                cost_ether=ether,
                cost_currency=ether * day.ether_price,
            )
        )
    return CostReport(days=tuple(out))


def report_rows(report: CostReport) -> list[dict]:
    rows = [
        {
            "label": d.label,
            "cost_wei": str(d.cost_wei),
            "cost_ether": str(d.cost_ether),
            "cost_currency": str(d.cost_currency),
        }
        for d in report.days
    ]
    rows.append(
        {
            "label": "TOTAL",
            "cost_wei": str(report.total_wei),
            "cost_ether": str(Decimal(report.total_wei) / WEI_PER_ETHER),
            "cost_currency": str(report.total_currency),
        }
    )
    return rows
