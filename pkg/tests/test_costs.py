import json
import random
from decimal import Decimal

import pytest

from ratingchain.costs import (
    CostReportError,
    cost_report,
    load_input,
    parse_input,
    report_rows,
)
from ratingchain.ledger import GasSchedule

SCHEDULE = GasSchedule()


def make_day(**kw):
    d = {"label": "d", "SetRate": 0, "GetRate": 0, "GiveRightToRate": 0,
         "CreateProduct": 0, "gas_price": 2000000000, "ether_price": 100}
    d.update(kw)
    return d


class TestParseInput:
    def test_minimal_day(self):
        days = parse_input({"days": [make_day(SetRate=3)]})
        assert len(days) == 1
        assert days[0].gas_price == 2000000000
        assert days[0].ether_price == Decimal(100)

    def test_missing_days_rejected(self):
        with pytest.raises(CostReportError):
            parse_input({})
        with pytest.raises(CostReportError):
            parse_input({"days": []})

    def test_negative_count_rejected(self):
        with pytest.raises(CostReportError):
            parse_input({"days": [make_day(SetRate=-1)]})

    def test_missing_gas_price_rejected(self):
        d = make_day()
        del d["gas_price"]
        with pytest.raises(CostReportError):
            parse_input({"days": [d]})

    def test_labels_default_to_ordinal(self):
        d = make_day()
        del d["label"]
        days = parse_input({"days": [d, d]})
        assert [x.label for x in days] == ["day 1", "day 2"]


class TestCostReport:
    def test_single_rating_day(self):
        # one granted rating: grant + rating at 2 gwei is 0.000198512 ether
        days = parse_input({"days": [make_day(SetRate=1, GiveRightToRate=1)]})
        report = cost_report(days, SCHEDULE)
        wei = (51456 + 47800) * 2000000000
        assert report.days[0].cost_wei == wei
        assert report.days[0].cost_ether == Decimal(wei) / 10**18
        assert report.days[0].cost_currency == Decimal(wei) / 10**18 * 100

    def test_totals_sum_days(self):
        days = parse_input({"days": [make_day(SetRate=2), make_day(GetRate=5)]})
        report = cost_report(days, SCHEDULE)
        assert report.total_wei == report.days[0].cost_wei + report.days[1].cost_wei
        assert report.total_currency == sum(d.cost_currency for d in report.days)

    def test_against_brute_force_oracle(self):
        # 100 random inputs checked against an independently written total
        rng = random.Random(99)
        gas = {"SetRate": 51456, "GetRate": 42689,
               "GiveRightToRate": 47800, "CreateProduct": 53000}
        for _ in range(100):
            raw_days = []
            for _ in range(rng.randint(1, 6)):
                raw_days.append(make_day(
                    SetRate=rng.randint(0, 500),
                    GetRate=rng.randint(0, 500),
                    GiveRightToRate=rng.randint(0, 50),
                    CreateProduct=rng.randint(0, 10),
                    gas_price=rng.choice([1, 1000, 2000000000]),
                    ether_price=rng.randint(0, 5000),
                ))
            report = cost_report(parse_input({"days": raw_days}), SCHEDULE)
            expected_total = 0
            for i, d in enumerate(raw_days):
                day_wei = sum(d[fn] * gas[fn] for fn in gas) * d["gas_price"]
                assert report.days[i].cost_wei == day_wei
                expected_total += day_wei
            assert report.total_wei == expected_total

    def test_report_rows_has_total_line(self):
        report = cost_report(parse_input({"days": [make_day(SetRate=1)]}), SCHEDULE)
        rows = report_rows(report)
        assert rows[-1]["label"] == "TOTAL"
        assert rows[-1]["cost_wei"] == str(report.total_wei)


class TestLoadInput:
    def test_json_file(self, tmp_path):
        p = tmp_path / "days.json"
        p.write_text(json.dumps({"days": [make_day(SetRate=4)]}))
        days = load_input(str(p))
        assert sum(days[0].counts.values()) == 4

    def test_csv_file(self, tmp_path):
        p = tmp_path / "days.csv"
        p.write_text(
            "label,SetRate,GetRate,GiveRightToRate,CreateProduct,gas_price,ether_price\n"
            "mon,3,1,0,0,2000000000,250\n"
            "tue,5,0,2,1,2000000000,260\n"
        )
        days = load_input(str(p))
        assert [d.label for d in days] == ["mon", "tue"]
        report = cost_report(days, SCHEDULE)
        assert report.days[0].cost_wei == (3 * 51456 + 42689) * 2000000000

    def test_csv_and_json_agree(self, tmp_path):
        day = make_day(SetRate=7, GiveRightToRate=2, label="x")
        jp = tmp_path / "d.json"
        jp.write_text(json.dumps({"days": [day]}))
        cp = tmp_path / "d.csv"
        cp.write_text(
            "label,SetRate,GetRate,GiveRightToRate,CreateProduct,gas_price,ether_price\n"
            "x,7,0,2,0,2000000000,100\n"
        )
        assert cost_report(load_input(str(jp)), SCHEDULE) == cost_report(load_input(str(cp)), SCHEDULE)
