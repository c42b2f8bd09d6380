import json
import os
from pathlib import Path

import pytest

import adatm

FIXTURES = Path(os.environ.get("ADATM_FIXTURES", Path(__file__).resolve().parents[1] / "fixtures"))


def outcome(report, flight_id):
    return next(o for o in report["outcomes"] if o["flight"] == flight_id)


def test_spare_capacity_accepts_the_new_flight():
    result = adatm.simulate(FIXTURES / "spare_capacity.json")
    assert result.complete
    assert outcome(result.report, "3412")["outcome"] == "Accepted"
    assert not any(r["occupancy"] > r["capacity"] for r in result.report["records"])


def test_full_sector_rejects_and_oracle_congests():
    result = adatm.simulate(str(FIXTURES / "full_sector.json"))
    assert outcome(result.report, "3412")["outcome"] == "Rejected"
    report = adatm.oracle(FIXTURES / "full_sector.json")
    peak = max(report["records"], key=lambda r: r["occupancy"])
    assert (peak["occupancy"], peak["capacity"]) == (7, 6)


def test_events_and_determinism():
    a = adatm.simulate(FIXTURES / "weather.json")
    b = adatm.simulate(FIXTURES / "weather.json")
    assert [e.line() for e in a.events] == [e.line() for e in b.events]
    assert a.report == b.report
    assert any(e.type == "StormRevealed" for e in a.events)
    assert a.events[0].seq == 1


def test_scenario_dict_round_trip():
    scenario = adatm.load_scenario(FIXTURES / "spare_capacity.json")
    assert adatm.load_scenario(scenario) == scenario
    assert adatm.load_scenario(json.dumps(scenario)) == scenario


def test_render_and_diff():
    report = adatm.simulate(FIXTURES / "spare_capacity.json").report
    csv = adatm.render(report, "csv")
    assert csv.splitlines()[0] == "subsector_col,subsector_row,bucket_start,occupancy,capacity,congested,flight_ids"
    assert adatm.diff(report, csv) == []
    assert adatm.diff(report, adatm.oracle(FIXTURES / "spare_capacity.json")) == []
    entries = adatm.diff(adatm.simulate(FIXTURES / "full_sector.json").report, adatm.oracle(FIXTURES / "full_sector.json"))
    assert entries and {e[0] for e in entries} <= {"only-in-a", "only-in-b", "mismatch"}


def test_errors():
    with pytest.raises(adatm.ValidationError):
        adatm.simulate(FIXTURES / "invalid_times.json")
    with pytest.raises(adatm.ParseError):
        adatm.load_scenario('{"grid": 1}')
    with pytest.raises(adatm.UsageError):
        adatm.render({"records": []}, "xml")
    assert issubclass(adatm.ValidationError, adatm.Error)


def test_noisy_or():
    assert adatm.noisy_or(0.6, 0.5) == pytest.approx(0.8, abs=1e-15)
