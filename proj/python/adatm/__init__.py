"""Python interface to the adatm simulator."""

import json
import os
from dataclasses import dataclass, field

from ._adatm import (
    Error,
    ParseError,
    UsageError,
    ValidationError,
    noisy_or,
)
from . import _adatm

__all__ = [
    "Error",
    "Event",
    "ParseError",
    "SimulationResult",
    "UsageError",
    "ValidationError",
    "diff",
    "load_scenario",
    "noisy_or",
    "oracle",
    "render",
    "simulate",
]


@dataclass(frozen=True)
class Event:
    seq: int
    type: str
    datum_id: str
    detail: str

    def line(self) -> str:
        return f"{self.seq}|{self.type}|{self.datum_id}|{self.detail}"


@dataclass
class SimulationResult:
    report: dict
    events: list = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.report["complete"]


def _text(scenario) -> str:
    if isinstance(scenario, dict):
        return json.dumps(scenario)
    if isinstance(scenario, os.PathLike) or (isinstance(scenario, str) and not scenario.lstrip().startswith("{")):
        with open(scenario, encoding="utf-8") as f:
            return f.read()
    return scenario


def load_scenario(scenario) -> dict:
    """Validate a scenario (dict, JSON text or path) and return its canonical form."""
    return json.loads(_adatm.normalize_scenario(_text(scenario)))


def simulate(scenario, *, max_steps=1_000_000, full=False, storm_threshold=0.75) -> SimulationResult:
    report, events = _adatm.simulate(_text(scenario), max_steps, full, storm_threshold)
    return SimulationResult(json.loads(report), [Event(*e) for e in events])


def oracle(scenario, *, full=False, storm_threshold=0.75) -> dict:
    return json.loads(_adatm.oracle(_text(scenario), full, storm_threshold))


def _report_text(report) -> str:
    return json.dumps(report) if isinstance(report, dict) else report


def render(report, fmt="csv") -> str:
    """Render a report dict (or JSON/CSV text) as csv, json or text."""
    return _adatm.render(_report_text(report), fmt)


def diff(a, b) -> list:
    return _adatm.diff(_report_text(a), _report_text(b))
