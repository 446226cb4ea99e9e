"""Report records and their CSV / JSON serialization.

CSV reports start with one ``#`` comment line carrying a timestamp, then a
header row.  JSON reports put the timestamp in a ``generated`` field on its
own line.  Everything else is a deterministic function of the records, so two
runs with the same inputs differ only in that line.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from typing import Any, Iterable, Optional

from flint import arb

from .asymptotics import AsymReport

DIGITS = 25
CSV_COLUMNS = ("check", "params", "observed", "predicted", "ratio", "error_power", "status", "note")


@dataclass
class Record:
    """One checked quantity.  ``passed`` is None for informational rows."""

    check: str
    params: dict = field(default_factory=dict)
    observed: Any = None
    predicted: Any = None
    ratio: Any = None
    error_power: Optional[int] = None
    passed: Optional[bool] = None
    note: str = ""

    @property
    def status(self) -> str:
        return {True: "pass", False: "FAIL", None: "info"}[self.passed]

    @classmethod
    def from_asym(cls, rep: AsymReport, passed: Optional[bool] = None, note: str = "") -> "Record":
        notes = [note] if note else []
        notes.extend(rep.flags)
        return cls(
            rep.quantity,
            rep.params,
            rep.observed,
            rep.predicted,
            rep.ratio,
            rep.expected_error_power,
            passed,
            "; ".join(notes),
        )


def fmt_value(x: Any) -> str:
    """Decimal rendering: ball midpoints at 25 significant digits."""
    if x is None:
        return ""
    if isinstance(x, arb):
        if not x.is_finite():
            return "nan"
        return x.mid().str(DIGITS, radius=False)
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else str(x.numerator)
    if isinstance(x, float):
        return repr(x)
    return str(x)


def fmt_params(params: dict) -> str:
    return ";".join(f"{k}={_plain(v)}" for k, v in params.items())


def _plain(v: Any) -> Any:
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (arb, Fraction)):
        return fmt_value(v)
    return v


def _stamp(timestamp: Optional[str]) -> str:
    return timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")


def to_csv(records: Iterable[Record], title: str, timestamp: Optional[str] = None) -> str:
    buf = io.StringIO()
    buf.write(f"# {title} generated {_stamp(timestamp)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(
            [
                r.check,
                fmt_params(r.params),
                fmt_value(r.observed),
                fmt_value(r.predicted),
                fmt_value(r.ratio),
                "" if r.error_power is None else r.error_power,
                r.status,
                r.note,
            ]
        )
    return buf.getvalue()


def to_json(records: Iterable[Record], title: str, timestamp: Optional[str] = None) -> str:
    rows = [
        {
            "check": r.check,
            "params": _plain(r.params),
            "observed": fmt_value(r.observed),
            "predicted": fmt_value(r.predicted),
            "ratio": fmt_value(r.ratio),
            "expected_error_power": r.error_power,
            "status": r.status,
            "note": r.note,
        }
        for r in records
    ]
    head = json.dumps({"generated": _stamp(timestamp)})[1:-1]
    body = json.dumps({"title": title, "records": rows}, indent=1)[1:]
    return "{" + head + "," + body + "\n"


def render(records: list, fmt: str, title: str, timestamp: Optional[str] = None) -> str:
    if fmt == "csv":
        return to_csv(records, title, timestamp)
    if fmt == "json":
        return to_json(records, title, timestamp)
    raise ValueError(f"unknown format {fmt!r}")
