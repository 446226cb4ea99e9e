"""Command-line front end.

Subcommands::

    xijensen gamma-table --m-max N          build or extend the gamma cache
    xijensen verify SUITE [options]         run one verification suite
    xijensen threshold-scan [options]       per-d Turan thresholds

Ranges are inclusive: ``a:b``, ``a:b:step`` or a comma list ``x,y,z``.
Settings resolve as built-in defaults, then ``--config`` (a JSON object
keyed by option name, e.g. ``{"bits": 512, "d_range": "3:8"}``), then
flags given on the command line.  ``XIJENSEN_CACHE`` sets the default cache
path.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or config error,
3 precision exhausted.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields
from typing import Optional, Sequence

from . import suites
from .errors import PrecisionExhausted
from .precision import MIN_BITS, PrecCtx
from .reports import Record, render
from .xi_taylor import GammaTable

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_PRECISION = 0, 1, 2, 3
SUITES = ("lemma23", "lemma41", "thm21", "thm22", "turan", "hyperbolic")
DEFAULT_CACHE = "gamma_cache.txt"

# per-suite defaults for the range options
SUITE_DEFAULTS = {
    "lemma23": {"d_range": "1:20", "n_range": "0:50"},
    "lemma41": {},
    "thm21": {"M_range": "500,1000,2000", "fit_order": 12},
    "thm22": {"d_range": "3,4", "n_range": "100,400", "fit_order": 8},
    "turan": {"d_range": "3:10", "n_range": "0:100"},
    "hyperbolic": {"d_range": "1:15", "n_range": "0:100"},
    "threshold-scan": {"d_range": "3:10", "n_max": 500},
}


class UsageError(Exception):
    pass


def parse_range(text: str) -> list[int]:
    """Parse ``a:b``, ``a:b:s`` (inclusive) or ``x,y,z`` into a nonempty list."""
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) == 2:
                lo, hi, step = parts[0], parts[1], 1
            elif len(parts) == 3:
                lo, hi, step = parts
            else:
                raise ValueError
            if step <= 0:
                raise UsageError(f"range {text!r}: step must be positive")
            out = list(range(lo, hi + 1, step))
        else:
            out = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"malformed range {text!r}") from None
    if not out:
        raise UsageError(f"range {text!r} is empty")
    return out


@dataclass
class RunConfig:
    command: str
    suite: Optional[str] = None
    cache: str = DEFAULT_CACHE
    bits: int = 256
    max_bits: int = 8192
    d_range: Optional[str] = None
    n_range: Optional[str] = None
    M_range: Optional[str] = None
    m_max: Optional[int] = None
    n_max: Optional[int] = None
    fit_order: Optional[int] = None
    format: str = "csv"
    out: Optional[str] = None
    workers: int = 1

    def validate(self) -> None:
        if self.bits < MIN_BITS:
            raise UsageError(f"--bits must be >= {MIN_BITS}")
        if self.max_bits < self.bits:
            raise UsageError("--max-bits must be >= --bits")
        if self.format not in ("csv", "json"):
            raise UsageError(f"unknown format {self.format!r}")
        if self.workers < 1:
            raise UsageError("--workers must be >= 1")
        for name in ("d_range", "n_range", "M_range"):
            if getattr(self, name) is not None:
                parse_range(getattr(self, name))
        if self.command == "gamma-table" and (self.m_max is None or self.m_max < 0):
            raise UsageError("gamma-table needs --m-max >= 0")
        if self.n_max is not None and self.n_max < 0:
            raise UsageError("--n-max must be >= 0")
        if self.fit_order is not None and self.fit_order < 2:
            raise UsageError("--fit-order must be >= 2")

    def ctx(self) -> PrecCtx:
        return PrecCtx(self.bits, self.max_bits)

    def ranges(self, *names: str) -> list:
        return [parse_range(getattr(self, n)) for n in names]


def _parser() -> argparse.ArgumentParser:
    # Every option defaults to None so that explicitly given flags can be
    # told apart from defaults when merging with a config file.
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--cache", help="gamma cache file (default $XIJENSEN_CACHE or ./gamma_cache.txt)")
    g.add_argument("--bits", type=int, help="working precision in bits (default 256)")
    g.add_argument("--max-bits", dest="max_bits", type=int, help="escalation ceiling (default 8192)")
    g.add_argument("--d-range", dest="d_range", help="degrees, e.g. 1:15 or 3,4")
    g.add_argument("--n-range", dest="n_range", help="shifts, e.g. 0:100:5")
    g.add_argument("--m-max", dest="m_max", type=int, help="largest M for gamma-table")
    g.add_argument("--format", choices=("csv", "json"), help="report format (default csv)")
    g.add_argument("--out", help="report path (default stdout)")
    g.add_argument("--workers", type=int, help="worker processes (default 1)")
    g.add_argument("--config", help="JSON file of option overrides")
    g.add_argument("-v", "--verbose", action="store_true", default=None)

    p = argparse.ArgumentParser(prog="xijensen", description="Certified checks on Jensen polynomials of xi.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("gamma-table", parents=[common], help="build or extend the gamma cache")
    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--M-range", dest="M_range", help="M values for thm21 (default 500,1000,2000)")
    v.add_argument("--fit-order", dest="fit_order", type=int, help="number of fitted G_m (thm21, thm22)")
    t = sub.add_parser("threshold-scan", parents=[common], help="empirical Turan thresholds per degree")
    t.add_argument("--n-max", dest="n_max", type=int, help="largest n scanned (default 500)")
    return p


def build_config(argv: Optional[Sequence[str]] = None) -> tuple[RunConfig, bool]:
    """Parse arguments into a validated :class:`RunConfig` and a verbosity flag."""
    ns = vars(_parser().parse_args(argv))
    command, suite = ns.pop("command"), ns.pop("suite", None)
    config_path, verbose = ns.pop("config"), bool(ns.pop("verbose"))

    known = {f.name for f in fields(RunConfig)} - {"command", "suite"}
    merged: dict = dict(SUITE_DEFAULTS[suite or command] if (suite or command) in SUITE_DEFAULTS else {})
    merged["cache"] = os.environ.get("XIJENSEN_CACHE") or DEFAULT_CACHE
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {config_path}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        loaded = {k.replace("-", "_"): v for k, v in loaded.items()}
        unknown = set(loaded) - known
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged.update(loaded)
    merged.update({k: v for k, v in ns.items() if v is not None})
    cfg = RunConfig(command=command, suite=suite, **merged)
    cfg.validate()
    return cfg, verbose


# -- commands ---------------------------------------------------------------------------------


def _load_table(cfg: RunConfig) -> GammaTable:
    if os.path.exists(cfg.cache):
        try:
            return GammaTable.load(cfg.cache)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return GammaTable()


def _save_if_grown(table: GammaTable, cfg: RunConfig, before: list) -> None:
    if table.snapshot() != before:
        table.save(cfg.cache)


def cmd_gamma_table(cfg: RunConfig) -> int:
    table = _load_table(cfg)
    before = table.snapshot()
    table.fill(range(cfg.m_max + 1), cfg.ctx(), cfg.workers)
    _save_if_grown(table, cfg, before)
    audit = table.audit()
    print(f"cache {cfg.cache}: {audit.summary()}")
    return EXIT_OK if audit.ok else EXIT_FAIL


def _records_for(cfg: RunConfig, table: GammaTable) -> list:
    ctx, w = cfg.ctx(), cfg.workers
    s = cfg.suite
    if s == "lemma41":
        return suites.lemma41()
    if s == "thm21":
        (Ms,) = cfg.ranges("M_range")
        return suites.thm21(table, ctx, Ms, m_max=cfg.fit_order)
    d_values, n_values = cfg.ranges("d_range", "n_range")
    if s == "thm22":
        return suites.thm22(table, ctx, [(d, d) for d in d_values], n_values, m_max=cfg.fit_order)
    table.fill(range(max(n_values) + max(d_values) + 1), ctx, w)
    fn = {"lemma23": suites.lemma23, "turan": suites.turan, "hyperbolic": suites.hyperbolic}[s]
    return fn(table, ctx, d_values, n_values, workers=w)


def _emit(cfg: RunConfig, records: list, title: str) -> None:
    text = render(records, cfg.format, title)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_verify(cfg: RunConfig) -> int:
    table = _load_table(cfg)
    before = table.snapshot()
    records = _records_for(cfg, table)
    _save_if_grown(table, cfg, before)
    _emit(cfg, records, f"verify {cfg.suite}")
    failed = next((r for r in records if r.passed is False), None)
    if failed is not None:
        print(f"FAIL {failed.check} {_describe(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_threshold_scan(cfg: RunConfig) -> int:
    (d_values,) = cfg.ranges("d_range")
    table = _load_table(cfg)
    before = table.snapshot()
    table.fill(range(cfg.n_max + max(d_values) + 1), cfg.ctx(), cfg.workers)
    records = suites.threshold_scan(table, cfg.ctx(), d_values, cfg.n_max, cfg.workers)
    _save_if_grown(table, cfg, before)
    _emit(cfg, records, "threshold-scan")
    return EXIT_OK


def _describe(r: Record) -> str:
    return " ".join(f"{k}={v}" for k, v in r.params.items())


COMMANDS = {"gamma-table": cmd_gamma_table, "verify": cmd_verify, "threshold-scan": cmd_threshold_scan}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg, verbose = build_config(argv)
    except UsageError as exc:
        print(f"xijensen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse usage errors
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"xijensen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PrecisionExhausted as exc:
        print(f"xijensen: precision exhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION


if __name__ == "__main__":
    sys.exit(main())
