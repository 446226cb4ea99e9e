import csv
import io
import json
import shutil

import pytest

from xijensen import cli
from xijensen.cli import UsageError, parse_range
from xijensen.reports import Record, render
from xijensen.xi_taylor import GammaTable, Provenance


@pytest.fixture
def cache_copy(tmp_path, cache_path):
    dst = tmp_path / "cache.txt"
    shutil.copy(cache_path, dst)
    return dst


def _run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _body(text: str) -> str:
    """Report without its timestamp line."""
    return text.split("\n", 1)[1]


# -- ranges and config ---------------------------------------------------------------------------


def test_parse_range_forms():
    assert parse_range("1:4") == [1, 2, 3, 4]
    assert parse_range("0:10:5") == [0, 5, 10]
    assert parse_range("3,7,9") == [3, 7, 9]
    assert parse_range("6") == [6]


@pytest.mark.parametrize("bad", ["5:4", "", "1:2:0", "a:b", "1:2:3:4"])
def test_parse_range_rejects(bad):
    with pytest.raises(UsageError):
        parse_range(bad)


def test_config_file_sits_between_defaults_and_flags(tmp_path, monkeypatch):
    monkeypatch.delenv("XIJENSEN_CACHE", raising=False)
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"bits": 320, "d-range": "2:3", "format": "json"}))
    cfg, _ = cli.build_config(["verify", "hyperbolic", "--config", str(cfg_file), "--d-range", "4:5"])
    assert cfg.bits == 320 and cfg.format == "json"
    assert cfg.d_range == "4:5"
    assert cfg.n_range == "0:100"  # suite default
    assert cfg.cache == cli.DEFAULT_CACHE


def test_cache_default_from_environment(monkeypatch):
    monkeypatch.setenv("XIJENSEN_CACHE", "/some/where.txt")
    cfg, _ = cli.build_config(["verify", "lemma41"])
    assert cfg.cache == "/some/where.txt"


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "nosuch"],
        ["verify", "lemma23", "--bits", "32"],
        ["verify", "lemma23", "--d-range", "9:3"],
        ["gamma-table"],
        ["threshold-scan", "--d-range", ""],
        ["verify", "lemma23", "--workers", "0"],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    code, _, _ = _run(capsys, *argv)
    assert code == cli.EXIT_USAGE


def test_unknown_config_key_is_usage_error(capsys, tmp_path):
    f = tmp_path / "c.json"
    f.write_text('{"colour": "blue"}')
    code, _, err = _run(capsys, "verify", "lemma41", "--config", str(f))
    assert code == cli.EXIT_USAGE and "colour" in err


# -- gamma-table -----------------------------------------------------------------------------------


def test_gamma_table_single_direct_entry(capsys, tmp_path):
    path = tmp_path / "g.txt"
    code, out, _ = _run(capsys, "gamma-table", "--m-max", "0", "--cache", str(path))
    assert code == 0 and "PASS" in out
    t = GammaTable.load(path)
    assert t.indices() == [0] and t.entries[0].provenance is Provenance.DIRECT


def test_gamma_table_is_idempotent(capsys, tmp_path):
    path = tmp_path / "g.txt"
    _run(capsys, "gamma-table", "--m-max", "12", "--bits", "128", "--cache", str(path))
    first = path.read_bytes()
    mtime = path.stat().st_mtime_ns
    code, out, _ = _run(capsys, "gamma-table", "--m-max", "12", "--bits", "128", "--cache", str(path))
    assert code == 0 and "entries=13" in out
    assert path.read_bytes() == first and path.stat().st_mtime_ns == mtime


# -- verify ---------------------------------------------------------------------------------------------


def test_verify_lemma41_passes(capsys, cache_copy):
    code, out, _ = _run(capsys, "verify", "lemma41", "--cache", str(cache_copy))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(_body(out))))
    assert rows and all(r["status"] == "pass" for r in rows)


def test_verify_lemma23_small_grid(capsys, cache_copy):
    code, out, _ = _run(capsys, "verify", "lemma23", "--d-range", "1:10", "--n-range", "0:20", "--cache", str(cache_copy))
    assert code == 0
    assert len(list(csv.DictReader(io.StringIO(_body(out))))) == 10 * 21


def test_verify_hyperbolic_parallel_matches_serial(capsys, cache_copy):
    args = ["verify", "hyperbolic", "--d-range", "1:12", "--n-range", "0:50:10", "--cache", str(cache_copy)]
    c1, serial, _ = _run(capsys, *args)
    c2, parallel, _ = _run(capsys, *args, "--workers", "2")
    assert c1 == c2 == 0
    assert _body(serial) == _body(parallel)


def test_verify_is_deterministic_modulo_timestamp(capsys, cache_copy, tmp_path):
    outs = []
    for i in range(2):
        target = tmp_path / f"r{i}.json"
        code, _, _ = _run(capsys, "verify", "thm22", "--format", "json", "--out", str(target), "--cache", str(cache_copy))
        assert code == 0
        outs.append(target.read_text())
    assert _body(outs[0]) == _body(outs[1])
    doc = json.loads(outs[0])
    assert doc["title"] == "verify thm22" and "generated" in doc
    assert {"check", "params", "observed", "predicted", "ratio", "expected_error_power", "status", "note"} <= set(doc["records"][0])


def test_verify_failure_names_first_failing_record(capsys, cache_copy):
    code, out, err = _run(capsys, "verify", "thm21", "--M-range", "500", "--cache", str(cache_copy))
    assert code == cli.EXIT_FAIL
    assert "FAIL Delta*sqrt(2M) M=500" in err


def test_precision_exhaustion_exits_3(capsys, tmp_path, cache_path):
    # entries carrying wide radii at 64 bits: no normalization can certify at that ceiling
    src = GammaTable.load(cache_path)
    lines = ["# xijensen gamma table, format 1", "# M\tmidpoint\tradius\tbits_used\tprovenance"]
    for M in range(0, 15):
        mid = src.entries[M].value.mid().str(30, radius=False)
        lines.append(f"{M}\t{mid}\t{abs(float(mid)) * 1e-6!r}\t64\tIntegral")
    path = tmp_path / "wide.txt"
    path.write_text("\n".join(lines) + "\n")
    code, _, err = _run(capsys, "verify", "lemma23", "--d-range", "10", "--n-range", "0",
                        "--bits", "64", "--max-bits", "64", "--cache", str(path))
    assert code == cli.EXIT_PRECISION and "precision" in err


# -- threshold-scan ---------------------------------------------------------------------------------------


def test_threshold_scan_rows_and_slope(capsys, cache_copy):
    code, out, _ = _run(capsys, "threshold-scan", "--d-range", "3:10", "--n-max", "200", "--cache", str(cache_copy))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(_body(out))))
    thresholds = [r for r in rows if r["check"] == "threshold"]
    assert [r["params"] for r in thresholds] == [f"d={d};n_max=200" for d in range(3, 11)]
    assert all(r["observed"] or r["note"] == "absent" for r in thresholds)
    found = sum(1 for r in thresholds if r["observed"])
    assert found >= 4
    assert any(r["check"] == "slope_log_N_vs_d" for r in rows)


def test_threshold_scan_empty_range(capsys):
    code, _, err = _run(capsys, "threshold-scan", "--d-range", "10:3")
    assert code == cli.EXIT_USAGE and "empty" in err


# -- report rendering -----------------------------------------------------------------------------------


def test_render_fixed_timestamp_is_stable():
    recs = [Record("x", {"d": 3}, observed=1.5, passed=True), Record("y", {}, note="info row")]
    a = render(recs, "csv", "t", timestamp="2000-01-01T00:00:00+00:00")
    assert a == render(recs, "csv", "t", timestamp="2000-01-01T00:00:00+00:00")
    assert a.splitlines()[1] == "check,params,observed,predicted,ratio,error_power,status,note"
    assert a.splitlines()[2] == "x,d=3,1.5,,,,pass,"
    assert a.splitlines()[3] == "y,,,,,,info,info row"
    with pytest.raises(ValueError):
        render(recs, "xml", "t")
