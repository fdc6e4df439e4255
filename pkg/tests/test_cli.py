import filecmp
import json
import shutil

import pytest

from mfrmode.cli import main
from mfrmode.io import bundled_data

GOLDEN = {"daejeon": 85653.496, "daesan": 140341.134}


@pytest.fixture
def short_scenario(tmp_path):
    p = tmp_path / "short.yaml"
    p.write_text(
        "version: 1\n"
        "timing:\n"
        "  start: '2022-04-21T17:00:00+09:00'\n"
        "  end: '2022-04-21T19:00:00+09:00'\n"
        "  epoch_interval_s: 120\n"
    )
    return p


def _err(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_simulate_bundled_default(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--seed", "1", "--out", str(out)]) == 0
    for name in ("epochs.csv", "stats.csv", "histogram.csv", "report.txt", "stats_day.csv", "histogram_night.csv"):
        assert (out / name).exists(), name


def test_simulate_deterministic(tmp_path, short_scenario):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", str(short_scenario), "--seed", "7", "--out", str(a)]) == 0
    assert main(["simulate", str(short_scenario), "--seed", "7", "--out", str(b)]) == 0
    names = sorted(p.name for p in a.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert mismatch == [] and errors == [] and len(match) == len(names)


@pytest.mark.parametrize("site", sorted(GOLDEN))
def test_analyze_golden_is_byte_identical(tmp_path, site):
    out = tmp_path / site
    code = main(["analyze", str(bundled_data(f"golden_{site}.csv")), "--truth", repr(GOLDEN[site]), "--out", str(out)])
    assert code == 0
    ref = bundled_data("x").parents[3] / "tests" / "golden" / site
    for name in ("stats.csv", "histogram.csv", "report.txt"):
        assert (out / name).read_bytes() == (ref / name).read_bytes(), name


def test_compare_identical_is_inconclusive(tmp_path, capsys):
    out = tmp_path / "g"
    main(["analyze", str(bundled_data("golden_daejeon.csv")), "--truth", "85653.496", "--out", str(out)])
    capsys.readouterr()
    f = str(out / "stats_night.csv")
    assert main(["compare", f, f, "--json"]) == 0
    reports = json.loads(capsys.readouterr().out)
    assert {r["verdict"] for r in reports} == {"inconclusive"}
    assert all(r["rms_ratio"] == 1.0 and r["ks_d"] == 0.0 for r in reports)
    assert main(["compare", str(out / "stats.csv"), str(out / "stats.csv"), "--label-a", "day", "--label-b", "night"]) == 0
    assert "day_better" in capsys.readouterr().out


def test_tables(tmp_path, capsys):
    g = tmp_path / "g"
    main(["analyze", str(bundled_data("golden_daejeon.csv")), "--truth", "85653.496", "--out", str(g)])
    capsys.readouterr()
    assert main(["tables", f"Daejeon={g / 'stats.csv'}", "--out", str(tmp_path / "t")]) == 0
    text = (tmp_path / "t" / "tables.txt").read_text()
    for cell in ("320095", "320060", "427741", "21.313", "20.9757", "21.877", "21.252"):
        assert cell in text


def test_missing_file_is_machine_readable(tmp_path, capsys):
    assert main(["analyze", str(tmp_path / "nope.csv"), "--truth", "1", "--out", str(tmp_path)]) != 0
    err = _err(capsys)
    assert err["error"] == "FileNotFoundError" and err["message"]


def test_bad_scenario_lists_problems(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("version: 1\nnoise: {sigma: -1}\nfoo: 1\n")
    assert main(["simulate", str(p), "--out", str(tmp_path / "o")]) == 2
    err = _err(capsys)
    assert err["error"] == "ScenarioError" and len(err["problems"]) == 2


def test_usage_error_exit_code(capsys):
    assert main(["simulate"]) == 2
    assert main([]) == 2


def test_compare_label_required(tmp_path, capsys):
    g = tmp_path / "g"
    main(["analyze", str(bundled_data("golden_daesan.csv")), "--truth", "140341.134", "--out", str(g)])
    capsys.readouterr()
    assert main(["compare", str(g / "stats.csv"), str(g / "stats.csv")]) == 2
    assert _err(capsys)["error"] == "ConfigurationError"


def test_compare_uses_histograms_when_present(tmp_path, capsys):
    g = tmp_path / "g"
    main(["analyze", str(bundled_data("golden_daesan.csv")), "--truth", "140341.134", "--out", str(g)])
    lone = tmp_path / "lone"
    lone.mkdir()
    shutil.copy(g / "stats_day.csv", lone / "stats_day.csv")
    capsys.readouterr()
    assert main(["compare", str(g / "stats_day.csv"), str(g / "stats_night.csv")]) == 0
    assert "verdict=a_better" in capsys.readouterr().out
    # no histogram next to the stats: distance unknown, never a verdict
    assert main(["compare", str(lone / "stats_day.csv"), str(g / "stats_night.csv"), "--json"]) == 0
    (r1, r2) = json.loads(capsys.readouterr().out)
    assert r1["verdict"] == r2["verdict"] == "inconclusive"
