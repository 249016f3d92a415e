import csv
import math

import numpy as np
import pytest

from hjmsva.calibrator import QuoteGrid, SwaptionQuote
from hjmsva.cli import main
from hjmsva.curve import DiscountCurve, SwapSchedule
from hjmsva.market_io import dump_curve, dump_quotes, dump_surface, load_surface
from hjmsva.svapprox import ForwardVolSurface, sva_normal_vol

CONFIG_1F = """\
[model]
dt = 0.25

[monte_carlo]
n_paths = 4000
seed = 11
block_size = 1000

[validate]
max_maturity = 3.0
"""

CONFIG_2F = CONFIG_1F + """
[factor.1]
weight = 1.0
mean_reversion = 0.0

[factor.2]
weight = 0.6
mean_reversion = 0.5

[correlation]
matrix = 1.0 0.3
         0.3 1.0
"""


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def case(tmp_path):
    curve = DiscountCurve.flat(0.02, 12.0)
    flat = ForwardVolSurface.flat(0.008, 48)
    quotes = QuoteGrid.from_quotes(
        [SwaptionQuote(e, t, sva_normal_vol(curve, flat, SwapSchedule(e, t))) for e in (0.5, 1.0, 2.0) for t in (1.0, 2.0)]
    )
    files = {
        "curve": tmp_path / "curve.csv",
        "quotes": tmp_path / "quotes.csv",
        "config": tmp_path / "model.ini",
        "config2": tmp_path / "model2f.ini",
    }
    files["curve"].write_text(dump_curve(curve))
    files["quotes"].write_text(dump_quotes(quotes))
    files["config"].write_text(CONFIG_1F)
    files["config2"].write_text(CONFIG_2F)
    files["dir"] = tmp_path
    return files


def calibrate(case, out, quotes=None):
    return main(["calibrate", "--config", str(case["config"]), "--curve", str(case["curve"]),
                 "--quotes", str(quotes or case["quotes"]), "--out", str(out)])


def test_calibrate_round_trip(case, capsys):
    out = case["dir"] / "cal"
    assert calibrate(case, out) == 0
    rows = read_rows(out / "calibration_report.csv")
    assert len(rows) == 6
    assert all(float(r["residual"]) < 1e-8 and r["status"] == "exact" for r in rows)
    fvs = load_surface(out / "surface.csv")
    assert np.max(np.abs(fvs.values[fvs.known] - 0.008)) < 1e-8
    assert "clamp count: 0" in capsys.readouterr().out


def test_calibrate_misaligned_tenor_writes_nothing(case, capsys):
    bad = case["dir"] / "bad.csv"
    bad.write_text("expiry_years,tenor_years,normal_vol_bp\n1.0,1.0,80\n1.0,1.1,80\n")
    out = case["dir"] / "never"
    assert calibrate(case, out, bad) == 2
    assert not out.exists()
    assert "bad.csv:3" in capsys.readouterr().err


def test_calibrate_clamp_reported(case, capsys):
    q = case["dir"] / "clamp.csv"
    q.write_text("expiry_years,tenor_years,normal_vol_bp\n1.0,2.0,100\n1.0,3.0,10\n")
    assert calibrate(case, case["dir"] / "c", q) == 0
    assert "clamp count: 1" in capsys.readouterr().out


def test_calibrate_curve_too_short(case):
    short = case["dir"] / "short.csv"
    short.write_text("maturity_years,discount_factor\n1.0,0.98\n")
    args = ["calibrate", "--config", str(case["config"]), "--curve", str(short),
            "--quotes", str(case["quotes"]), "--out", str(case["dir"] / "x")]
    assert main(args) == 2
    assert not (case["dir"] / "x").exists()


def validate(case, surface, *extra, config=None):
    return main(["validate", "--config", str(config or case["config"]), "--curve", str(case["curve"]),
                 "--surface", str(surface), *extra])


def test_validate_calibrated_surface(case):
    out = case["dir"] / "cal"
    calibrate(case, out)
    # rows are calibrated only up to the last expiry (2y)
    assert validate(case, out / "surface.csv") == 2
    cfg = case["dir"] / "two.ini"
    cfg.write_text(CONFIG_1F.replace("max_maturity = 3.0", "max_maturity = 2.0"))
    assert validate(case, out / "surface.csv", config=cfg) == 0


def test_validate_zero_vol_surface(case, capsys):
    surf = case["dir"] / "zero.csv"
    surf.write_text(dump_surface(ForwardVolSurface.flat(0.0, 13)))
    assert validate(case, surf) == 0
    lines = [ln for ln in capsys.readouterr().out.splitlines() if ln.rstrip().endswith("ok")]
    assert lines and all(ln.split()[2] == "1.00000000" for ln in lines)


def test_validate_zero_drift_fails(case):
    surf = case["dir"] / "s.csv"
    surf.write_text(dump_surface(ForwardVolSurface.flat(0.01, 41)))
    cfg = case["dir"] / "long.ini"
    cfg.write_text(CONFIG_1F.replace("max_maturity = 3.0", "max_maturity = 10.0"))
    assert validate(case, surf, config=cfg) == 0
    assert validate(case, surf, "--debug-zero-drift", config=cfg) == 1


def test_validate_missing_cells(case, capsys):
    surf = case["dir"] / "small.csv"
    surf.write_text(dump_surface(ForwardVolSurface.flat(0.008, 6)))
    assert validate(case, surf) == 2
    assert "lacks" in capsys.readouterr().err


def report(case, surface, out, config=None, *extra):
    return main(["report", "--config", str(config or case["config"]), "--curve", str(case["curve"]),
                 "--surface", str(surface), "--quotes", str(case["quotes"]), "--out", str(out), *extra])


def test_report_is_deterministic(case):
    calibrate(case, case["dir"] / "cal")
    surf = case["dir"] / "cal" / "surface.csv"
    a, b = case["dir"] / "a.csv", case["dir"] / "b.csv"
    assert report(case, surf, a) == 0
    assert report(case, surf, b) == 0
    assert a.read_bytes() == b.read_bytes()
    c = case["dir"] / "c.csv"
    report(case, surf, c, None, "--seed", "12")
    assert c.read_bytes() != a.read_bytes()


def test_report_close_to_market(case):
    calibrate(case, case["dir"] / "cal")
    out = case["dir"] / "r.csv"
    assert report(case, case["dir"] / "cal" / "surface.csv", out, None, "--paths", "20000") == 0
    rows = read_rows(out)
    assert [k for k in rows[0]] == ["expiry", "tenor", "market_vol_bp", "model_vol_bp", "diff_bp", "mc_se_bp"]
    for r in rows:
        assert abs(float(r["diff_bp"])) <= max(1.0, 3 * float(r["mc_se_bp"])) + 0.01 * float(r["market_vol_bp"])


def test_report_zero_vol(case):
    surf = case["dir"] / "zero.csv"
    surf.write_text(dump_surface(ForwardVolSurface.flat(0.0, 16)))
    out = case["dir"] / "z.csv"
    assert report(case, surf, out) == 0
    assert all(float(r["model_vol_bp"]) == 0.0 for r in read_rows(out))


def test_report_factor_count_consistency(case):
    calibrate(case, case["dir"] / "cal")
    surf = case["dir"] / "cal" / "surface.csv"
    one, two = case["dir"] / "one.csv", case["dir"] / "two.csv"
    assert report(case, surf, one) == 0
    assert report(case, surf, two, case["config2"]) == 0
    for r1, r2 in zip(read_rows(one), read_rows(two)):
        se = math.hypot(float(r1["mc_se_bp"]), float(r2["mc_se_bp"]))
        assert abs(float(r1["model_vol_bp"]) - float(r2["model_vol_bp"])) <= 3 * se


def test_report_missing_surface_writes_nothing(case):
    out = case["dir"] / "none.csv"
    assert report(case, case["dir"] / "absent.csv", out) == 2
    assert not out.exists()


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["validate", "--curve", "c.csv"]])
def test_usage_errors(argv):
    assert main(argv) == 2


def test_paths_override_validation(case):
    assert validate(case, case["dir"] / "x.csv", "--paths", "1") == 2
