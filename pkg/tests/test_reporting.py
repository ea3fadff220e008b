import json

from attrfool.attack import Edit, PerturbationRecord
from attrfool.harness import CurveBin, RobustnessCurve
from attrfool.reporting import CURVE_COLUMNS, curve_csv_text, emit_report, parse_curve_csv


def _curve(bins=None):
    bins = bins if bins is not None else [
        CurveBin(0.0, 0.2, 0.1, 0.8, 0.7, 0.9, 0.75, 0.6, 0.9, 0.8, 0.7, 0.95, 4),
        CurveBin(0.2, 0.4, 0.3, 0.4, 0.2, 0.6, 0.35, 0.3, 0.5, 0.4, 0.45, None, 2),
    ]
    return RobustnessCurve(
        bins=bins, acc=0.25, ceiling=0.4, zero_rho_count=1, degenerate_count=0,
        binned_count=sum(b.count for b in bins),
    )


def _records():
    return [
        PerturbationRecord(0, (Edit(1, "good", "decent"),), 0.25, 0.3, 0.4, 0),
        PerturbationRecord(1, (), 0.0, 0.0, 1.0, 1),
    ]


def test_empty_curve_header_only():
    curve = _curve(bins=[])
    assert curve_csv_text(curve) == CURVE_COLUMNS + "\n"


def test_one_bin_curve_two_lines():
    curve = _curve(bins=[CurveBin(0.0, 0.4, 0.2, 0.5, 0.4, 0.6, 0.5, 0.4, 1, 1, 1, None, 3)])
    text = curve_csv_text(curve)
    assert len(text.splitlines()) == 2
    assert text.splitlines()[0] == CURVE_COLUMNS


def test_curve_csv_round_trip(tmp_path):
    curve = _curve()
    path = tmp_path / "curve.csv"
    path.write_text(curve_csv_text(curve), encoding="utf-8")
    restored = parse_curve_csv(path)
    assert restored == curve.bins


def test_missing_sem_sim_is_empty_field():
    text = curve_csv_text(_curve())
    last = text.splitlines()[-1].split(",")
    assert last[11] == ""


def test_emit_report_files_and_determinism(tmp_path):
    curve = _curve()
    records = _records()
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    paths1 = emit_report(curve, records, out1, {"seed": 1}, figures=True)
    paths2 = emit_report(curve, records, out2, {"seed": 1}, figures=True)
    for name in ("curve", "records", "summary", "figure"):
        b1 = open(paths1[name], "rb").read()
        b2 = open(paths2[name], "rb").read()
        assert b1 == b2, f"{name} differs between identical runs"
    summary = json.loads(open(paths1["summary"], encoding="utf-8").read())
    assert summary["acc"] == 0.25
    assert summary["config"] == {"seed": 1}
    lines = open(paths1["records"], encoding="utf-8").read().splitlines()
    assert json.loads(lines[0])["edits"] == [[1, "good", "decent"]]
