import xml.etree.ElementTree as ET

import pytest

from core.reports import ResultRow, emit_csv, emit_plot, read_csv

SVG = "{http://www.w3.org/2000/svg}"


def bound_rows(pair="GMM", direction="forward"):
    return [
        ResultRow(pair, direction, "CELB", 0.5, 0.0),
        ResultRow(pair, direction, "CEUB", 2.5, 0.0),
        ResultRow(pair, direction, "CEALB", 1.0, 0.0),
        ResultRow(pair, direction, "CEAUB", 1.8, 0.0),
    ]


def mc_rows(pair="GMM", direction="forward"):
    return [ResultRow(pair, direction, f"MC@{s}", 1.3 + 1.0 / s, 0.5 / s) for s in (10, 100, 1000)]


def test_empty_rows_give_a_header_only_file(tmp_path):
    path = emit_csv([], tmp_path / "out.csv")
    assert path.read_text(encoding="utf-8") == "pair,direction,quantity,value,aux\n"


def test_single_row_round_trip(tmp_path):
    row = ResultRow("EMM", "reverse", "CEUB", 1 / 3, 2e-12)
    path = emit_csv([row], tmp_path / "out.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    assert lines[1] == "EMM,reverse,CEUB,0.333333333333,2e-12"
    back = read_csv(path)
    assert back[0].quantity == "CEUB"
    assert back[0].value == pytest.approx(1 / 3, rel=1e-11)


def test_rows_are_sorted(tmp_path):
    rows = [ResultRow("b", "forward", "CEUB", 1.0), ResultRow("a", "reverse", "CELB", 0.0),
            ResultRow("a", "forward", "MC@10", 0.5), ResultRow("a", "forward", "CELB", 0.0)]
    path = emit_csv(rows, tmp_path / "nested" / "out.csv")
    keys = [(r.pair_name, r.direction, r.quantity) for r in read_csv(path)]
    assert keys == sorted(keys)


def test_bounds_only_plot(tmp_path):
    paths = emit_plot(bound_rows(), tmp_path)
    assert [p.name for p in paths] == ["GMM_forward.svg"]
    root = ET.parse(paths[0]).getroot()
    assert root.tag == f"{SVG}svg" and root.get("version") == "1.1"
    lines = [el for el in root.iter(f"{SVG}line") if el.get("data-bound")]
    assert sorted(el.get("data-bound") for el in lines) == ["CEALB", "CEAUB", "CELB", "CEUB"]
    styles = {el.get("data-bound"): el.get("class") for el in lines}
    assert styles["CELB"] == "bound solid" and styles["CEAUB"] == "bound dashed"
    assert not [el for el in root.iter(f"{SVG}line") if el.get("class") == "error-bar"]


def test_error_bars_sit_between_the_bound_lines(tmp_path):
    path = emit_plot(bound_rows() + mc_rows(), tmp_path)[0]
    root = ET.parse(path).getroot()
    bars = [el for el in root.iter(f"{SVG}line") if el.get("class") == "error-bar"]
    assert len(bars) == 3
    y = {el.get("data-bound"): float(el.get("y1")) for el in root.iter(f"{SVG}line") if el.get("data-bound")}
    for bar in bars:
        # SVG y grows downwards
        assert y["CEUB"] < float(bar.get("y1")) < y["CELB"]
        assert y["CEUB"] < float(bar.get("y2")) < y["CELB"]


def test_meub_is_dotted(tmp_path):
    rows = [ResultRow("n", "entropy", "CELB", 1.0), ResultRow("n", "entropy", "CEUB", 2.0),
            ResultRow("n", "entropy", "MEUB", 1.5)]
    root = ET.parse(emit_plot(rows, tmp_path)[0]).getroot()
    meub = next(el for el in root.iter(f"{SVG}line") if el.get("data-bound") == "MEUB")
    assert meub.get("class") == "bound dotted"
    assert meub.get("stroke-dasharray")


def test_one_plot_per_pair_and_direction(tmp_path):
    rows = bound_rows() + bound_rows(direction="reverse") + bound_rows(pair="EMM")
    names = sorted(p.name for p in emit_plot(rows, tmp_path))
    assert names == ["EMM_forward.svg", "GMM_forward.svg", "GMM_reverse.svg"]


def test_plots_are_deterministic(tmp_path):
    rows = bound_rows() + mc_rows() + [ResultRow("GMM", "forward", "improvement%", 42.0)]
    first = emit_plot(rows, tmp_path / "a")[0].read_bytes()
    second = emit_plot(list(reversed(rows)), tmp_path / "b")[0].read_bytes()
    assert first == second
    assert b"42.0%" in first


def test_quadrature_failures_are_not_plotted(tmp_path):
    rows = [ResultRow("GMM", "forward", "CELB!quadfail", 0.1, 1.0)]
    assert emit_plot(rows, tmp_path) == []
