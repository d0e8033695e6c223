import json

import pytest

from osfuse.export import plots
from osfuse.export.report import Report, ReportGenerator, ReportSection, dumps, table_rows


def sample_report() -> Report:
    rows = table_rows(["model", "accuracy"], [["optical", 61.25], ["fused", 80.0], ["sar", None]])
    return Report(
        name="toytrain",
        title="Fusion experiment",
        payload={"margin": 18.75, "best_single": 61.25},
        text="fused - best single: +18.75 points",
        sections=[ReportSection("Accuracy", rows, note="synthetic task")],
        charts={
            "curves": lambda: plots.accuracy_curves({"optical": [50.0, 61.25], "fused": [55.0, 80.0]}),
            "bars": lambda: plots.bar_chart({"optical": 61.25, "fused": 80.0}, "Accuracy [%]", "Models"),
        },
    )


def test_dumps_is_sorted_and_newline_terminated():
    assert dumps({"b": 1, "a": [1, 2]}) == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n'


def test_table_rows_formatting():
    assert table_rows(["x", "y"], [[1.0, None], [3, "k"]]) == [["x", "y"], ["1.00", "-"], ["3", "k"]]


def test_export_writes_json_text_and_charts(tmp_path):
    written = ReportGenerator().export(tmp_path / "out", sample_report())
    names = sorted(p.name for p in written)
    assert names == ["toytrain.json", "toytrain.txt", "toytrain_bars.svg", "toytrain_curves.svg"]
    assert json.loads((tmp_path / "out" / "toytrain.json").read_text())["margin"] == 18.75
    assert (tmp_path / "out" / "toytrain.txt").read_text().endswith("points\n")


def test_charts_can_be_disabled(tmp_path):
    written = ReportGenerator(include_charts=False).export(tmp_path, sample_report())
    assert [p.suffix for p in written] == [".json", ".txt"]


def test_svg_output_is_deterministic(tmp_path):
    first = ReportGenerator().export(tmp_path / "a", sample_report())
    second = ReportGenerator().export(tmp_path / "b", sample_report())
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


def test_angle_histogram_renders(tmp_path):
    path = plots.save_svg(plots.angle_histogram([-1.5, 0.0, 1.5], [3, 4]), tmp_path / "angles.svg")
    assert path.read_text().lstrip().startswith("<?xml")


def test_pdf_export(tmp_path):
    pytest.importorskip("reportlab")
    written = ReportGenerator(include_pdf=True).export(tmp_path, sample_report())
    pdf = [p for p in written if p.suffix == ".pdf"]
    assert len(pdf) == 1
    assert pdf[0].read_bytes().startswith(b"%PDF")
