"""
Unit tests for artifact writers and SVG rendering.
"""

import json

import numpy as np
import pytest

from stmeta.models.result import Plot, ScenarioResult, Series, Table
from stmeta.services import export, plotting


@pytest.fixture
def result() -> ScenarioResult:
    """Small result with one artifact of each kind."""
    return ScenarioResult(
        subcommand="simulate",
        summary={"samples": 2},
        tables={"trajectory": Table(header=["t", "v_out"], rows=[(0.0, 1.0), (1e-9, 0.1)])},
        documents={"events": [{"t": 1e-9, "kind": "threshold"}]},
        plots={
            "trajectory": Plot(
                title="Transient <run>",
                x_label="t (ns)",
                y_label="V",
                series=[Series(label="v_out", x=[0.0, 1.0], y=[1.0, 0.1])],
            )
        },
    )


@pytest.mark.unit
class TestFormatting:
    """Test cell formatting."""

    def test_float_round_trip_precision(self):
        """Test that floats keep 17 significant digits."""
        assert export.format_cell(0.1) == "0.10000000000000001"
        assert float(export.format_cell(1.0 / 3.0)) == 1.0 / 3.0

    def test_other_types(self):
        """Test integers, booleans, numpy scalars and text."""
        assert export.format_cell(3) == "3"
        assert export.format_cell(np.int64(4)) == "4"
        assert export.format_cell(True) == "true"
        assert export.format_cell(np.float64(2.5)) == "2.5"
        assert export.format_cell("linear") == "linear"


@pytest.mark.unit
class TestWriters:
    """Test CSV and JSON writers."""

    def test_csv_crlf(self, tmp_path):
        """Test header row and CRLF line endings."""
        path = export.write_csv(tmp_path / "t.csv", ["t", "v"], [(0.0, 0.5), (1e-9, "x")])

        assert path.read_bytes() == b"t,v\r\n0,0.5\r\n1.0000000000000001e-09,x\r\n"

    def test_json_sorted(self, tmp_path):
        """Test sorted keys and numpy conversion."""
        path = export.write_json(tmp_path / "d.json", {"b": np.arange(2), "a": np.float64(1.5)})

        text = path.read_text()
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {"a": 1.5, "b": [0, 1]}

    def test_write_result_formats(self, tmp_path, result):
        """Test that only requested formats are written."""
        paths = export.write_result(result, tmp_path / "out", ["csv", "json"])

        assert [p.name for p in paths] == ["trajectory.csv", "events.json"]
        assert not (tmp_path / "out" / "trajectory.svg").exists()

    def test_write_result_svg(self, tmp_path, result):
        """Test SVG output."""
        paths = export.write_result(result, tmp_path, ["svg"])

        assert [p.name for p in paths] == ["trajectory.svg"]
        assert paths[0].read_text().startswith("<svg")

    def test_effective_config(self, tmp_path):
        """Test that the effective configuration creates its directory."""
        path = export.write_effective_config(tmp_path / "a" / "b", {"run": {"tol": 1e-9}})

        assert path.name == export.EFFECTIVE_CONFIG
        assert json.loads(path.read_text()) == {"run": {"tol": 1e-9}}


@pytest.mark.unit
class TestPlotting:
    """Test SVG rendering."""

    def test_render(self, result):
        """Test document structure and escaping."""
        svg = plotting.render_svg(result.plots["trajectory"])

        assert svg.startswith("<svg")
        assert svg.rstrip().endswith("</svg>")
        assert svg.count("<polyline") == 1
        assert "Transient &lt;run&gt;" in svg

    def test_log_axis_skips_non_positive(self):
        """Test that a log axis drops non-positive abscissae."""
        plot = Plot(
            title="sweep",
            x_label="eps",
            y_label="delay",
            log_x=True,
            series=[Series(label="m", x=[0.0, 1e-6, 1e-3], y=[3.0, 2.0, 1.0])],
        )

        svg = plotting.render_svg(plot)

        points = svg.split('points="')[1].split('"')[0]
        assert len(points.split()) == 2

    def test_empty_plot(self):
        """Test a plot without series."""
        svg = plotting.render_svg(Plot(title="empty", x_label="x", y_label="y"))

        assert "<polyline" not in svg
