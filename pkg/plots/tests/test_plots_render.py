"""Rendering kinds, CSV validation, determinism."""

import pathlib
import shutil

import pytest

from opo_plots.csvdata import CsvError, pivot_grid, read_csv
from opo_plots.render import PlotJob, render

DATA = pathlib.Path(__file__).parent / "data"


def job(tmp_path, csv="fig2_async.csv", **kw):
    args = dict(
        input=str(DATA / csv), kind="heatmap", x="delta", y="g",
        out=str(tmp_path / "out.png"),
    )
    args.update(kw)
    return PlotJob(**args)


class TestReadCsv:
    def test_columns(self):
        data = read_csv(str(DATA / "fig2_async.csv"))
        assert "I" in data and "delta" in data
        assert len(data["I"]) == 49

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(CsvError, match="no data rows"):
            read_csv(str(path))

    def test_header_only(self, tmp_path):
        path = tmp_path / "hdr.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(CsvError, match="no data rows"):
            read_csv(str(path))

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("a,b\n1,2\n3\n")
        with pytest.raises(CsvError, match="row 3 has 1 fields"):
            read_csv(str(path))


class TestPivotGrid:
    def test_missing_point(self):
        with pytest.raises(CsvError, match="ragged grid"):
            pivot_grid([0, 0, 1], [0, 1, 0], [1, 2, 3])

    def test_duplicate_point(self):
        with pytest.raises(CsvError, match="ragged grid"):
            pivot_grid([0, 0, 0, 0], [0, 1, 0, 1], [1, 2, 3, 4])

    def test_order_independent(self):
        xa, ya, grid = pivot_grid([1, 0, 1, 0], [0, 1, 1, 0], [3, 2, 4, 1])
        assert xa == [0, 1] and ya == [0, 1]
        assert grid == [[1, 3], [2, 4]]


class TestRender:
    def test_heatmap(self, tmp_path):
        summary = render(job(tmp_path))
        out = tmp_path / "out.png"
        assert out.exists() and out.read_bytes()[:8].startswith(b"\x89PNG")
        assert summary["contour"] is True
        assert summary["x_extent"] == (0.0, 5.0)
        assert summary["y_extent"] == (0.0, 5.0)

    def test_lines(self, tmp_path):
        summary = render(job(tmp_path, csv="fig3_tau.csv", kind="lines",
                             x="tau", y="g"))
        assert summary["curves"] == 5
        assert (tmp_path / "out.png").exists()

    def test_polar(self, tmp_path):
        import math

        summary = render(job(tmp_path, csv="fig4_polar.csv", kind="polar",
                             x="dphi", y="R_x"))
        assert summary["x_extent"][0] == 0.0
        assert summary["x_extent"][1] < 2.0 * math.pi
        assert (tmp_path / "out.png").exists()

    def test_missing_column(self, tmp_path):
        with pytest.raises(CsvError, match="missing column 'bogus'"):
            render(job(tmp_path, value="bogus"))

    def test_ragged_grid(self, tmp_path):
        src = (DATA / "fig2_async.csv").read_text().splitlines()
        path = tmp_path / "ragged.csv"
        path.write_text("\n".join(src[:-1]) + "\n")  # drop one grid point
        with pytest.raises(CsvError, match="ragged grid"):
            render(job(tmp_path, input=str(path)))

    def test_unknown_kind(self, tmp_path):
        with pytest.raises(ValueError, match="unknown plot kind"):
            render(job(tmp_path, kind="scatter"))

    def test_deterministic_output(self, tmp_path):
        render(job(tmp_path, out=str(tmp_path / "a.png")))
        render(job(tmp_path, out=str(tmp_path / "b.png")))
        assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()

    def test_input_not_mutated(self, tmp_path):
        src = DATA / "fig2_async.csv"
        copy = tmp_path / "copy.csv"
        shutil.copy(src, copy)
        render(job(tmp_path, input=str(copy)))
        assert copy.read_bytes() == src.read_bytes()

    def test_clamp_saturates(self, tmp_path):
        # grid with values far above the clamp still renders
        path = tmp_path / "hot.csv"
        path.write_text(
            "delta,g,I\n0,0,50\n0,1,0.5\n1,0,2\n1,1,0.1\n"
        )
        summary = render(job(tmp_path, input=str(path)))
        assert summary["rows"] == 4
