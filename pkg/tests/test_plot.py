import re

import numpy as np
import pytest

from graphflow.plot import nice_ticks, render_plot, svg_line_chart


def _polyline(svg):
    pts = re.search(r'<polyline[^>]*points="([^"]*)"', svg).group(1).split()
    return np.array([[float(v) for v in p.split(",")] for p in pts])


def _write_csv(path, t, area):
    lines = ["t,area,xi"] + [f"{float(a)!r},{float(b)!r},0" for a, b in zip(t, area)]
    path.write_text("\n".join(lines) + "\n")


def test_nice_ticks():
    assert nice_ticks(0.0, 1.0) == pytest.approx([0, 0.2, 0.4, 0.6, 0.8, 1.0])
    ticks = nice_ticks(-3.7, 12.1)
    assert ticks[0] >= -3.7 and ticks[-1] <= 12.1 and len(ticks) >= 3
    with pytest.raises(ValueError):
        nice_ticks(0.0, float("inf"))


def test_constant_series_is_horizontal(tmp_path):
    csv = tmp_path / "d.csv"
    _write_csv(csv, np.linspace(0, 1, 11), [np.pi] * 11)
    svg = render_plot(csv, "area")
    ys = _polyline(svg)[:, 1]
    assert np.ptp(ys) == 0.0
    assert "<title" not in svg and "area vs t" in svg


def test_monotone_series_non_increasing_polyline(tmp_path):
    csv = tmp_path / "d.csv"
    t = np.linspace(0, 0.05, 40)
    _write_csv(csv, t, 3.0 - np.sqrt(t))
    pts = _polyline(render_plot(csv, "area"))
    # SVG y grows downward
    assert np.all(np.diff(pts[:, 0]) > 0) and np.all(np.diff(pts[:, 1]) >= 0)


def test_deterministic_bytes(tmp_path):
    csv = tmp_path / "d.csv"
    _write_csv(csv, [0, 1, 2], [1.0, 0.5, 0.25])
    render_plot(csv, "area", tmp_path / "a.svg")
    render_plot(csv, "area", tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_unknown_column(tmp_path):
    csv = tmp_path / "d.csv"
    _write_csv(csv, [0, 1], [1.0, 1.0])
    with pytest.raises(KeyError):
        render_plot(csv, "volume")
    with pytest.raises(KeyError):
        render_plot(csv, "t")


def test_chart_input_checks():
    with pytest.raises(ValueError):
        svg_line_chart([], [], "x")
    with pytest.raises(ValueError):
        svg_line_chart([0, 1], [1], "x")
    assert svg_line_chart([0.0], [1.0], "one point").startswith("<svg")
