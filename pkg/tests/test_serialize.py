import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from graphflow import scenarios
from graphflow.domain import DomainSpec, build_lattice
from graphflow.jets import GraphField
from graphflow.monitors import DiagnosticsRecord, monitor_step
from graphflow.serialize import (
    SnapshotError,
    atomic_write,
    csv_header,
    diagnostics_csv,
    read_diagnostics,
    read_snapshot,
    records_from_columns,
    write_diagnostics,
    write_snapshot,
)

LAT = build_lattice(DomainSpec.ball(2, 0.2))
BOX = build_lattice(DomainSpec.box((0, 0), (1, 1), 0.25))


def test_header_schema():
    assert csv_header(2) == (
        "t,area,max_lambda,max_pair_product,min_star_omega1,residual_max,A2_max,"
        "boundary_max_Df,xi,energy_spent,f_max_1,f_max_2,f_min_1,f_min_2"
    ).split(",")


def test_single_record_file(tmp_path):
    rec = monitor_step(GraphField.sample(LAT, scenarios.affine([[0.1, 0.2], [0.0, 1.0], [3.0, 0.0]])))
    path = write_diagnostics([rec], tmp_path / "d.csv")
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    lines = raw.decode().splitlines()
    assert len(lines) == 2
    assert len(lines[0].split(",")) == len(lines[1].split(",")) == 10 + 2 * 3


def test_empty_series_rejected():
    with pytest.raises(ValueError):
        diagnostics_csv([])


doubles = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(st.lists(st.tuples(st.lists(doubles, min_size=10, max_size=10), st.lists(doubles, min_size=4, max_size=4)), min_size=1, max_size=5))
def test_csv_bit_exact_round_trip(rows):
    recs = [DiagnosticsRecord(*base, f_max=tuple(fm[:2]), f_min=tuple(fm[2:])) for base, fm in rows]
    text = diagnostics_csv(recs)
    import tempfile, pathlib

    with tempfile.TemporaryDirectory() as d:
        p = pathlib.Path(d) / "x.csv"
        p.write_text(text)
        back = records_from_columns(read_diagnostics(p))
    for a, b in zip(recs, back):
        for k in ("t", "area", "xi", "energy_spent", "A2_max"):
            assert np.float64(getattr(a, k)).tobytes() == np.float64(getattr(b, k)).tobytes()
        assert a.f_max == b.f_max and a.f_min == b.f_min
    assert diagnostics_csv(back) == text


def test_write_diagnostics_reports_path(tmp_path):
    rec = monitor_step(GraphField.sample(BOX, scenarios.affine([[0.1, 0.2]])))
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        write_diagnostics([rec], blocker / "sub" / "d.csv")


@given(arrays(np.float64, (LAT.n_state, 3), elements=doubles), st.floats(0, 10))
def test_snapshot_round_trip_bit_identical(values, t):
    import tempfile, pathlib

    f = GraphField(LAT, values, t)
    with tempfile.TemporaryDirectory() as d:
        p = write_snapshot(f, pathlib.Path(d) / "s.bin")
        g = read_snapshot(p)
        h = read_snapshot(p, LAT)
    assert g.values.tobytes() == f.values.tobytes() and g.t == f.t
    assert g.lattice.spec == LAT.spec and h.lattice is LAT


def test_snapshot_layout(tmp_path):
    f = GraphField.sample(BOX, scenarios.affine([[0.3, -0.1]], [2.0]))
    p = write_snapshot(f, tmp_path / "a.bin")
    raw = p.read_bytes()
    assert len(raw) == 8 * BOX.n_state
    assert np.array_equal(np.frombuffer(raw, "<f8"), f.values[:, 0])
    meta = (tmp_path / "a.bin.meta").read_text()
    assert "kind = box" in meta and "m = 1" in meta and "sha256 = " in meta


def test_snapshot_corruption_detected(tmp_path):
    f = GraphField.sample(BOX, scenarios.sinusoid(2, 2, 0.3))
    p = write_snapshot(f, tmp_path / "a.bin")
    raw = bytearray(p.read_bytes())
    raw[17] ^= 0x01
    p.write_bytes(bytes(raw))
    with pytest.raises(SnapshotError, match="checksum"):
        read_snapshot(p)


def test_snapshot_lattice_mismatch(tmp_path):
    f = GraphField.sample(BOX, scenarios.sinusoid(2, 1, 0.3))
    p = write_snapshot(f, tmp_path / "a.bin")
    with pytest.raises(SnapshotError, match="different domain"):
        read_snapshot(p, build_lattice(DomainSpec.box((0, 0), (1, 1), 0.125)))
    with pytest.raises(SnapshotError):
        read_snapshot(tmp_path / "missing.bin")


def test_affine_snapshot_equals_sampling(tmp_path):
    sc = scenarios.affine([[0.5, 0.0], [0.1, -0.2]], [1.0, 0.0])
    f = GraphField.sample(LAT, sc)
    g = read_snapshot(write_snapshot(f, tmp_path / "a.bin"))
    assert g.t == 0.0
    assert np.array_equal(g.values, GraphField.sample(build_lattice(LAT.spec), sc).values)


def test_atomic_write_leaves_no_temporaries(tmp_path):
    atomic_write(tmp_path / "x" / "y.txt", "hello")
    atomic_write(tmp_path / "x" / "y.txt", b"bye")
    assert (tmp_path / "x" / "y.txt").read_bytes() == b"bye"
    assert [p.name for p in (tmp_path / "x").iterdir()] == ["y.txt"]
