import numpy as np
import pytest

from rdafront.errors import FieldIOError
from rdafront.fieldio import (
    export_field,
    read_fld1,
    read_front_fld1,
    write_fld1,
    write_front_csv,
    write_front_fld1,
)
from rdafront.grid import Grid3D, ScalarField3D
from rdafront.surface import FrontSurface


@pytest.fixture
def field():
    grid = Grid3D(5, 6, 7, -1.0, 2.0, -1.0, 2.0, 1.0)
    rng = np.random.default_rng(11)
    return ScalarField3D(grid, rng.standard_normal((5, 6, 7)), time=0.25)


def test_fld1_roundtrip_bitexact(field, tmp_path):
    path = tmp_path / "f.fld"
    write_fld1(field, path)
    back = read_fld1(path)
    assert back.grid == field.grid
    assert back.time == field.time
    assert np.array_equal(back.values, field.values)


def test_fld1_header(field, tmp_path):
    path = tmp_path / "f.fld"
    write_fld1(field, path)
    header = path.read_text().splitlines()[0].split()
    assert header[0] == "FLD1"
    assert [int(v) for v in header[1:4]] == [5, 6, 7]


def test_csv_row_count(field, tmp_path):
    path = tmp_path / "f.csv"
    export_field(field, "csv", path)
    lines = path.read_text().splitlines()
    assert len(lines) == field.grid.size + 1
    assert lines[0] == "x,y,z,value"


def test_csv_order_x_fastest(field, tmp_path):
    path = tmp_path / "f.csv"
    export_field(field, "csv", path)
    lines = path.read_text().splitlines()
    first = lines[1].split(",")
    second = lines[2].split(",")
    assert float(second[0]) - float(first[0]) == pytest.approx(field.grid.hx)
    assert float(second[1]) == float(first[1])
    assert float(second[3]) == pytest.approx(field.values[1, 0, 0])


def test_vtk_header(field, tmp_path):
    path = tmp_path / "f.vtk"
    export_field(field, "vtk", path)
    text = path.read_text().splitlines()
    assert text[0].startswith("# vtk DataFile")
    assert "DATASET STRUCTURED_POINTS" in text
    assert f"POINT_DATA {field.grid.size}" in text


def test_unknown_format(field, tmp_path):
    with pytest.raises(FieldIOError):
        export_field(field, "hdf5", tmp_path / "f.h5")


def test_write_io_error(field):
    with pytest.raises(FieldIOError):
        write_fld1(field, "/nonexistent-dir/f.fld")


def test_front_csv_and_fld1(tmp_path):
    grid = Grid3D(6, 6, 5, -1.0, 2.0, -1.0, 2.0, 1.0)
    rng = np.random.default_rng(5)
    surf = FrontSurface(grid, 0.4 + 0.05 * rng.random((6, 6)), time=0.125)
    csv = tmp_path / "front.csv"
    write_front_csv(surf, csv)
    assert len(csv.read_text().splitlines()) == 37
    fld = tmp_path / "front.fld"
    write_front_fld1(surf, fld)
    assert fld.read_text().splitlines()[0].split()[3] == "1"
    back = read_front_fld1(fld)
    assert np.array_equal(back.h, surf.h)
    assert back.time == surf.time
    with pytest.raises(FieldIOError):
        read_fld1(fld)
