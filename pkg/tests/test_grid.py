import numpy as np
import pytest

from rdafront.errors import (
    CoreError,
    DegenerateReferenceError,
    OutOfDomainError,
)
from rdafront.grid import (
    Grid3D,
    ScalarField3D,
    relative_l2_error,
    trilinear_sample,
    wrap_periodic,
    z_trapezoid_weights,
)


def test_wrap_periodic_examples():
    assert wrap_periodic(2.5, -1, 2) == pytest.approx(0.5)
    assert wrap_periodic(-1, -1, 2) == pytest.approx(-1.0)
    assert wrap_periodic(-3, -1, 2) == pytest.approx(-1.0)


def test_wrap_periodic_idempotent():
    rng = np.random.default_rng(0)
    xs = rng.uniform(-50, 50, size=500)
    once = wrap_periodic(xs, -1.0, 2.0)
    twice = wrap_periodic(once, -1.0, 2.0)
    assert np.array_equal(once, twice)
    assert np.all(once >= -1.0) and np.all(once < 1.0)


def test_wrap_periodic_rejects_bad_period():
    with pytest.raises(CoreError):
        wrap_periodic(1.0, 0.0, 0.0)
    with pytest.raises(CoreError):
        wrap_periodic(1.0, 0.0, -2.0)


@pytest.fixture
def grid():
    return Grid3D(8, 10, 9, -1.0, 2.0, -1.0, 2.0, 1.0)


def test_grid_spacing(grid):
    assert grid.hx == pytest.approx(0.25)
    assert grid.hy == pytest.approx(0.2)
    assert grid.hz == pytest.approx(0.125)
    assert grid.zs[0] == 0.0 and grid.zs[-1] == 1.0
    # periodic axes carry no duplicated seam sample
    assert grid.xs[-1] == pytest.approx(1.0 - grid.hx)


def test_grid_validation():
    with pytest.raises(CoreError):
        Grid3D(8, 8, 1, 0, 1, 0, 1, 1)
    with pytest.raises(CoreError):
        Grid3D(8, 8, 9, 0, -1, 0, 1, 1)


def test_field_shape_and_flat_order(grid):
    f = ScalarField3D.from_function(grid, lambda x, y, z: x + 10 * y
                                    + 100 * z)
    flat = f.flat()
    # x fastest, then y, then z
    assert flat[1] - flat[0] == pytest.approx(grid.hx)
    assert flat[grid.nx] - flat[0] == pytest.approx(10 * grid.hy)
    assert flat[grid.nx * grid.ny] - flat[0] == pytest.approx(100 * grid.hz)


def test_field_rejects_bad_values(grid):
    with pytest.raises(CoreError):
        ScalarField3D(grid, np.zeros((3, 3, 3)))
    bad = np.zeros((grid.nx, grid.ny, grid.nz))
    bad[0, 0, 0] = np.nan
    with pytest.raises(CoreError):
        ScalarField3D(grid, bad)


def test_field_immutable(grid):
    f = ScalarField3D.constant(grid, 1.0)
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 2.0


def test_trilinear_constants_and_linear(grid):
    c = ScalarField3D.constant(grid, 3.25)
    assert trilinear_sample(c, 0.123, -0.456, 0.789) == pytest.approx(3.25)
    fz = ScalarField3D.from_function(grid, lambda x, y, z: z)
    assert trilinear_sample(fz, 0.0, 0.0, 0.25) == pytest.approx(0.25)


def test_trilinear_periodic_seam(grid):
    f = ScalarField3D.from_function(grid, lambda x, y, z: np.sin(np.pi * x))
    a = trilinear_sample(f, grid.x0 + grid.length_x, 0.3, 0.5)
    b = trilinear_sample(f, grid.x0, 0.3, 0.5)
    assert a == pytest.approx(b, abs=1e-15)


def test_trilinear_exact_at_nodes(grid):
    rng = np.random.default_rng(1)
    f = ScalarField3D(grid, rng.standard_normal((grid.nx, grid.ny, grid.nz)))
    for i, j, k in [(0, 0, 0), (3, 7, 4), (7, 9, 8)]:
        v = trilinear_sample(f, grid.xs[i], grid.ys[j], grid.zs[k])
        assert v == pytest.approx(f.values[i, j, k], rel=0, abs=1e-14)


def test_trilinear_out_of_domain(grid):
    f = ScalarField3D.constant(grid, 1.0)
    with pytest.raises(OutOfDomainError):
        trilinear_sample(f, 0.0, 0.0, 1.5)
    with pytest.raises(OutOfDomainError):
        trilinear_sample(f, 0.0, 0.0, -0.2)


def test_relative_l2_error_examples(grid):
    rng = np.random.default_rng(2)
    f = ScalarField3D(grid, 1.0 + rng.random((grid.nx, grid.ny, grid.nz)))
    assert relative_l2_error(f, f) == 0.0
    f2 = ScalarField3D(grid, 2.0 * f.values)
    assert relative_l2_error(f2, f) == pytest.approx(1.0)


def test_relative_l2_scaling_invariance(grid):
    rng = np.random.default_rng(3)
    a = ScalarField3D(grid, 1.0 + rng.random((grid.nx, grid.ny, grid.nz)))
    b = ScalarField3D(grid, 2.0 + rng.random((grid.nx, grid.ny, grid.nz)))
    base = relative_l2_error(a, b)
    scaled = relative_l2_error(ScalarField3D(grid, 7.5 * a.values),
                               ScalarField3D(grid, 7.5 * b.values))
    assert scaled == pytest.approx(base, rel=1e-13)


def test_relative_l2_zero_reference(grid):
    f = ScalarField3D.constant(grid, 1.0)
    zero = ScalarField3D.constant(grid, 0.0)
    with pytest.raises(DegenerateReferenceError):
        relative_l2_error(f, zero)


def test_z_weights_trapezoid(grid):
    w = z_trapezoid_weights(grid)
    assert w[0] == pytest.approx(0.5 * grid.hx * grid.hy * grid.hz)
    assert w[1] == pytest.approx(grid.hx * grid.hy * grid.hz)
    # integral of 1 over the box

    total = w.sum() * grid.nx * grid.ny
    assert total == pytest.approx(grid.length_x * grid.length_y * grid.depth)
