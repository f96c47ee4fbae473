import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlcl.errors import GridMismatch, NegativeDatum, UnboundedDatum, ValidationError
from nlcl.grid import Datum, Field, Grid, l1_dist, linf, project, read_field_csv, tv, write_field_csv


def test_grid_geometry():
    g = Grid(-2.0, 5.0, 2800)
    assert g.dx == pytest.approx(0.0025, rel=1e-15)
    assert g.edges.size == 2801 and g.edges[0] == -2.0
    assert g.centers[0] == pytest.approx(-2.0 + 0.00125)


@pytest.mark.parametrize("args", [(1.0, 0.0, 10), (0.0, 1.0, 1), (0.0, 1.0, 2.5)])
def test_grid_rejects_bad_input(args):
    with pytest.raises(ValidationError):
        Grid(*args)


def test_project_box_straddling_cells():
    g = Grid(0.0, 1.0, 4)
    q = project(Datum.boxes((0.1, 0.6, 2.0)), g)
    # cell widths 1/4: overlaps 0.15, 0.25, 0.1, 0
    assert np.allclose(q.values, [2 * 0.6, 2.0, 2 * 0.4, 0.0], rtol=0, atol=1e-15)
    assert q.left_ext == 0.0 and q.right_ext == 0.0


def test_project_full_cells_are_exact():
    g = Grid(-2.0, 5.0, 2800)
    q = project(Datum.boxes((-1.0, -0.5, 1.0), (1.0, 1.5, 1.0)), g)
    assert linf(q) == 1.0
    assert q.mass() == pytest.approx(1.0, rel=1e-13)


def test_project_riemann_limits():
    q = project(Datum.riemann(0.3, 0.7, 0.0), Grid(-1.0, 1.0, 10))
    assert (q.left_ext, q.right_ext) == (0.3, 0.7)
    assert np.allclose(q.values[:5], 0.3) and np.allclose(q.values[5:], 0.7)


def test_project_callable_piece():
    g = Grid(0.0, 1.0, 5)
    q = project(Datum(((0.0, 1.0, lambda x: x ** 2),)), g)
    e = g.edges
    assert np.allclose(q.values, (e[1:] ** 3 - e[:-1] ** 3) / (3 * g.dx), rtol=1e-14)


def test_project_errors():
    g = Grid(0.0, 1.0, 4)
    with pytest.raises(NegativeDatum):
        project(Datum.boxes((0.0, 0.5, -1.0)), g)
    with pytest.raises(UnboundedDatum):
        project(Datum(((0.0, math.inf, lambda x: x),)), g)
    with pytest.raises(UnboundedDatum):
        project(Datum.boxes((0.0, 0.5, math.inf)), g)
    with pytest.raises(ValidationError):
        project(Datum.boxes((0.5, 0.5, 1.0)), g)


def test_field_is_immutable():
    f = Field(Grid(0.0, 1.0, 3), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        f.values[0] = 5.0
    with pytest.raises(ValidationError):
        Field(Grid(0.0, 1.0, 3), [1.0, 2.0])


def test_tv_counts_extension_jumps():
    f = Field(Grid(0.0, 1.0, 3), [1.0, 0.0, 1.0], left_ext=0.0, right_ext=0.0)
    assert tv(f) == 4.0


def test_l1_dist_and_mismatch():
    g = Grid(0.0, 1.0, 4)
    a = Field(g, [1.0, 1.0, 0.0, 0.0])
    b = Field(g, [0.0, 1.0, 0.0, 0.5])
    assert l1_dist(a, b) == pytest.approx(0.375)
    with pytest.raises(GridMismatch):
        l1_dist(a, Field(Grid(0.0, 2.0, 4), b.values))


def test_csv_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    g = Grid(-2.0, 5.0, 300)
    f = Field(g, rng.random(300) * 1e-3 + rng.random(300))
    p = tmp_path / "snap.csv"
    write_field_csv(p, f)
    back = read_field_csv(p, left_ext=0.0, right_ext=0.0)
    assert np.array_equal(back.values, f.values)
    assert back.grid.same_as(g)
    assert p.read_text().splitlines()[0] == "x,q"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(0.01, 2), st.floats(0, 5)), min_size=1, max_size=5))
def test_projection_preserves_mass(boxes):
    g = Grid(-4.0, 6.0, 500)
    datum = Datum.boxes(*[(a, a + w, v) for a, w, v in boxes])
    q = project(datum, g)
    exact = sum(w * v for _, w, v in boxes)
    assert q.mass() == pytest.approx(exact, rel=1e-12, abs=1e-14)
    assert np.min(q.values) >= 0.0
