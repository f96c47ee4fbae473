import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlcl import kernel as K
from nlcl.errors import (
    BoundaryContamination,
    InvalidVelocity,
    PositivityLoss,
    ValidationError,
    VelocityRangeExceeded,
)
from nlcl.grid import Datum, Field, Grid, l1_dist, project
from nlcl.nonlocal_op import nonlocal_values
from nlcl.nonlocal_solver import (
    NonlocalRunConfig,
    VelocityModel,
    cfl_dt,
    fluxes,
    linear_velocity,
    run,
    step,
)

FIG3 = K.preset("fig3_piecewise")
LWR = VelocityModel.lwr()


def config(datum, grid, eta=0.25, t_end=0.5, **kw):
    return NonlocalRunConfig(grid=grid, datum=datum, kernel=FIG3, eta=eta, velocity=LWR, t_end=t_end, **kw)


def test_velocity_model_checks():
    with pytest.raises(InvalidVelocity):
        VelocityModel(V=lambda w: 1.0 + np.asarray(w), dV=lambda w: np.ones(np.shape(w)),
                      admissible_range=(0.0, 1.0), lipschitz=1.0)
    # s exp(-s) is convex beyond s = 2
    with pytest.raises(InvalidVelocity):
        VelocityModel(V=lambda w: np.exp(-np.asarray(w)), dV=lambda w: -np.exp(-np.asarray(w)),
                      admissible_range=(0.0, 3.0), lipschitz=1.0)
    assert LWR.v_prime_sup(0.0, 2.0) == 1.0
    assert linear_velocity(2.0, 4.0).v_prime_sup(0.0, 1.0) == 0.5


def test_cfl_dt_examples():
    g = Grid(0.0, 1.0, 100)
    q = Field(g, np.zeros(100))
    assert cfl_dt(q, np.linspace(0.0, 1.0, 100), LWR, 0.5) == pytest.approx(0.005)
    # jammed state: V = 0 everywhere, dt hits the floor and nothing moves
    jam = Field(g, np.ones(100), 1.0, 1.0)
    dt = cfl_dt(jam, np.ones(100), LWR, 0.5)
    assert dt == pytest.approx(0.5 * 0.01 / 1e-12)
    assert np.all(fluxes(jam, np.ones(100), LWR) == 0.0)
    narrow = VelocityModel(V=LWR.V, dV=LWR.dV, admissible_range=(0.0, 1.0), lipschitz=1.0)
    with pytest.raises(VelocityRangeExceeded):
        cfl_dt(q, np.full(100, 1.2), narrow, 0.5)


def test_negative_velocity_is_an_error():
    g = Grid(0.0, 1.0, 10)
    q = Field(g, np.zeros(10))
    with pytest.raises(VelocityRangeExceeded):
        cfl_dt(q, np.full(10, 1.2), LWR, 0.5)


def test_step_matches_hand_computation():
    g = Grid(0.0, 1.0, 4)
    k = K.discretize(K.preset("exp"), 0.5, g.dx)
    q = Field(g, [0.2, 0.5, 0.1, 0.0], 0.3, 0.0)
    w = nonlocal_values(q, k)
    v = 1.0 - np.append(w, 0.0)
    F = np.array([0.3, 0.2, 0.5, 0.1, 0.0]) * v
    dt = 0.05
    expect = q.values - dt / g.dx * np.diff(F)
    assert np.allclose(step(q, k, LWR, dt).values, expect, rtol=0, atol=1e-15)


def test_constant_state_preserved():
    g = Grid(0.0, 5.0, 500)
    res = run(config(Datum.constant(0.6), g, t_end=0.3, snapshot_times=(0.3,)))
    assert np.max(np.abs(res.snapshots[0.3].values - 0.6)) <= 1e-13


def test_zero_datum_stays_zero():
    g = Grid(0.0, 5.0, 100)
    res = run(config(Datum.boxes(), g, t_end=0.2, snapshot_times=(0.2,)))
    assert np.all(res.snapshots[0.2].values == 0.0)


def test_mass_balance_each_step():
    g = Grid(-1.0, 2.0, 300)
    k = K.discretize(FIG3, 0.25, g.dx)
    q = project(Datum(((-np.inf, -0.5, 0.4), (0.0, 0.5, 0.9))), g)
    for _ in range(20):
        w = nonlocal_values(q, k)
        dt = cfl_dt(q, w, LWR, 0.5)
        F = fluxes(q, w, LWR)
        new = step(q, k, LWR, dt, w)
        balance = new.mass() - q.mass() - dt * (F[0] - F[-1])
        assert abs(balance) <= 1e-12 * q.mass()
        q = new


def test_positivity_loss_with_oversized_step():
    g = Grid(0.0, 1.0, 100)
    q = project(Datum.boxes((0.2, 0.4, 1.0)), g)
    k = K.discretize(FIG3, 0.25, g.dx)
    with pytest.raises(PositivityLoss):
        step(q, k, LWR, 5 * g.dx)


def test_snapshot_times_hit_exactly_and_deterministic():
    g = Grid(-1.0, 3.0, 400)
    d = Datum.boxes((0.0, 0.5, 1.0))
    cfg = config(d, g, t_end=0.7, snapshot_times=(0.0, 0.123, 0.7))
    a, b = run(cfg), run(cfg)
    assert sorted(a.snapshots) == [0.0, 0.123, 0.7]
    assert 0.123 in a.diagnostics.t and a.diagnostics.t[-1] == 0.7
    for t in a.snapshots:
        assert np.array_equal(a.snapshots[t].values, b.snapshots[t].values)
    assert a.diagnostics.linf == b.diagnostics.linf


def test_box_translates_and_converges_under_refinement():
    # the box front moves at speed ~V(W) < 1; compare against a 4x finer run
    d = Datum.boxes((0.0, 0.5, 0.5))
    coarse = run(config(d, Grid(-1.0, 3.0, 400), t_end=0.4, snapshot_times=(0.4,))).snapshots[0.4]
    fine = run(config(d, Grid(-1.0, 3.0, 1600), t_end=0.4, snapshot_times=(0.4,))).snapshots[0.4]
    fine_avg = Field(coarse.grid, fine.values.reshape(400, 4).mean(axis=1))
    assert l1_dist(coarse, fine_avg) <= 0.02
    centroid = np.sum(coarse.grid.centers * coarse.values) / np.sum(coarse.values)
    assert 0.25 + 0.1 < centroid < 0.25 + 0.4


def test_diagnostics_series_columns(tmp_path):
    g = Grid(-1.0, 3.0, 200)
    res = run(config(Datum.boxes((0.0, 0.5, 1.0)), g, t_end=0.2, monitor_every=5))
    d = res.diagnostics
    assert len(d.t) == len(d.we_gap) >= 2
    assert np.allclose(d.array("mass"), 0.5, rtol=1e-12)
    d.write_csv(tmp_path / "diag.csv")
    assert (tmp_path / "diag.csv").read_text().splitlines()[0] == "t,linf,tv_q,tv_E,tv_W,mass,we_gap"


def test_record_steps_trajectory():
    g = Grid(-1.0, 3.0, 100)
    res = run(config(Datum.boxes((0.0, 0.5, 1.0)), g, t_end=0.1, record_steps=True))
    tr = res.trajectory
    assert len(tr) == res.n_steps + 1
    assert tr.times[0] == 0.0 and tr.times[-1] == pytest.approx(0.1, abs=1e-15)


def test_boundary_contamination_warning():
    g = Grid(0.0, 1.0, 100)
    with pytest.warns(BoundaryContamination):
        run(config(Datum.boxes((0.7, 1.0, 0.5)), g, t_end=0.3))


def test_config_validation():
    g = Grid(0.0, 1.0, 10)
    with pytest.raises(ValidationError):
        config(Datum.boxes(), g, cfl=1.5)
    with pytest.raises(ValidationError):
        config(Datum.boxes(), g, t_end=1.0, snapshot_times=(0.5, 2.0))
    with pytest.raises(ValidationError):
        config(Datum.boxes(), g, t_end=1.0, snapshot_times=(0.5, 0.2))


@settings(max_examples=20, deadline=None)
@given(st.lists(st.tuples(st.floats(0.0, 0.2), st.floats(0.05, 0.8), st.floats(0.0, 1.0)), min_size=1, max_size=3),
       st.sampled_from([0.5, 0.25, 0.0625]), st.floats(0.1, 1.0))
def test_positivity_and_conservation(boxes, eta, cfl):
    g = Grid(0.0, 5.0, 250)
    # disjoint boxes, one per unit interval, so densities stay in [0, 1]
    datum = Datum.boxes(*[(0.5 + i + a, 0.5 + i + a + w, v) for i, (a, w, v) in enumerate(boxes)])
    with warnings.catch_warnings():
        warnings.simplefilter("error", BoundaryContamination)
        res = run(config(datum, g, eta=eta, t_end=0.5, cfl=cfl, snapshot_times=(0.5,)))
    q = res.snapshots[0.5]
    assert np.min(q.values) >= -1e-13
    mass0 = res.diagnostics.mass[0]
    assert q.mass() == pytest.approx(mass0, rel=1e-12, abs=1e-15)
