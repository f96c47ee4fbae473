import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nlcl import kernel as K
from nlcl.errors import DegenerateRatio, GridMismatch, TrajectoryTooShort, ValidationError
from nlcl.grid import Datum, Field, Grid, project
from nlcl.nonlocal_op import (
    SurrogateParams,
    exp_nonlocal,
    nonlocal_term,
    reconstruct_from_exp,
    surrogate_pde_residual,
)
from nlcl.nonlocal_solver import Trajectory, VelocityModel


def test_canonical_nu():
    assert SurrogateParams.canonical(K.preset("fig3_piecewise"), 0.25).nu == 0.125
    assert SurrogateParams.canonical(K.preset("exp"), 0.25).nu == 0.25
    with pytest.raises(ValidationError):
        SurrogateParams(nu=0.0, eta=0.1)


def test_constant_field_gives_constant_averages():
    g = Grid(0.0, 4.0, 400)
    q = Field(g, np.full(400, 0.7), 0.7, 0.7)
    k = K.discretize(K.preset("fig3_piecewise"), 0.25, g.dx)
    assert np.allclose(nonlocal_term(q, k).values, 0.7, rtol=0, atol=1e-14)
    assert np.allclose(exp_nonlocal(q, SurrogateParams(0.1, 0.25)).values, 0.7, rtol=0, atol=1e-14)


def test_step_datum_closed_form():
    # q = 1 on x < 0: W(x) = 1 - exp(x/eta) left of 0, 0 right of it (left-edge values)
    eta = 0.1
    g = Grid(-1.0, 1.0, 200)
    q = project(Datum.boxes((-2.0, 0.0, 1.0)), g)
    x = g.edges[:-1]
    expect = np.where(x < 0, 1.0 - np.exp(np.minimum(x, 0) / eta), 0.0)
    W = nonlocal_term(q, K.discretize(K.preset("exp"), eta, g.dx)).values
    E = exp_nonlocal(q, SurrogateParams(eta, eta)).values
    assert np.max(np.abs(W - expect)) <= 1e-11
    assert np.max(np.abs(E - expect)) <= 1e-13


def test_right_extension_feeds_the_lookahead():
    g = Grid(0.0, 1.0, 10)
    q = Field(g, np.zeros(10), 0.0, 1.0)
    E = exp_nonlocal(q, SurrogateParams(0.1, 0.1)).values
    x = g.edges[:-1]
    assert np.allclose(E, np.exp((x - 1.0) / 0.1), rtol=1e-13)


def test_kernel_grid_mismatch():
    g = Grid(0.0, 1.0, 10)
    q = Field(g, np.zeros(10))
    with pytest.raises(GridMismatch):
        nonlocal_term(q, K.discretize(K.preset("exp"), 0.25, 0.05))


def test_reconstruction_degenerate_ratio():
    g = Grid(0.0, 1e-14, 10)
    q = Field(g, np.ones(10))
    p = SurrogateParams(1.0, 0.5)
    with pytest.raises(DegenerateRatio):
        reconstruct_from_exp(exp_nonlocal(q, p), p)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 64, elements=st.floats(0, 10)), st.floats(0.001, 5.0), st.floats(0, 3))
def test_reconstruction_inverts_surrogate(values, nu, right):
    g = Grid(0.0, 1.0, 64)
    q = Field(g, values, 0.0, right)
    p = SurrogateParams(nu, 0.1)
    back = reconstruct_from_exp(exp_nonlocal(q, p), p)
    scale = max(1.0, float(np.max(values)), right)
    r = np.exp(-g.dx / nu)
    assert np.max(np.abs(back.values - values)) <= 1e-14 * scale / (1 - r) + 1e-300


def _traj(grid, values_seq, dt, right=0.0):
    return Trajectory(grid, np.arange(len(values_seq)) * dt, np.stack(values_seq), 0.0, right)


def test_surrogate_residual_vanishes_for_constant_state():
    g = Grid(0.0, 3.0, 300)
    c = np.full(300, 0.4)
    spec = K.preset("fig3_piecewise")
    k = K.discretize(spec, 0.25, g.dx)
    res = surrogate_pde_residual(_traj(g, [c, c, c], 0.001, right=0.4), k,
                                 SurrogateParams.canonical(spec, 0.25), VelocityModel.lwr())
    assert res.shape == (2,)
    assert np.max(res) <= 1e-12


def test_surrogate_residual_needs_two_levels():
    g = Grid(0.0, 1.0, 10)
    spec = K.preset("exp")
    with pytest.raises(TrajectoryTooShort):
        surrogate_pde_residual(_traj(g, [np.zeros(10)], 0.1), K.discretize(spec, 0.5, g.dx),
                               SurrogateParams.canonical(spec, 0.5), VelocityModel.lwr())
