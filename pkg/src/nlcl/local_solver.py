"""Godunov scheme for the local law ``q_t + f(q)_x = 0`` with concave ``f``,
plus the closed-form LWR Riemann solution used as a validation oracle."""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    InvalidVelocity,
    NonFiniteState,
    OutOfRangeState,
    PositivityLoss,
    UnsupportedFlux,
    ValidationError,
)
from .grid import Field, Grid, project, tv
from .nonlocal_solver import POSITIVITY_TOL, Trajectory

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
RANGE_TOL = 1e-12


@dataclass(frozen=True)
class FluxModel:
    f: Callable
    df: Callable
    state_range: tuple = (0.0, 1.0)
    sonic_point: Optional[float] = None
    name: str = "custom"

    def __post_init__(self):
        lo, hi = self.state_range
        if not lo < hi:
            raise ValidationError(f"state range [{lo}, {hi}] is empty")
        if abs(float(self.f(np.array([0.0]))[0])) > 1e-14:
            raise InvalidVelocity("flux must vanish at q = 0")
        s = np.linspace(lo, hi, 1001)
        if np.max(np.diff(self.f(s), 2)) >= 0:
            raise InvalidVelocity("flux is not strictly concave on the state range")
        if self.sonic_point is None:
            res = minimize_scalar(lambda x: -float(self.f(np.array([x]))[0]), bounds=(lo, hi),
                                  method="bounded", options={"xatol": 1e-12})
            object.__setattr__(self, "sonic_point", float(res.x))

    @property
    def max_speed(self):
        lo, hi = self.state_range
        s = np.linspace(lo, hi, 1001)
        return float(np.max(np.abs(self.df(s))))

    @classmethod
    def lwr(cls):
        return cls(f=lambda q: np.asarray(q) * (1.0 - np.asarray(q)),
                   df=lambda q: 1.0 - 2.0 * np.asarray(q),
                   state_range=(0.0, 1.0), sonic_point=0.5, name="lwr")

    @classmethod
    def from_velocity(cls, vm, state_range=(0.0, 1.0)):
        if vm.name == "lwr" and tuple(state_range) == (0.0, 1.0):
            return cls.lwr()
        return cls(f=lambda q: np.asarray(q) * vm.V(q),
                   df=lambda q: vm.V(q) + np.asarray(q) * vm.dV(q),
                   state_range=tuple(state_range), name=vm.name)


def _check_range(fm, *arrays):
    lo, hi = fm.state_range
    for a in arrays:
        a = np.asarray(a)
        if a.size and (np.min(a) < lo - RANGE_TOL or np.max(a) > hi + RANGE_TOL):
            raise OutOfRangeState(
                f"state in [{np.min(a):.6g}, {np.max(a):.6g}] outside flux range [{lo}, {hi}]")


def godunov_flux(ql, qr, fm):
    """Exact Riemann flux at ``x/t = 0`` for concave ``f`` (vectorized)."""
    _check_range(fm, ql, qr)
    ql = np.asarray(ql, dtype=float)
    qr = np.asarray(qr, dtype=float)
    spread = fm.f(np.clip(fm.sonic_point, qr, ql))
    out = np.where(ql >= qr, spread, np.minimum(fm.f(ql), fm.f(qr)))
    return out[()] if out.ndim == 0 else out


def step_local(q, fm, dt):
    padded = np.concatenate([[q.left_ext], q.values, [q.right_ext]])
    F = godunov_flux(padded[:-1], padded[1:], fm)
    new = q.values - (dt / q.grid.dx) * np.diff(F)
    if not np.all(np.isfinite(new)):
        raise NonFiniteState("non-finite density after local step")
    if np.min(new) < -POSITIVITY_TOL:
        raise PositivityLoss(f"local step produced q = {np.min(new):.3e}; CFL too large")
    return q.with_values(new)


@dataclass(frozen=True)
class LocalRunConfig:
    grid: Grid
    datum: object
    flux: FluxModel
    t_end: float
    cfl: float = 0.5
    snapshot_times: Sequence[float] = ()
    record_steps: bool = False

    def __post_init__(self):
        if not (0.0 < self.cfl <= 1.0):
            raise ValidationError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.t_end > 0:
            raise ValidationError(f"t_end must be positive, got {self.t_end}")
        ts = list(self.snapshot_times)
        if ts != sorted(ts) or any(t < 0 or t > self.t_end for t in ts):
            raise ValidationError(f"snapshot_times must be sorted and inside [0, {self.t_end}]")


@dataclass
class LocalRunResult:
    config: LocalRunConfig
    snapshots: dict
    tv_history: np.ndarray
    trajectory: Optional[Trajectory]
    n_steps: int
    dt: float


def run_local(config):
    """Fixed-dt Godunov run; the last step before each snapshot is shortened."""
    fm = config.flux
    q = project(config.datum, config.grid)
    _check_range(fm, q.values, [q.left_ext, q.right_ext])
    dt_max = config.cfl * config.grid.dx / max(fm.max_speed, 1e-12)
    targets = sorted(set(config.snapshot_times) | {config.t_end})
    snaps = {0.0: q} if 0.0 in config.snapshot_times else {}
    times, states, tvs = [0.0], [q.values], [tv(q)]
    t = 0.0
    n = 0
    eps = 1e-12 * config.t_end
    for target in targets:
        while t < target - eps:
            dt = min(dt_max, target - t)
            if target - (t + dt) <= eps:
                dt = target - t
                t_new = target
            else:
                t_new = t + dt
            q = step_local(q, fm, dt)
            t = t_new
            n += 1
            tvs.append(tv(q))
            if config.record_steps:
                times.append(t)
                states.append(q.values)
        if target in config.snapshot_times:
            snaps[target] = q
    traj = None
    if config.record_steps:
        traj = Trajectory(config.grid, np.asarray(times), np.stack(states), q.left_ext, q.right_ext)
    return LocalRunResult(config, snaps, np.asarray(tvs), traj, n, dt_max)


def _is_lwr(fm):
    s = np.linspace(fm.state_range[0], fm.state_range[1], 17)
    return fm.name == "lwr" or np.allclose(fm.f(s), s * (1 - s), rtol=0, atol=1e-14)


@dataclass(frozen=True)
class RiemannSolution:
    """Entropy solution of the LWR Riemann problem as a function of ``(x - x0)/t``."""

    ql: float
    qr: float
    x0: float = 0.0

    @property
    def is_shock(self):
        return self.ql < self.qr

    @property
    def shock_speed(self):
        return 1.0 - self.ql - self.qr

    def of_ratio(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.ql == self.qr:
            return np.full(xi.shape, self.ql)
        if self.is_shock:
            return np.where(xi < self.shock_speed, self.ql, self.qr)
        return np.clip(0.5 * (1.0 - xi), self.qr, self.ql)

    def __call__(self, x, t):
        if not t > 0:
            raise ValidationError("the Riemann solution is evaluated at t > 0")
        return self.of_ratio((np.asarray(x, dtype=float) - self.x0) / t)

    def kinks(self, t):
        """Positions where the solution is not smooth at time t."""
        if self.ql == self.qr:
            return []
        if self.is_shock:
            return [self.x0 + self.shock_speed * t]
        # fan edges where (1 - xi)/2 hits ql and qr
        return sorted([self.x0 + (1.0 - 2.0 * self.ql) * t, self.x0 + (1.0 - 2.0 * self.qr) * t])

    def cell_averages(self, grid, t):
        """Exact cell averages (piecewise-linear integrand, split at the kinks)."""
        edges = grid.edges
        cuts = np.unique(np.concatenate([edges, [k for k in self.kinks(t) if edges[0] < k < edges[-1]]]))
        lo, hi = cuts[:-1], cuts[1:]
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        xq = mid[:, None] + half[:, None] * _GL_X[None, :]
        part = half * (self(xq, t) @ _GL_W)
        cell = np.searchsorted(edges, mid, side="right") - 1
        out = np.zeros(grid.n_cells)
        np.add.at(out, cell, part)
        return Field(grid, out / grid.dx, self.ql, self.qr)


def riemann_exact(ql, qr, fm, x0=0.0):
    if not _is_lwr(fm):
        raise UnsupportedFlux(f"exact Riemann oracle only covers f = q(1-q), got {fm.name!r}")
    _check_range(fm, [ql, qr])
    return RiemannSolution(float(ql), float(qr), float(x0))
