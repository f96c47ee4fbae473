"""Explicit upwind finite-volume solver for ``q_t + (V(W[q, gamma_eta]) q)_x = 0``.

The flux through the edge between cells ``i-1`` and ``i`` is
``q_{i-1} * V(W_i)`` with ``W_i`` the nonlocal term at that edge, so the
density is upwinded (velocities are nonnegative) and the velocity looks
downstream.  Time stepping is forward Euler with the velocity frozen over
each step.
"""

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernel as kmod
from .errors import (
    BoundaryContamination,
    InvalidVelocity,
    NonFiniteState,
    PositivityLoss,
    ValidationError,
    VelocityRangeExceeded,
)
from .grid import Datum, Field, Grid, fmt, linf, project, tv
from .nonlocal_op import SurrogateParams, exp_nonlocal, nonlocal_values

POSITIVITY_TOL = 1e-13
BOUNDARY_DRIFT = 1e-6
VELOCITY_ROUNDOFF = 1e-12


@dataclass(frozen=True)
class VelocityModel:
    V: Callable
    dV: Callable
    admissible_range: tuple
    lipschitz: float
    name: str = "custom"

    def __post_init__(self):
        lo, hi = self.admissible_range
        s = np.linspace(lo, hi, 1001)
        if np.any(self.dV(s) > 1e-12):
            raise InvalidVelocity(f"V' > 0 somewhere on [{lo}, {hi}]")
        f = s * self.V(s)
        if np.max(np.diff(f, 2)) > 1e-10:
            raise InvalidVelocity(f"s V(s) is not concave on [{lo}, {hi}]")

    def v_prime_sup(self, lo, hi):
        s = np.linspace(lo, hi, 1001)
        return float(np.max(np.abs(self.dV(s + 0.0))))

    @classmethod
    def lwr(cls):
        return linear_velocity(1.0, 1.0, name="lwr")


def linear_velocity(vmax, qmax, name="linear"):
    """Greenshields velocity ``vmax (1 - w / qmax)``.

    The admissible W-range extends to 1.5 qmax: overshoots above qmax are
    allowed as long as the velocity actually evaluated stays nonnegative.
    """
    vmax, qmax = float(vmax), float(qmax)
    return VelocityModel(V=lambda w: vmax * (1.0 - np.asarray(w) / qmax),
                         dV=lambda w: np.full(np.shape(w), -vmax / qmax),
                         admissible_range=(0.0, 1.5 * qmax), lipschitz=vmax / qmax, name=name)


@dataclass(frozen=True)
class NonlocalRunConfig:
    grid: Grid
    datum: Datum
    kernel: kmod.KernelSpec
    eta: float
    velocity: VelocityModel
    t_end: float
    cfl: float = 0.5
    snapshot_times: Sequence[float] = ()
    monitor_every: int = 1
    record_steps: bool = False
    scaling: str = "power"  # or "spatial"

    def __post_init__(self):
        if not (0.0 < self.cfl <= 1.0):
            raise ValidationError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.t_end > 0:
            raise ValidationError(f"t_end must be positive, got {self.t_end}")
        ts = list(self.snapshot_times)
        if ts != sorted(ts) or any(t < 0 or t > self.t_end for t in ts):
            raise ValidationError(f"snapshot_times must be sorted and inside [0, {self.t_end}]")
        if self.monitor_every < 1:
            raise ValidationError("monitor_every must be a positive step count")
        if self.scaling not in ("power", "spatial"):
            raise ValidationError(f"unknown kernel scaling {self.scaling!r}")


@dataclass
class Trajectory:
    """Stacked states ``values[n]`` at ``times[n]`` on a common grid."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    left_ext: float = 0.0
    right_ext: float = 0.0

    def __len__(self):
        return len(self.times)

    def field(self, n):
        return Field(self.grid, self.values[n], self.left_ext, self.right_ext)

    @classmethod
    def from_fields(cls, times, fields):
        fields = list(fields)
        f0 = fields[0]
        return cls(f0.grid, np.asarray(times, dtype=float), np.stack([f.values for f in fields]),
                   f0.left_ext, f0.right_ext)


@dataclass
class DiagnosticsSeries:
    t: list = field(default_factory=list)
    linf: list = field(default_factory=list)
    tv_q: list = field(default_factory=list)
    tv_E: list = field(default_factory=list)
    tv_W: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    we_gap: list = field(default_factory=list)

    COLUMNS = ("t", "linf", "tv_q", "tv_E", "tv_W", "mass", "we_gap")

    def append(self, **row):
        for name in self.COLUMNS:
            getattr(self, name).append(float(row[name]))

    def array(self, name):
        return np.asarray(getattr(self, name))

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(self.COLUMNS) + "\n")
            for row in zip(*(getattr(self, c) for c in self.COLUMNS)):
                fh.write(",".join(fmt(v) for v in row) + "\n")


@dataclass
class RunResult:
    config: NonlocalRunConfig
    kernel: kmod.DiscreteKernel
    snapshots: dict
    diagnostics: DiagnosticsSeries
    trajectory: Optional[Trajectory] = None
    n_steps: int = 0

    @property
    def initial(self):
        return self.snapshots.get(0.0)


def _edge_velocity(q, w_vals, vm):
    """Velocity at all n+1 edges; the last edge sees only the right extension."""
    w_edges = np.append(w_vals, q.right_ext)
    lo, hi = vm.admissible_range
    if np.min(w_edges) < lo - 1e-12 or np.max(w_edges) > hi + 1e-12:
        raise VelocityRangeExceeded(
            f"W in [{np.min(w_edges):.6g}, {np.max(w_edges):.6g}] leaves admissible range [{lo}, {hi}]")
    v = vm.V(w_edges)
    if np.min(v) < -VELOCITY_ROUNDOFF:
        i = int(np.argmin(v))
        raise VelocityRangeExceeded(f"V(W) = {v[i]:.6g} < 0 at edge {i} (W = {w_edges[i]:.6g})")
    # kernel sums of a jammed state can miss 1 by a few ulps
    return np.maximum(v, 0.0)


def cfl_dt(q, W, vm, cfl):
    """``cfl * dx / max V(W)``, floored so a jammed state gives a huge but finite step."""
    w_vals = W.values if isinstance(W, Field) else np.asarray(W)
    v = _edge_velocity(q, w_vals, vm)
    return cfl * q.grid.dx / max(float(np.max(v)), 1e-12)


def fluxes(q, w_vals, vm):
    """Edge fluxes ``F_e = q~_{e-1} V(W_e)``, e = 0..n, with ``q~_{-1}`` the left extension."""
    v = _edge_velocity(q, w_vals, vm)
    upwind = np.concatenate([[q.left_ext], q.values])
    return upwind * v


def step(q, k, vm, dt, w_vals=None):
    """One forward-Euler upwind step."""
    if w_vals is None:
        w_vals = nonlocal_values(q, k)
    F = fluxes(q, w_vals, vm)
    new = q.values - (dt / q.grid.dx) * np.diff(F)
    if not np.all(np.isfinite(new)):
        raise NonFiniteState("non-finite density after step")
    if np.min(new) < -POSITIVITY_TOL:
        i = int(np.argmin(new))
        raise PositivityLoss(f"q[{i}] = {new[i]:.3e} < 0 after step with dt={dt:.3e}; CFL too large")
    return q.with_values(new)


def build_kernel(config):
    if config.scaling == "power":
        return kmod.discretize(config.kernel, config.eta, config.grid.dx)
    return kmod.spatial_scale_discretize(config.kernel, config.eta, config.grid.dx)


def run(config, kernel=None):
    """March from ``t=0`` to ``t_end``; snapshot times are hit exactly."""
    k = kernel if kernel is not None else build_kernel(config)
    sp = SurrogateParams.canonical(config.kernel, config.eta)
    vm = config.velocity
    q = project(config.datum, config.grid)
    q_init = q
    diag = DiagnosticsSeries()
    snapshots = {}
    targets = sorted(set(config.snapshot_times) | {config.t_end})
    steps_t, steps_q = [], []
    t = 0.0
    n = 0
    ti = 0
    if targets and targets[0] == 0.0:
        ti = 1
    if 0.0 in config.snapshot_times:
        snapshots[0.0] = q
    time_eps = 1e-12 * config.t_end

    def monitor(t, q, w_vals):
        E = exp_nonlocal(q, sp)
        W = Field(q.grid, w_vals, q.left_ext, q.right_ext)
        diag.append(t=t, linf=linf(q), tv_q=tv(q), tv_E=tv(E), tv_W=tv(W), mass=q.mass(),
                    we_gap=float(np.max(np.abs(w_vals - E.values))))

    while True:
        w_vals = nonlocal_values(q, k)
        at_target = ti > 0 and abs(t - targets[ti - 1]) <= time_eps
        if n % config.monitor_every == 0 or at_target or ti >= len(targets):
            monitor(t, q, w_vals)
        if config.record_steps:
            steps_t.append(t)
            steps_q.append(q.values)
        if ti >= len(targets):
            break
        dt = cfl_dt(q, w_vals, vm, config.cfl)
        target = targets[ti]
        if t + dt >= target - time_eps:
            dt = target - t
            t_new = target
            ti += 1
        else:
            t_new = t + dt
        q = step(q, k, vm, dt, w_vals)
        t = t_new
        n += 1
        if ti > 0 and t == targets[ti - 1] and t in config.snapshot_times:
            snapshots[t] = q

    drift = max(abs(q.values[0] - q_init.values[0]), abs(q.values[-1] - q_init.values[-1]))
    if drift > BOUNDARY_DRIFT:
        warnings.warn(f"boundary cells drifted by {drift:.3e}; the domain may be too small",
                      BoundaryContamination, stacklevel=2)
    traj = None
    if config.record_steps:
        traj = Trajectory(config.grid, np.asarray(steps_t), np.stack(steps_q), q.left_ext, q.right_ext)
    return RunResult(config=config, kernel=k, snapshots=snapshots, diagnostics=diag,
                     trajectory=traj, n_steps=n)
