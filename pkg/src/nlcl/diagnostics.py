"""Entropy residuals, W-E gaps, maximum-principle constants and eta-convergence tables."""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernel as kmod
from .errors import GridMismatch, MissingSnapshot, SupportNotCovered, ValidationError
from .grid import fmt, l1_dist
from .nonlocal_op import exp_nonlocal, nonlocal_term

_GL16_X, _GL16_W = np.polynomial.legendre.leggauss(16)
_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)
_GL4_X, _GL4_W = np.polynomial.legendre.leggauss(4)

ENTROPY_CENTERS = tuple(round(0.1 * j, 1) for j in range(1, 10))
ENTROPY_TOL_C = 2.0


# -- entropy pairs and test functions -----------------------------------------

@dataclass(frozen=True)
class EntropyPair:
    """Quadratic entropy ``alpha = (q-k)^2`` with flux ``beta' = alpha' f'``, ``beta(0) = 0``.

    With ``df=None`` the flux is LWR, ``f = q - q^2``, and beta is closed form.
    """

    k: float
    df: Optional[Callable] = None

    def alpha(self, q):
        return (np.asarray(q) - self.k) ** 2

    def dalpha(self, q):
        return 2.0 * (np.asarray(q) - self.k)

    def beta(self, q):
        q = np.asarray(q, dtype=float)
        if self.df is None:
            k = self.k
            return q * q * (-(4.0 / 3.0) * q + (1.0 + 2.0 * k)) - 2.0 * k * q
        # 16-point Gauss on [0, q]: exact for polynomial fluxes up to degree 30
        s = 0.5 * q[..., None] * (1.0 + _GL16_X)
        vals = self.dalpha(s) * self.df(s)
        return 0.5 * q * (vals @ _GL16_W)


def bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    m = np.abs(s) < 1.0
    out[m] = np.exp(1.0 - 1.0 / (1.0 - s[m] ** 2))
    return out


def dbump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    m = np.abs(s) < 1.0
    sm = s[m]
    out[m] = np.exp(1.0 - 1.0 / (1.0 - sm ** 2)) * (-2.0 * sm / (1.0 - sm ** 2) ** 2)
    return out


@dataclass(frozen=True)
class TestFunction:
    """Separable bump ``phi = B((t-t0)/rt) B((x-x0)/rx)``."""

    __test__ = False  # not a pytest class

    t0: float
    x0: float
    rt: float
    rx: float

    def __post_init__(self):
        if not (self.rt > 0 and self.rx > 0):
            raise ValidationError("test function radii must be positive")

    def time_factor(self, t):
        return bump((np.asarray(t) - self.t0) / self.rt)

    def space_factor(self, x):
        return bump((np.asarray(x) - self.x0) / self.rx)

    def __call__(self, t, x):
        return self.time_factor(t) * self.space_factor(x)

    def dt(self, t, x):
        return dbump((np.asarray(t) - self.t0) / self.rt) / self.rt * self.space_factor(x)

    def dx(self, t, x):
        return self.time_factor(t) * dbump((np.asarray(x) - self.x0) / self.rx) / self.rx


def test_bank(t_end, x_lo, x_hi, shock=None):
    """Twelve bumps tiling ``[0, t_end] x [x_lo, x_hi]`` plus three riding a known jump.

    ``shock = (x0, speed)`` places extra bumps centred on ``x0 + speed*t``.
    Space radii are a quarter of the window, so supports reach ``L/8``
    beyond it on either side.
    """
    L = x_hi - x_lo
    rt = t_end / 4.0
    times = (t_end / 4.0, t_end / 2.0, 3.0 * t_end / 4.0)
    bank = [TestFunction(tc, x_lo + (j + 0.5) * L / 4.0, rt, L / 4.0) for tc in times for j in range(4)]
    if shock is not None:
        x0, speed = shock
        bank += [TestFunction(tc, x0 + speed * tc, rt, L / 8.0) for tc in times]
    return bank


test_bank.__test__ = False


def entropy_tol(dx, dt, c=ENTROPY_TOL_C):
    return c * (dx + dt)


def _space_weights(phi, edges, lo, hi):
    """Exact-in-x weights for the cell range [lo, hi): integral of B_x over each cell
    and the increments of B_x across it."""
    a, b = edges[lo:hi], edges[lo + 1:hi + 1]
    half = 0.5 * (b - a)
    xq = 0.5 * (a + b)[:, None] + half[:, None] * _GL8_X[None, :]
    cell_int = half * (phi.space_factor(xq) @ _GL8_W)
    jumps = phi.space_factor(b) - phi.space_factor(a)
    return cell_int, jumps


def entropy_residual(trajectory, pair, phi):
    """Discrete entropy functional for the piecewise-constant-in-time field.

    State ``q^n`` is held on ``[t_n, t_{n+1})``.  Time derivatives of phi
    integrate exactly over each step and space derivatives exactly over
    each cell, so the result is linear in phi and vanishes for constant
    states.  ``phi`` may also be a sequence of test functions (summed).
    """
    if not isinstance(phi, TestFunction):
        return float(sum(entropy_residual(trajectory, pair, p) for p in phi))
    times = np.asarray(trajectory.times, dtype=float)
    grid = trajectory.grid
    if len(times) < 2:
        raise SupportNotCovered("trajectory needs at least two time levels")
    if phi.t0 + phi.rt > times[-1] + 1e-12 * max(1.0, times[-1]):
        raise SupportNotCovered(
            f"test function support ends at t={phi.t0 + phi.rt:.6g} after trajectory end {times[-1]:.6g}")
    if phi.x0 - phi.rx < grid.x_min - 1e-12 or phi.x0 + phi.rx > grid.x_max + 1e-12:
        raise SupportNotCovered(
            f"test function support [{phi.x0 - phi.rx:.6g}, {phi.x0 + phi.rx:.6g}] leaves the grid")
    edges = grid.edges
    lo = max(int(np.searchsorted(edges, phi.x0 - phi.rx, side="right")) - 1, 0)
    hi = min(int(np.searchsorted(edges, phi.x0 + phi.rx, side="left")), grid.n_cells)
    cell_int, jumps = _space_weights(phi, edges, lo, hi)

    at = phi.time_factor(times)
    t_lo, t_hi = times[:-1], times[1:]
    half = 0.5 * (t_hi - t_lo)
    tq = 0.5 * (t_lo + t_hi)[:, None] + half[:, None] * _GL4_X[None, :]
    at_int = half * (phi.time_factor(tq) @ _GL4_W)
    active = np.nonzero((np.diff(at) != 0) | (at_int != 0))[0]

    Q = trajectory.values[active, lo:hi]
    alpha_part = (pair.alpha(Q) @ cell_int) * (at[active + 1] - at[active])
    beta_part = (pair.beta(Q) @ jumps) * at_int[active]
    initial = at[0] * float(pair.alpha(trajectory.values[0, lo:hi]) @ cell_int)
    return float(np.sum(alpha_part) + np.sum(beta_part) + initial)


@dataclass(frozen=True)
class EntropyAudit:
    residuals: np.ndarray  # shape (n_pairs, n_tests)
    ks: tuple
    tol: float

    @property
    def min_residual(self):
        return float(np.min(self.residuals))

    @property
    def passed(self):
        return self.min_residual >= -self.tol


def entropy_audit(trajectory, bank, ks=ENTROPY_CENTERS, tol=None, df=None):
    if tol is None:
        dt = float(np.max(np.diff(trajectory.times)))
        tol = entropy_tol(trajectory.grid.dx, dt)
    res = np.array([[entropy_residual(trajectory, EntropyPair(k, df), phi) for phi in bank] for k in ks])
    return EntropyAudit(res, tuple(ks), tol)


def frozen_jump_trajectory(grid, ql, qr, x0, t_end, n_steps):
    """A discontinuity held fixed in time, whether or not it is admissible."""
    from .grid import Datum, project
    from .nonlocal_solver import Trajectory
    q = project(Datum.riemann(ql, qr, x0), grid)
    times = np.linspace(0.0, t_end, n_steps + 1)
    return Trajectory(grid, times, np.tile(q.values, (n_steps + 1, 1)), q.left_ext, q.right_ext)


# -- nonlocal monitors --------------------------------------------------------

def we_gap(q, k, p):
    """``max_i |W_i - E_i|`` between the kernel average and its exponential surrogate."""
    if not math.isclose(k.dx, q.grid.dx, rel_tol=1e-12):
        raise GridMismatch(f"kernel built for dx={k.dx}, field has dx={q.grid.dx}")
    return float(np.max(np.abs(nonlocal_term(q, k).values - exp_nonlocal(q, p).values)))


def we_gap_bound(spec, q0_linf, a_sup=None):
    """``(2 D1 + 4) ||q0||_inf`` bounding ``we_gap / eta``."""
    if a_sup is None:
        a_sup = -1.0 / spec.gamma_prime_at_zero
    d1, _ = kmod.d_constants(spec, a_sup)
    return (2.0 * d1 + 4.0) * q0_linf


def max_principle_bound(spec, eta, vm, q0_linf, kappa):
    """Constant ``C_eta`` of the weakened maximum principle and the time up to
    which ``||q(t)||_inf <= (1 + kappa) ||q0||_inf`` is guaranteed."""
    if not kappa > 0:
        raise ValidationError(f"kappa must be positive, got {kappa}")
    if not q0_linf > 0:
        raise ValidationError(f"q0_linf must be positive, got {q0_linf}")
    c = kmod.c_eta(spec, eta)
    g_delta = float(spec.gamma(np.array([spec.delta]))[0])
    C = vm.v_prime_sup(0.0, 2.0 * q0_linf) * (c / eta) * g_delta ** ((1.0 - eta) / eta) * spec.tv
    t_guarantee = math.inf if C == 0 else (kappa / (1.0 + kappa)) / (C * q0_linf)
    return C, t_guarantee


def largest_eta_within(linf_max_by_eta, q0_linf, kappa):
    """Largest eta whose run kept ``max_t linf <= (1 + kappa) ||q0||_inf``, or None."""
    ok = [eta for eta, m in linf_max_by_eta.items() if m <= (1.0 + kappa) * q0_linf]
    return max(ok) if ok else None


# -- eta-convergence table -----------------------------------------------------

TABLE_COLUMNS = ("eta", "l1_err", "tv_E", "we_gap_max", "linf_max")


@dataclass(frozen=True)
class ConvergenceRow:
    eta: float
    l1_err: float
    tv_E: float
    we_gap_max: float
    linf_max: float

    def as_tuple(self):
        return (self.eta, self.l1_err, self.tv_E, self.we_gap_max, self.linf_max)


def convergence_table(results, local_result, t_star):
    """One row per nonlocal run, sorted by descending eta.

    ``results`` are nonlocal :class:`RunResult`s holding a snapshot at
    ``t_star``; ``local_result`` is the matching local run.
    """
    if t_star not in local_result.snapshots:
        raise MissingSnapshot(f"local run has no snapshot at t={t_star}")
    q_loc = local_result.snapshots[t_star]
    rows = []
    for r in results:
        if t_star not in r.snapshots:
            raise MissingSnapshot(f"run with eta={r.config.eta} has no snapshot at t={t_star}")
        q = r.snapshots[t_star]
        if not q.grid.same_as(q_loc.grid):
            raise GridMismatch(f"run with eta={r.config.eta} uses a different grid")
        d = r.diagnostics
        t = d.array("t")
        i = int(np.argmin(np.abs(t - t_star)))
        upto = t <= t_star + 1e-12
        rows.append(ConvergenceRow(float(r.config.eta), l1_dist(q, q_loc), float(d.tv_E[i]),
                                   float(np.max(d.array("we_gap")[upto])),
                                   float(np.max(d.array("linf")[upto]))))
    rows.sort(key=lambda row: -row.eta)
    return rows


def write_table_csv(path, rows):
    with open(path, "w") as fh:
        fh.write(",".join(TABLE_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row.as_tuple()) + "\n")
