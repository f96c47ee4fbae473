"""Downstream nonlocal averages of a cell-average field.

All averages are evaluated at the *left edge* of each cell: entry ``i`` is
the value at ``x_min + i*dx``.  For cell-constant data both the discrete
kernel sum and the exponential recursion are exact integrals, so the
identity ``q = E - nu dE/dx`` holds discretely in the form
``q_i = (E_i - r E_{i+1}) / (1 - r)`` with ``r = exp(-dx/nu)``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import DegenerateRatio, GridMismatch, TrajectoryTooShort, ValidationError
from .grid import Field


@dataclass(frozen=True)
class SurrogateParams:
    nu: float
    eta: float

    def __post_init__(self):
        if not self.nu > 0:
            raise ValidationError(f"nu must be positive, got {self.nu}")

    @classmethod
    def canonical(cls, spec, eta):
        """The choice ``nu = -eta / gamma'(0)`` used throughout the estimates."""
        return cls(nu=-eta / spec.gamma_prime_at_zero, eta=eta)


def _check_dx(q, k):
    if not math.isclose(k.dx, q.grid.dx, rel_tol=1e-12):
        raise GridMismatch(f"kernel built for dx={k.dx}, field has dx={q.grid.dx}")


def nonlocal_values(q, k):
    """Raw array ``W_i = sum_j w_j q~_{i+j}`` (q~ extended by ``right_ext``)."""
    w = k.weights
    ext = np.concatenate([q.values, np.full(w.size - 1, q.right_ext)])
    return np.correlate(ext, w, mode="valid")


def nonlocal_term(q, k):
    """Nonlocal term ``W[q, gamma_eta]`` at the left edge of every cell."""
    _check_dx(q, k)
    return Field(q.grid, nonlocal_values(q, k), q.left_ext, q.right_ext)


def _ratio(dx, nu):
    r = math.exp(-dx / nu)
    return r, -math.expm1(-dx / nu)


def exp_values(values, right_ext, dx, nu):
    r, one_minus_r = _ratio(dx, nu)
    rev = np.asarray(values, dtype=float)[::-1]
    out, _ = lfilter([one_minus_r], [1.0, -r], rev, zi=[r * right_ext])
    return out[::-1]


def exp_nonlocal(q, p):
    """Exponential surrogate ``E = (1/nu) int_x^inf exp((x-y)/nu) q(y) dy``.

    Computed right to left by ``E_i = (1-r) q_i + r E_{i+1}``, seeded with
    ``right_ext``.
    """
    return Field(q.grid, exp_values(q.values, q.right_ext, q.grid.dx, p.nu), q.left_ext, q.right_ext)


def reconstruct_values(e_values, right_ext, dx, nu):
    r, one_minus_r = _ratio(dx, nu)
    if r >= 1.0 - 1e-15:
        raise DegenerateRatio(f"exp(-dx/nu) = {r!r} too close to 1 (dx={dx}, nu={nu})")
    e_next = np.append(e_values[1:], right_ext)
    return (e_values - r * e_next) / one_minus_r


def reconstruct_from_exp(E, p):
    """Invert :func:`exp_nonlocal` exactly (up to rounding)."""
    return Field(E.grid, reconstruct_values(E.values, E.right_ext, E.grid.dx, p.nu), E.left_ext, E.right_ext)


def surrogate_pde_residual(trajectory, k, p, vm):
    """L1-in-space residual of the evolution equation satisfied by E, per step.

    For consecutive snapshots ``(t_n, q^n)``, ``(t_{n+1}, q^{n+1})`` this returns

        || (E^{n+1} - E^n)/dt + V(W) dE/dx - V(W) E / nu + E[V(W) q] / nu ||_1

    where ``E[.]`` is the same exponential average, ``q`` is recovered from
    ``E`` through the discrete identity and ``dE/dx`` is the downwind
    difference.  All right-hand-side terms use the state at ``t_n``.
    """
    if len(trajectory) < 2:
        raise TrajectoryTooShort("surrogate residual needs at least two snapshots")
    grid = trajectory.grid
    dx = grid.dx
    nu = p.nu
    right = trajectory.right_ext
    v_right = float(vm.V(np.array([right]))[0]) * right
    out = np.empty(len(trajectory) - 1)
    e_curr = exp_values(trajectory.values[0], right, dx, nu)
    for n in range(len(trajectory) - 1):
        q_n = trajectory.field(n)
        e_next = exp_values(trajectory.values[n + 1], right, dx, nu)
        dt = trajectory.times[n + 1] - trajectory.times[n]
        w = nonlocal_term(q_n, k).values
        v = vm.V(w)
        dedx = (np.append(e_curr[1:], right) - e_curr) / dx
        q_rec = reconstruct_values(e_curr, right, dx, nu)
        integral = exp_values(v * q_rec, v_right, dx, nu)
        rhs = -v * dedx + v * e_curr / nu - integral / nu
        out[n] = np.sum(np.abs((e_next - e_curr) / dt - rhs)) * dx
        e_curr = e_next
    return out
