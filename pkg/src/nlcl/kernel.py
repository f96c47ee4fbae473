"""Admissible one-sided kernels and their power-scaled family.

A kernel ``gamma`` on [0, inf) is described by contiguous pieces with
closed-form evaluators for ``gamma`` and ``gamma'``.  The power-scaled kernel
is ``gamma_eta = c_eta * gamma**(1/eta)`` with ``c_eta`` normalizing it to
unit mass; as ``eta -> 0`` it concentrates in a layer of width
``~eta / |gamma'(0)|`` next to zero.
"""

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from .errors import (
    AssumptionViolation,
    DegenerateIntegral,
    EtaOutOfRange,
    GridTooCoarse,
    NonContiguousPieces,
    QuadratureFailure,
    ValidationError,
)
from .quadrature import integrate, integrate_intervals, integrate_to_infinity

N_SAMPLES = 20_000
TAIL_MASS = 1e-12


@dataclass(frozen=True)
class Piece:
    """``gamma`` restricted to [a, b); ``b`` may be ``inf``."""

    a: float
    b: float
    f: Callable
    df: Callable
    d2f: Optional[Callable] = None


@dataclass(frozen=True)
class KernelSpec:
    pieces: tuple
    delta: float
    gamma_prime_at_zero: float
    tv: float
    support_bound: float
    smooth_norms: tuple  # (sup |gamma'|, sup |gamma''|) on (0, delta)
    name: str = "custom"
    # filled in by validate()
    validated: bool = False
    measured_tv: Optional[float] = None
    measured_gamma_prime_at_zero: Optional[float] = None
    monotone_delta: Optional[float] = None

    def gamma(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for p in self.pieces:
            m = (x >= p.a) & (x < p.b)
            if np.any(m):
                out[m] = p.f(x[m])
        return out

    def dgamma(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for p in self.pieces:
            m = (x >= p.a) & (x < p.b)
            if np.any(m):
                out[m] = p.df(x[m])
        return out

    @property
    def breakpoints(self):
        return sorted({p.a for p in self.pieces} | {p.b for p in self.pieces if math.isfinite(p.b)})

    @property
    def decay_length(self):
        """Length scale of gamma near zero (where gamma ~ 1 + gamma'(0) x)."""
        return 1.0 / abs(self.gamma_prime_at_zero)


@dataclass(frozen=True)
class DiscreteKernel:
    eta: float
    c_eta: float
    dx: float
    weights: np.ndarray = field(repr=False)
    cutoff_mass: float = 0.0

    @property
    def size(self):
        return self.weights.size


@dataclass(frozen=True)
class KernelBounds:
    c_eta_lower: float
    c_eta_upper: float
    d1: float
    d2: float
    d3: float
    c_max_principle: float
    kappa_half: float


# -- validation ---------------------------------------------------------------

def _sample_range_end(spec):
    if math.isfinite(spec.support_bound):
        return spec.support_bound
    finite = [b for b in spec.breakpoints if b > 0]
    return max(finite + [spec.delta]) + 50.0 * spec.decay_length


def validate(spec):
    """Check the kernel admissibility assumptions and return an annotated copy.

    Checked: ``nonnegative_bv`` (nonnegative, variation consistent with
    ``tv``), ``smooth_near_zero`` (supplied derivative norms dominate sampled
    ones on (0, delta)), ``decreasing_start`` (``gamma'(0) < 0``),
    ``dominates_tail`` (gamma on (0, delta) dominates gamma beyond delta) and
    ``normalized`` (``gamma(0) = 1``).  Strict decrease near zero is reported
    through ``monotone_delta`` rather than enforced.
    """
    pieces = spec.pieces
    if not pieces:
        raise NonContiguousPieces("kernel has no pieces")
    if pieces[0].a != 0.0:
        raise NonContiguousPieces(f"first piece starts at {pieces[0].a}, not 0")
    for left, right in zip(pieces, pieces[1:]):
        if left.b != right.a:
            raise NonContiguousPieces(f"gap or overlap between [{left.a},{left.b}) and [{right.a},{right.b})")
    for p in pieces:
        if not p.b > p.a:
            raise NonContiguousPieces(f"empty piece [{p.a},{p.b})")
    if not spec.delta > 0:
        raise AssumptionViolation("smooth_near_zero", f"delta must be positive, got {spec.delta}")

    g0 = float(pieces[0].f(np.array([0.0]))[0])
    if abs(g0 - 1.0) > 1e-12:
        raise AssumptionViolation("normalized", f"gamma(0) = {g0!r}, expected 1")

    measured_gp0 = float(pieces[0].df(np.array([0.0]))[0])
    if not spec.gamma_prime_at_zero < 0:
        raise AssumptionViolation("decreasing_start", f"gamma'(0) = {spec.gamma_prime_at_zero} is not negative")
    if abs(measured_gp0 - spec.gamma_prime_at_zero) > 1e-10:
        raise AssumptionViolation(
            "decreasing_start", f"declared gamma'(0) = {spec.gamma_prime_at_zero} but first piece gives {measured_gp0}")

    end = _sample_range_end(spec)
    x = np.linspace(0.0, end, N_SAMPLES + 1)
    # include both one-sided values at each piece boundary so jumps are seen
    bps = np.array([b for b in spec.breakpoints if 0 < b <= end])
    eps = 1e-12 * max(1.0, end)
    x = np.unique(np.concatenate([x, bps - eps, bps, [end - eps]]))
    x = x[(x >= 0) & (x < end)]
    g = spec.gamma(x)
    if not np.all(np.isfinite(g)):
        raise AssumptionViolation("nonnegative_bv", "gamma is not finite on its support")
    if np.min(g) < -1e-14:
        raise AssumptionViolation("nonnegative_bv", f"gamma takes negative value {np.min(g)}")
    sampled_tv = float(np.sum(np.abs(np.diff(g))) + abs(g[-1] if math.isfinite(spec.support_bound) else 0.0))
    if not math.isfinite(spec.tv) or spec.tv < 0.99 * sampled_tv:
        raise AssumptionViolation("nonnegative_bv", f"declared TV {spec.tv} below sampled variation {sampled_tv:.6g}")

    # W^{2,inf} on (0, delta): no piece boundary inside, derivative norms dominate
    inner = [b for b in spec.breakpoints if 0 < b < spec.delta]
    for b in inner:
        gl, gr = spec.gamma(np.array([b - eps, b]))
        dl, dr = spec.dgamma(np.array([b - eps, b]))
        if abs(gl - gr) > 1e-9 or abs(dl - dr) > 1e-6:
            raise AssumptionViolation("smooth_near_zero", f"gamma or gamma' jumps at {b} inside (0, delta)")
    xs = np.linspace(0.0, spec.delta, N_SAMPLES + 1)[1:-1]
    dg = spec.dgamma(xs)
    d1_sup, d2_sup = spec.smooth_norms
    if np.max(np.abs(dg)) > d1_sup * (1 + 1e-9) + 1e-12:
        raise AssumptionViolation("smooth_near_zero", f"sup|gamma'| on (0,delta) is {np.max(np.abs(dg)):.6g} > declared {d1_sup}")
    d2 = np.abs(np.diff(dg)) / np.diff(xs)
    if np.max(d2) > d2_sup * 1.01 + 1e-8:
        raise AssumptionViolation("smooth_near_zero", f"sup|gamma''| on (0,delta) is {np.max(d2):.6g} > declared {d2_sup}")

    # gamma near zero dominates the tail
    gin = spec.gamma(xs)
    beyond = x[x > spec.delta]
    if beyond.size:
        gout = spec.gamma(beyond)
        if np.min(gin) < np.max(gout) - 1e-12:
            raise AssumptionViolation(
                "dominates_tail",
                f"inf of gamma on (0,delta) is {np.min(gin):.6g} but gamma reaches {np.max(gout):.6g} beyond delta")

    # reported only: largest sub-delta on which gamma' < 0
    nonneg = np.nonzero(dg >= 0)[0]
    monotone_delta = spec.delta if nonneg.size == 0 else float(xs[nonneg[0]])

    return replace(spec, validated=True, measured_tv=sampled_tv,
                   measured_gamma_prime_at_zero=measured_gp0, monotone_delta=monotone_delta)


def _check_eta(eta):
    if not (0.0 < eta <= 1.0):
        raise EtaOutOfRange(f"eta must lie in (0, 1], got {eta}")


# -- integrals of powers of gamma ---------------------------------------------

def _cluster(a, b, length):
    """Geometric breakpoints a + length*2**j inside (a, b)."""
    pts = []
    for j in range(-10, 200):
        p = a + length * 2.0 ** j
        if not p < b:
            break
        pts.append(p)
    return pts


def _piece_integral(piece, h, length, rtol):
    if math.isfinite(piece.b):
        return integrate(h, piece.a, piece.b, rtol=rtol, atol=1e-300,
                         breakpoints=_cluster(piece.a, piece.b, length))
    return integrate_to_infinity(h, piece.a, scale=length, rtol=rtol)


def power_integral(spec, p, rtol=1e-13):
    """Integral of gamma(y)**p over (0, inf)."""
    length = spec.decay_length / p
    total = 0.0
    for piece in spec.pieces:
        def h(x, piece=piece):
            return np.maximum(piece.f(x), 0.0) ** p
        total += _piece_integral(piece, h, length, rtol)
    return total


def c_eta(spec, eta):
    """Normalization constant ``1 / int_0^inf gamma**(1/eta)``."""
    _check_eta(eta)
    mass = power_integral(spec, 1.0 / eta)
    if not mass > 1e-300:
        raise DegenerateIntegral(f"integral of gamma**(1/eta) is {mass} for eta={eta}")
    return 1.0 / mass


def l1_norm(spec):
    return power_integral(spec, 1.0)


def c_eta_bounds(spec, eta):
    """Lower and upper bracket ``-g'(0)/eta`` and ``-g'(0)/(eta(1-2 eta))`` for c_eta."""
    if not (0.0 < eta < 0.5):
        raise EtaOutOfRange(f"the c_eta bracket needs eta in (0, 0.5), got {eta}")
    gp0 = spec.gamma_prime_at_zero
    return -gp0 / eta, -gp0 / (eta * (1.0 - 2.0 * eta))


def d_constants(spec, a_sup):
    """Constants (D1, D2) of the weight estimate for ``gamma_eta + eta a gamma_eta'``."""
    gp0 = spec.gamma_prime_at_zero
    kappa = 0.5 * gp0
    dg_sup, d2g_sup = spec.smooth_norms
    d1 = -2.0 * gp0 * ((dg_sup + a_sup * d2g_sup) / kappa ** 2 + 1.0)
    d2 = 2.0 * gp0 / kappa
    return d1, d2


def kernel_bounds(spec, eta, a_sup=None, v_prime_sup=1.0):
    """All analytic constants at one eta, bundled.

    ``a_sup`` defaults to the canonical weight ``-1/gamma'(0)``.
    """
    if a_sup is None:
        a_sup = -1.0 / spec.gamma_prime_at_zero
    lower, upper = c_eta_bounds(spec, eta)
    d1, d2 = d_constants(spec, a_sup)
    c = c_eta(spec, eta)
    g_delta = float(spec.gamma(np.array([spec.delta]))[0])
    c_mp = v_prime_sup * (c / eta) * g_delta ** ((1.0 - eta) / eta) * spec.tv
    return KernelBounds(c_eta_lower=lower, c_eta_upper=upper, d1=d1, d2=d2,
                        d3=-spec.gamma_prime_at_zero * d1, c_max_principle=c_mp,
                        kappa_half=0.5 * spec.gamma_prime_at_zero)


def _sign_changes(h, a, b, n=4001):
    x = np.linspace(a, b, n)
    y = h(x)
    roots = []
    for i in np.nonzero(np.sign(y[:-1]) * np.sign(y[1:]) < 0)[0]:
        roots.append(brentq(lambda s: float(h(np.array([s]))[0]), x[i], x[i + 1], xtol=1e-15, rtol=4e-16))
    return roots


def combo_l1_norm(spec, eta, a):
    """L1 norm of ``gamma_eta + eta * a * gamma_eta'`` over (0, inf).

    Pointwise (absolutely continuous) part only: jumps of gamma between
    pieces carry no mass here.
    """
    _check_eta(eta)
    p = 1.0 / eta
    c = c_eta(spec, eta)
    length = spec.decay_length * eta
    total = 0.0
    for piece in spec.pieces:
        def lin(x, piece=piece):
            return piece.f(x) + a * piece.df(x)

        def h(x, piece=piece):
            g = np.maximum(piece.f(x), 0.0)
            return np.abs(g ** (p - 1.0) * (g + a * piece.df(x)))

        if math.isfinite(piece.b):
            cuts = [piece.a] + _sign_changes(lin, piece.a, piece.b) + [piece.b]
            for lo, hi in zip(cuts, cuts[1:]):
                total += integrate(h, lo, hi, rtol=1e-12, atol=1e-300, breakpoints=_cluster(lo, hi, length))
        else:
            probe_end = piece.a + 50.0 * spec.decay_length
            roots = _sign_changes(lin, piece.a, probe_end)
            cuts = [piece.a] + roots
            for lo, hi in zip(cuts, cuts[1:]):
                total += integrate(h, lo, hi, rtol=1e-12, atol=1e-300, breakpoints=_cluster(lo, hi, length))
            total += integrate_to_infinity(h, cuts[-1], scale=length, rtol=1e-12)
    return c * total


# -- discretization -----------------------------------------------------------

def _tail(spec, p, x0, length):
    """Integral of gamma**p over (x0, inf)."""
    total = 0.0
    for piece in spec.pieces:
        if piece.b <= x0:
            continue
        lo = max(piece.a, x0)
        sub = Piece(lo, piece.b, piece.f, piece.df)

        def h(x, piece=piece):
            return np.maximum(piece.f(x), 0.0) ** p
        total += _piece_integral(sub, h, length, 1e-12)
    return total


def _cell_masses(spec, p, edges, length, mass):
    """Integral of gamma**p on each [edges[k], edges[k+1]]."""
    bps = np.array([b for b in spec.breakpoints if edges[0] < b < edges[-1]])
    sub = np.unique(np.concatenate([edges, bps]))
    owner = np.searchsorted(edges, sub[:-1], side="right") - 1
    # evaluate each sub-interval with the piece it lies in
    vals = np.zeros(sub.size - 1)
    mids = 0.5 * (sub[:-1] + sub[1:])
    for piece in spec.pieces:
        m = (mids >= piece.a) & (mids < piece.b)
        if not np.any(m):
            continue

        def h(x, piece=piece):
            return np.maximum(piece.f(x), 0.0) ** p
        vals[m] = integrate_intervals(h, sub[:-1][m], sub[1:][m], rtol=1e-12, atol=1e-16 * mass)
    out = np.zeros(edges.size - 1)
    np.add.at(out, owner, vals)
    return out


def _discretize_scaled(spec, p, u_dx, eta, c_norm, mass):
    """Cell masses of ``c_norm * gamma**p`` on cells of width ``u_dx`` in the
    kernel's own variable, truncated at the TAIL_MASS quantile."""
    length = spec.decay_length / p
    if math.isfinite(spec.support_bound):
        u_end = spec.support_bound
        beyond = 0.0
    else:
        u_end = max(length, min(b for b in spec.breakpoints if b > 0) if len(spec.breakpoints) > 1 else length)
        while c_norm * _tail(spec, p, u_end, length) > 0.01 * TAIL_MASS:
            u_end *= 2.0
            if u_end > 1e12:
                raise QuadratureFailure("kernel tail does not decay")
        beyond = c_norm * _tail(spec, p, u_end, length)
    n_cells = max(1, int(math.ceil(u_end / u_dx - 1e-9)))
    edges = u_dx * np.arange(n_cells + 1)
    w = c_norm * _cell_masses(spec, p, edges, length, mass)
    suffix = np.cumsum(w[::-1])[::-1] + beyond
    # smallest K whose discarded tail is below TAIL_MASS
    keep = np.nonzero(suffix > TAIL_MASS)[0]
    k = int(keep[-1]) + 1 if keep.size else 1
    cutoff = float(suffix[k]) if k < w.size else beyond
    w = w[:k]
    if k < 2:
        warnings.warn(f"kernel at eta={eta} is narrower than one cell (dx={u_dx}); "
                      "all mass placed in the first weight", GridTooCoarse, stacklevel=3)
        w = np.array([1.0])
    w = w / np.sum(w)
    return w, cutoff


def discretize(spec, eta, dx):
    """Exact cell integrals ``w_k = c_eta int_{k dx}^{(k+1) dx} gamma**(1/eta)``,
    renormalized to sum to one."""
    _check_eta(eta)
    if not dx > 0:
        raise ValidationError(f"dx must be positive, got {dx}")
    c = c_eta(spec, eta)
    w, cutoff = _discretize_scaled(spec, 1.0 / eta, dx, eta, c, 1.0 / c)
    w.setflags(write=False)
    return DiscreteKernel(eta=eta, c_eta=c, dx=dx, weights=w, cutoff_mass=cutoff)


def spatial_scale_discretize(spec, eta, dx):
    """Cell integrals of the spatially scaled kernel ``gamma(x/eta)/(eta ||gamma||_1)``."""
    _check_eta(eta)
    if not dx > 0:
        raise ValidationError(f"dx must be positive, got {dx}")
    mass = l1_norm(spec)
    w, cutoff = _discretize_scaled(spec, 1.0, dx / eta, eta, 1.0 / mass, mass)
    w.setflags(write=False)
    return DiscreteKernel(eta=eta, c_eta=1.0 / (eta * mass), dx=dx, weights=w, cutoff_mass=cutoff)


def power_scaled_values(spec, eta, x, c=None):
    """Pointwise ``c_eta * gamma(x)**(1/eta)``."""
    if c is None:
        c = c_eta(spec, eta)
    return c * np.maximum(spec.gamma(x), 0.0) ** (1.0 / eta)


def spatial_scaled_values(spec, eta, x, mass=None):
    """Pointwise ``gamma(x/eta) / (eta ||gamma||_1)``."""
    if mass is None:
        mass = l1_norm(spec)
    return spec.gamma(np.asarray(x, dtype=float) / eta) / (eta * mass)


# -- presets ------------------------------------------------------------------

def _poly_piece(a, b, coef):
    coef = np.asarray(coef, dtype=float)
    d1 = P.polyder(coef) if coef.size > 1 else np.zeros(1)
    d2 = P.polyder(d1) if d1.size > 1 else np.zeros(1)
    return Piece(a, b, lambda x, c=coef: P.polyval(x, c),
                 lambda x, c=d1: P.polyval(x, c) + 0.0 * x,
                 lambda x, c=d2: P.polyval(x, c) + 0.0 * x)


def from_polynomials(pieces, delta, name="inline", support_bound=None):
    """Kernel from pieces ``(a, b, coefficients)`` with ascending polynomial
    coefficients; derivative data, TV and norms are derived exactly.

    The last piece may extend to ``inf`` only if it is identically zero.
    """
    ps = tuple(_poly_piece(a, b, c) for a, b, c in pieces)
    for p, (_, _, c) in zip(ps, pieces):
        if not math.isfinite(p.b) and np.any(np.asarray(c) != 0):
            raise ValidationError("an unbounded polynomial piece must be identically zero")
    nonzero = [p.b for (p, (_, _, c)) in zip(ps, pieces) if np.any(np.asarray(c) != 0)]
    if support_bound is None:
        support_bound = max(nonzero) if nonzero else ps[-1].b
    # exact variation: sum over pieces of variation between critical points, plus jumps
    tv = 0.0
    prev_right = None
    for p, (a, b, c) in zip(ps, pieces):
        b_eff = min(b, support_bound)
        if b_eff <= a:
            continue
        left_val = float(p.f(np.array([a]))[0])
        if prev_right is not None:
            tv += abs(left_val - prev_right)
        d = P.polyder(np.asarray(c, dtype=float)) if len(c) > 1 else np.zeros(1)
        crit = [r.real for r in (P.polyroots(d) if np.any(d != 0) and d.size > 1 else [])
                if abs(r.imag) < 1e-14 and a < r.real < b_eff]
        pts = np.array([a] + sorted(crit) + [b_eff])
        tv += float(np.sum(np.abs(np.diff(p.f(pts)))))
        prev_right = float(p.f(np.array([b_eff]))[0])
    if prev_right is not None and math.isfinite(support_bound):
        tv += abs(prev_right)
    xs = np.linspace(0.0, delta, 4001)
    first = ps[0]
    dsup = float(np.max(np.abs(first.df(xs))))
    d2sup = float(np.max(np.abs(first.d2f(xs))))
    gp0 = float(first.df(np.array([0.0]))[0])
    return KernelSpec(pieces=ps, delta=delta, gamma_prime_at_zero=gp0, tv=tv,
                      support_bound=support_bound, smooth_norms=(dsup, d2sup), name=name)


def _exp_kernel():
    piece = Piece(0.0, math.inf, lambda x: np.exp(-x), lambda x: -np.exp(-x), lambda x: np.exp(-x))
    return KernelSpec(pieces=(piece,), delta=1.0, gamma_prime_at_zero=-1.0, tv=1.0,
                      support_bound=math.inf, smooth_norms=(1.0, 1.0), name="exp")


def _with_zero_tail(pieces):
    return list(pieces) + [(pieces[-1][1], math.inf, [0.0])]


PRESET_BUILDERS = {
    "exp": _exp_kernel,
    # 2(1-x) on (0,1); not normalized (gamma(0)=2), used for scaling comparisons
    "linear": lambda: from_polynomials(_with_zero_tail([(0.0, 1.0, [2.0, -2.0])]), delta=0.5, name="linear"),
    "linear_normalized": lambda: from_polynomials(
        _with_zero_tail([(0.0, 1.0, [1.0, -1.0])]), delta=0.5, name="linear_normalized"),
    "fig3_piecewise": lambda: from_polynomials(
        _with_zero_tail([(0.0, 0.5, [1.0, -2.0]), (0.5, 2.0, [0.5])]), delta=0.25, name="fig3_piecewise"),
    # 2(1-x) on (0,0.5), 2x-1 on (0.5,1); not normalized
    "hat": lambda: from_polynomials(
        _with_zero_tail([(0.0, 0.5, [2.0, -2.0]), (0.5, 1.0, [-1.0, 2.0])]), delta=0.25, name="hat"),
}


def preset(name):
    try:
        return PRESET_BUILDERS[name]()
    except KeyError:
        raise ValidationError(f"unknown kernel preset {name!r}; known: {sorted(PRESET_BUILDERS)}") from None
