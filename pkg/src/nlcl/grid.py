"""Uniform 1D cell grid and immutable cell-average fields."""

import csv
import math
from dataclasses import dataclass, field
import numpy as np

from .errors import GridMismatch, NegativeDatum, UnboundedDatum, ValidationError

# 8-point Gauss-Legendre for cell averages of non-constant datum pieces
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValidationError(f"grid needs x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValidationError(f"grid needs at least 2 cells, got {self.n_cells}")

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def edges(self):
        return self.x_min + self.dx * np.arange(self.n_cells + 1)

    @property
    def centers(self):
        return self.x_min + self.dx * (np.arange(self.n_cells) + 0.5)

    def same_as(self, other):
        return (self.n_cells == other.n_cells
                and math.isclose(self.x_min, other.x_min, rel_tol=0, abs_tol=1e-12 * self.dx)
                and math.isclose(self.x_max, other.x_max, rel_tol=0, abs_tol=1e-12 * self.dx))


@dataclass(frozen=True)
class Field:
    grid: Grid
    values: np.ndarray = field(repr=False)
    left_ext: float = 0.0
    right_ext: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_cells,):
            raise ValidationError(f"field has {v.shape} values for a {self.grid.n_cells}-cell grid")
        if not np.all(np.isfinite(v)):
            raise ValidationError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values):
        return Field(self.grid, values, self.left_ext, self.right_ext)

    def mass(self):
        return float(np.sum(self.values) * self.grid.dx)


@dataclass(frozen=True)
class Datum:
    """Sum of pieces ``(a, b, value)`` with ``value`` a constant or a callable.

    Outside all pieces the datum is zero.  ``a`` may be ``-inf`` and ``b``
    ``inf``; unbounded pieces must be constant so the limits at infinity are
    defined.
    """

    pieces: tuple

    @classmethod
    def boxes(cls, *boxes):
        return cls(tuple((float(a), float(b), float(v)) for a, b, v in boxes))

    @classmethod
    def riemann(cls, ql, qr, x0=0.0):
        return cls(((-math.inf, x0, float(ql)), (x0, math.inf, float(qr))))

    @classmethod
    def constant(cls, c):
        return cls(((-math.inf, math.inf, float(c)),))

    def limits(self):
        left = sum(v for a, b, v in self.pieces if a == -math.inf and not callable(v))
        right = sum(v for a, b, v in self.pieces if b == math.inf and not callable(v))
        return left, right


def project(datum, grid):
    """Exact cell averages of ``datum`` on ``grid``."""
    edges = grid.edges
    lo, hi = edges[:-1], edges[1:]
    out = np.zeros(grid.n_cells)
    for a, b, v in datum.pieces:
        if not a < b:
            raise ValidationError(f"datum piece [{a}, {b}) is empty")
        unbounded = not (math.isfinite(a) and math.isfinite(b))
        if callable(v):
            if unbounded:
                raise UnboundedDatum("pieces reaching +-inf must have constant values")
            s = np.maximum(lo, a)
            e = np.minimum(hi, b)
            m = e > s
            half = 0.5 * (e[m] - s[m])
            mid = 0.5 * (e[m] + s[m])
            xq = mid[:, None] + half[:, None] * _GL_X[None, :]
            fx = np.asarray(v(xq), dtype=float)
            if not np.all(np.isfinite(fx)):
                raise UnboundedDatum(f"datum is not finite on [{a}, {b})")
            if np.min(fx) < 0:
                raise NegativeDatum(f"datum takes negative value {np.min(fx)} on [{a}, {b})")
            out[m] += (half * (fx @ _GL_W)) / grid.dx
        else:
            if not math.isfinite(v):
                raise UnboundedDatum(f"datum value {v} on [{a}, {b}) is not finite")
            if v < 0:
                raise NegativeDatum(f"datum value {v} on [{a}, {b}) is negative")
            frac = np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None) / grid.dx
            # cells wholly inside the piece get v exactly, not v times a rounded ratio
            frac[(lo >= a) & (hi <= b)] = 1.0
            out += v * frac
    left, right = datum.limits()
    return Field(grid, out, left, right)


def tv(f):
    """Total variation including the jumps to the constant extensions."""
    v = f.values
    return float(np.sum(np.abs(np.diff(v))) + abs(v[0] - f.left_ext) + abs(f.right_ext - v[-1]))


def linf(f):
    return float(np.max(np.abs(f.values)))


def l1_dist(f, g):
    if not f.grid.same_as(g.grid):
        raise GridMismatch("l1_dist needs fields on the same grid")
    return float(np.sum(np.abs(f.values - g.values)) * f.grid.dx)


# -- CSV ------------------------------------------------------------------

def fmt(x):
    """17 significant digits: round-trips every double exactly."""
    return format(float(x), ".17g")


def write_field_csv(path, f, column="q"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", column])
        for x, q in zip(f.grid.centers, f.values):
            w.writerow([fmt(x), fmt(q)])


def read_field_csv(path, left_ext=None, right_ext=None):
    """Read a snapshot written by :func:`write_field_csv`.

    The grid is reconstructed from the (uniform) cell centers; extensions
    default to the boundary cell values.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3 or rows[0][0] != "x":
        raise ValidationError(f"{path}: not a field snapshot CSV")
    x = np.array([float(r[0]) for r in rows[1:]])
    q = np.array([float(r[1]) for r in rows[1:]])
    dx = (x[-1] - x[0]) / (x.size - 1)
    grid = Grid(x[0] - 0.5 * dx, x[-1] + 0.5 * dx, x.size)
    return Field(grid, q,
                 q[0] if left_ext is None else left_ext,
                 q[-1] if right_ext is None else right_ext)
