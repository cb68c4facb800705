"""Rectangular grids, cumulative fields and discrete Stieltjes sums.

Everything here works on a truncated box ``[x_min, x_max]^n`` split into
cells.  Cell fields hold one midpoint sample per cell; node fields hold one
value per grid node.  Integrals are midpoint sums (sample times cell volume),
which makes the prefix and suffix cumulations exact discrete adjoints.

Sampling convention used throughout the package: a lower cumulation
(``I_n f``) is read on a cell at the cell's upper corner, an upper cumulation
(``I_n* f``) at the cell's lower corner.  With this choice the cell-wise
operator ``f -> I_n f`` and ``g -> I_n* g`` are adjoint in the quadrature
inner product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

MAX_DIM = 4


class GridMismatchError(ValueError):
    """Two fields that must share a grid do not."""


class NonFiniteSampleError(ValueError):
    def __init__(self, index: tuple[int, ...], value: float):
        self.index = index
        self.value = value
        super().__init__(f"non-finite sample {value!r} at cell {index}")


def fsum(values) -> float:
    """Compensated (exactly rounded) sum of an array."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


@dataclass(frozen=True, eq=False)
class GridN:
    """Tensor-product grid with per-axis node lists."""

    axes: tuple[np.ndarray, ...]
    spacing: str = "custom"

    def __post_init__(self):
        axes = tuple(np.array(a, dtype=float) for a in self.axes)
        if not 1 <= len(axes) <= MAX_DIM:
            raise ValueError(f"grid dimension must be in 1..{MAX_DIM}, got {len(axes)}")
        if self.spacing not in ("log", "linear", "custom"):
            raise ValueError(f"unknown spacing tag {self.spacing!r}")
        for d, a in enumerate(axes):
            if a.ndim != 1 or a.size < 2:
                raise ValueError(f"axis {d} needs at least 2 nodes")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"axis {d} has non-finite nodes")
            if a[0] < 0 or (self.spacing == "log" and a[0] <= 0):
                raise ValueError(f"axis {d} must start at a positive node, got {a[0]}")
            if np.any(np.diff(a) <= 0):
                raise ValueError(f"axis {d} nodes are not strictly increasing")
            a.setflags(write=False)
        object.__setattr__(self, "axes", axes)

    @classmethod
    def log(cls, x_min: float, x_max: float, nodes: int, dim: int = 2) -> "GridN":
        axis = np.geomspace(x_min, x_max, nodes)
        return cls(tuple(axis for _ in range(dim)), "log")

    @classmethod
    def linear(cls, x_min: float, x_max: float, nodes: int, dim: int = 2) -> "GridN":
        axis = np.linspace(x_min, x_max, nodes)
        return cls(tuple(axis for _ in range(dim)), "linear")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        """Cell counts per axis."""
        return tuple(a.size - 1 for a in self.axes)

    @property
    def node_shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    def widths(self, d: int) -> np.ndarray:
        return np.diff(self.axes[d])

    def midpoints(self, d: int) -> np.ndarray:
        a = self.axes[d]
        if self.spacing == "log":
            return np.sqrt(a[1:] * a[:-1])
        return 0.5 * (a[1:] + a[:-1])

    @cached_property
    def volumes(self) -> np.ndarray:
        vol = np.ones(self.shape)
        for d in range(self.dim):
            vol = vol * _along(self.widths(d), d, self.dim)
        vol.setflags(write=False)
        return vol

    def mesh(self) -> list[np.ndarray]:
        """Midpoint coordinates broadcast to the cell shape."""
        return [_along(self.midpoints(d), d, self.dim) for d in range(self.dim)]

    def node(self, index: Sequence[int]) -> tuple[float, ...]:
        return tuple(float(self.axes[d][i]) for d, i in enumerate(index))

    def refine(self) -> "GridN":
        """Nested refinement: split every cell in two along every axis."""
        new_axes = []
        for d, a in enumerate(self.axes):
            mids = self.midpoints(d)
            merged = np.empty(2 * a.size - 1)
            merged[0::2] = a
            merged[1::2] = mids
            new_axes.append(merged)
        return GridN(tuple(new_axes), self.spacing)

    def same_as(self, other: "GridN") -> bool:
        if self is other:
            return True
        return self.dim == other.dim and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.axes, other.axes)
        )


def _along(vec: np.ndarray, d: int, n: int) -> np.ndarray:
    shape = [1] * n
    shape[d] = vec.size
    return np.reshape(vec, shape)


def check_same_grid(*grids: GridN) -> None:
    first = grids[0]
    for g in grids[1:]:
        if not first.same_as(g):
            raise GridMismatchError("fields live on different grids")


@dataclass(frozen=True, eq=False)
class CellField:
    """One midpoint sample per cell."""

    grid: GridN
    values: np.ndarray
    nonnegative: bool = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise GridMismatchError(f"cell field shape {vals.shape} != grid cells {self.grid.shape}")
        bad = ~np.isfinite(vals)
        if bad.any():
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise NonFiniteSampleError(idx, float(vals[idx]))
        if self.nonnegative and (vals < 0).any():
            idx = tuple(int(i) for i in np.argwhere(vals < 0)[0])
            raise ValueError(f"negative sample {vals[idx]} at cell {idx} in a nonnegative field")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, grid: GridN, c: float) -> "CellField":
        return cls(grid, np.full(grid.shape, float(c)), nonnegative=c >= 0)

    def mass(self) -> np.ndarray:
        return self.values * self.grid.volumes

    def total(self) -> float:
        return fsum(self.mass())

    def scaled(self, c: float) -> "CellField":
        return CellField(self.grid, c * self.values, self.nonnegative and c >= 0)


LOWER = "lower"
UPPER = "upper"
# Stieltjes integrand averaged over the lower-left and upper-right nodes
DIAGONAL = "diagonal"


@dataclass(frozen=True, eq=False)
class CumField:
    """Node table of ``I_n f`` (direction ``lower``) or ``I_n* f`` (``upper``)."""

    grid: GridN
    direction: str
    values: np.ndarray

    def __post_init__(self):
        if self.direction not in (LOWER, UPPER):
            raise ValueError(f"direction must be 'lower' or 'upper', got {self.direction!r}")
        if self.values.shape != self.grid.node_shape:
            raise GridMismatchError("node table does not match the grid")

    def at(self, point: Sequence[float]) -> float:
        """Multilinear interpolation between nodes."""
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator(self.grid.axes, self.values, method="linear")
        return float(interp(np.asarray(point, dtype=float)[None, :])[0])

    def on_cells(self) -> np.ndarray:
        """Cell samples per the corner convention (upper corner for lower cumulations)."""
        return upper_corner(self.values) if self.direction == LOWER else lower_corner(self.values)


def upper_corner(node_values: np.ndarray) -> np.ndarray:
    return node_values[(slice(1, None),) * node_values.ndim]


def lower_corner(node_values: np.ndarray) -> np.ndarray:
    return node_values[(slice(None, -1),) * node_values.ndim]


def prefix_sum(mass: np.ndarray) -> np.ndarray:
    """Node table of inclusive prefix sums of a cell mass array (zero on lower faces)."""
    out = np.zeros(tuple(s + 1 for s in mass.shape))
    acc = mass
    for d in range(mass.ndim):
        acc = np.cumsum(acc, axis=d)
    out[(slice(1, None),) * mass.ndim] = acc
    return out


def suffix_sum(mass: np.ndarray) -> np.ndarray:
    """Node table of suffix sums of a cell mass array (zero on upper faces)."""
    out = np.zeros(tuple(s + 1 for s in mass.shape))
    acc = mass
    for d in range(mass.ndim):
        acc = np.flip(np.cumsum(np.flip(acc, axis=d), axis=d), axis=d)
    out[(slice(None, -1),) * mass.ndim] = acc
    return out


def prefix_cumulate(f: CellField) -> CumField:
    """Discrete ``I_n f``: node value = sum over cells below the node of sample x volume."""
    return CumField(f.grid, LOWER, prefix_sum(f.mass()))


def suffix_cumulate(f: CellField) -> CumField:
    """Discrete ``I_n* f``; the upper truncation boundary stands in for infinity."""
    return CumField(f.grid, UPPER, suffix_sum(f.mass()))


def _node_array(x) -> np.ndarray:
    return np.asarray(getattr(x, "values", x), dtype=float)


def _pair(phi, psi) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(phi, CumField) and isinstance(psi, CumField):
        check_same_grid(phi.grid, psi.grid)
    a, b = _node_array(phi), _node_array(psi)
    if a.shape != b.shape or a.ndim != 2:
        raise GridMismatchError(f"Stieltjes sums need two node tables on one 2-d grid, got {a.shape} and {b.shape}")
    return a, b


def box_measure(psi) -> np.ndarray:
    """Forward mixed difference of a 2-d node table, one value per cell."""
    p = _node_array(psi)
    return p[1:, 1:] - p[:-1, 1:] - p[1:, :-1] + p[:-1, :-1]


def _weighted(integrand: np.ndarray, measure: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", over="ignore"):
        return np.where(measure != 0.0, integrand * measure, 0.0)


def stieltjes_box_integral(phi, psi, corner: str = LOWER) -> float:
    """Sum over cells of ``phi(corner) * box_measure(psi)(cell)``.

    ``corner`` is ``'lower'`` (lower-left node), ``'upper'`` (upper-right
    node) or ``'diagonal'`` (mean of the two, second-order accurate).  Cells
    where the measure vanishes contribute 0 even if the integrand is
    infinite there.
    """
    a, b = _pair(phi, psi)
    if corner == LOWER:
        vals = lower_corner(a)
    elif corner == UPPER:
        vals = upper_corner(a)
    elif corner == DIAGONAL:
        vals = 0.5 * (lower_corner(a) + upper_corner(a))
    else:
        raise ValueError(f"unknown corner {corner!r}")
    return fsum(_weighted(vals, box_measure(b)))


def stieltjes_form1(phi, psi, corner: str = LOWER) -> float:
    """``sum d_y phi * d_x(-psi)`` as a product of edge increments.

    ``'lower'`` pairs the y-increment of phi on the cell's left edge with the
    x-decrement of psi on its top edge; ``'upper'`` uses the right and bottom
    edges; ``'diagonal'`` averages the two.  For phi vanishing on the lower
    faces and psi on the upper faces, the ``'lower'`` (``'upper'``) version
    equals :func:`stieltjes_box_integral` at the same corner exactly.
    """
    a, b = _pair(phi, psi)
    if corner == DIAGONAL:
        return 0.5 * (stieltjes_form1(a, b, LOWER) + stieltjes_form1(a, b, UPPER))
    if corner == LOWER:
        dy_phi = a[:-1, 1:] - a[:-1, :-1]
        dx_psi = b[:-1, 1:] - b[1:, 1:]
    elif corner == UPPER:
        dy_phi = a[1:, 1:] - a[1:, :-1]
        dx_psi = b[:-1, :-1] - b[1:, :-1]
    else:
        raise ValueError(f"unknown corner {corner!r}")
    return fsum(dy_phi * dx_psi)


def stieltjes_form2(phi, psi, corner: str = LOWER) -> float:
    """``sum phi d_x d_y psi``."""
    return stieltjes_box_integral(phi, psi, corner)


def stieltjes_form3(phi, psi, corner: str = LOWER) -> float:
    """``sum psi d_x d_y phi`` with psi at the opposite corner of ``corner``."""
    opposite = {LOWER: UPPER, UPPER: LOWER, DIAGONAL: DIAGONAL}[corner]
    return stieltjes_box_integral(psi, phi, opposite)


def weighted_norm(f: CellField, weight: CellField, exponent: float) -> float:
    check_same_grid(f.grid, weight.grid)
    if exponent <= 0:
        raise ValueError("exponent must be positive")
    total = fsum(np.abs(f.values) ** exponent * weight.values * f.grid.volumes)
    return total ** (1.0 / exponent)
