"""Uniform node-centred grids on intervals and rectangles, plus quadrature and norms."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box given as one ``(lo, hi)`` pair per axis (1 or 2 axes)."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.bounds) not in (1, 2):
            raise ValueError("only 1D intervals and 2D rectangles are supported")
        for lo, hi in self.bounds:
            if not hi > lo:
                raise ValueError(f"degenerate axis ({lo}, {hi}): need hi > lo")
        object.__setattr__(
            self, "bounds", tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        )

    @classmethod
    def interval(cls, x0: float = 0.0, x1: float = 1.0) -> Domain:
        return cls(((x0, x1),))

    @classmethod
    def rectangle(cls, x0=0.0, x1=1.0, y0=0.0, y1=1.0) -> Domain:
        return cls(((x0, x1), (y0, y1)))

    @property
    def kind(self) -> str:
        return "interval" if self.dim == 1 else "rectangle"

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(hi - lo for lo, hi in self.bounds)

    @property
    def measure(self) -> float:
        return float(np.prod(self.lengths))


@dataclass(frozen=True)
class Grid:
    """Tensor grid with ``n`` interior nodes per axis and one boundary layer.

    Nodes are ordered lexicographically with the first axis slowest, i.e. the
    flat index of node ``(i, j)`` is ``i * (n + 2) + j``.
    """

    domain: Domain
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"need n >= 3 interior nodes per axis, got {self.n}")

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n + 2,) * self.dim

    @property
    def size(self) -> int:
        return (self.n + 2) ** self.dim

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(length / (self.n + 1) for length in self.domain.lengths)

    @property
    def h(self) -> float:
        return max(self.spacing)

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            np.linspace(lo, hi, self.n + 2) for lo, hi in self.domain.bounds
        )

    @cached_property
    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def interior_mask(self) -> np.ndarray:
        inner = np.zeros(self.shape, dtype=bool)
        inner[(slice(1, -1),) * self.dim] = True
        mask = inner.ravel()
        mask.flags.writeable = False
        return mask

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = ~self.interior_mask
        mask.flags.writeable = False
        return mask

    @cached_property
    def interior_index(self) -> np.ndarray:
        return np.flatnonzero(self.interior_mask)

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights, tensor product in 2D."""
        per_axis = []
        for h in self.spacing:
            w = np.full(self.n + 2, h)
            w[0] = w[-1] = h / 2
            per_axis.append(w)
        if self.dim == 1:
            return per_axis[0]
        return np.outer(per_axis[0], per_axis[1]).ravel()

    def coords(self, axis: int) -> np.ndarray:
        return self.nodes[:, axis]

    def field(self, values) -> Field:
        return Field(self, values)

    def evaluate(self, func) -> Field:
        """Field from ``func(x)`` (1D) or ``func(x, y)`` (2D), vectorised."""
        cols = [self.nodes[:, k] for k in range(self.dim)]
        return Field(self, np.broadcast_to(func(*cols), (self.size,)))

    def zeros(self) -> Field:
        return Field(self, np.zeros(self.size))

    def constant_interior(self, c: float) -> Field:
        return Field(self, np.where(self.interior_mask, float(c), 0.0))


def build_grid(domain: Domain, n: int) -> Grid:
    return Grid(domain, n)


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).ravel()
        if vals.size != self.grid.size:
            raise GridMismatchError(
                f"field has {vals.size} values, grid has {self.grid.size} nodes"
            )
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def _check(self, other: Field) -> None:
        if other.grid != self.grid:
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.values + other.values)
        return Field(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.values - other.values)
        return Field(self.grid, self.values - other)

    def __neg__(self):
        return Field(self.grid, -self.values)

    def __mul__(self, c):
        if isinstance(c, Field):
            self._check(c)
            return Field(self.grid, self.values * c.values)
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def interior(self) -> np.ndarray:
        return self.values[self.grid.interior_mask]

    def with_zero_boundary(self) -> Field:
        return Field(self.grid, np.where(self.grid.interior_mask, self.values, 0.0))

    def __repr__(self):
        return f"Field(n={self.grid.n}, dim={self.grid.dim}, sup={sup_norm(self):.6g})"


def integrate(f: Field) -> float:
    return float(np.dot(f.grid.weights, f.values))


def sup_norm(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


def sup_distance(f: Field, g: Field) -> float:
    f._check(g)
    return float(np.max(np.abs(f.values - g.values)))


def gradient(f: Field) -> tuple[Field, ...]:
    """Central differences inside, second-order one-sided at the boundary."""
    grid = f.grid
    arr = f.values.reshape(grid.shape)
    parts = np.gradient(arr, *grid.spacing, edge_order=2)
    if grid.dim == 1:
        parts = [parts]
    return tuple(Field(grid, d.ravel()) for d in parts)


def c1_distance(f: Field, g: Field) -> float:
    """Discrete C^1 distance: sup of values plus sup of each gradient component."""
    dist = sup_distance(f, g)
    for df, dg in zip(gradient(f), gradient(g)):
        dist += sup_distance(df, dg)
    return dist


def c1_norm(f: Field) -> float:
    return c1_distance(f, f.grid.zeros())


def field_to_csv(f: Field) -> str:
    names = ["x", "y"][: f.grid.dim]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*names, "value"])
    for coords, v in zip(f.grid.nodes, f.values):
        writer.writerow([_fmt(c) for c in coords] + [_fmt(v)])
    return buf.getvalue()


def write_field_csv(f: Field, path) -> Path:
    path = Path(path)
    path.write_text(field_to_csv(f), newline="")
    return path


def read_field_csv(path, grid: Grid) -> Field:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if len(header) != grid.dim + 1 or len(body) != grid.size:
        raise GridMismatchError(
            f"{path}: expected {grid.size} rows of {grid.dim + 1} columns"
        )
    coords = np.array([[float(c) for c in r[:-1]] for r in body])
    if not np.allclose(coords, grid.nodes, atol=1e-12 * max(grid.domain.lengths)):
        raise GridMismatchError(f"{path}: node coordinates do not match the grid")
    return Field(grid, [float(r[-1]) for r in body])


def _fmt(v: float) -> str:
    return repr(float(v))
