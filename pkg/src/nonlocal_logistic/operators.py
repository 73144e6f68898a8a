"""Discrete operators: Dirichlet Laplacian, nonlinear advection, nonlocal crowding.

All stencils act on node-centred fields from :mod:`nonlocal_logistic.grid`.
Matrices returned for the solver act on interior unknowns only (the Dirichlet
rows are eliminated); the public field-level functions act on full fields.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.sparse as sp

from .grid import Domain, Field, Grid, gradient


class KernelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# kernels

@dataclass(frozen=True)
class ConstantKernel:
    c: float = 1.0


@dataclass(frozen=True)
class GaussianKernel:
    amplitude: float = 1.0
    width: float = 0.1


@dataclass(frozen=True, eq=False)
class BallKernel:
    """K(x, y) = b(y) on |x - y| <= r, else 0.  ``b`` is a constant or nodal values."""

    r: float
    b: float | np.ndarray = 1.0


@dataclass(frozen=True, eq=False)
class TableKernel:
    """Explicit nodal values K(x_i, y_j) on the full grid (quadrature not folded in)."""

    matrix: np.ndarray


KernelSpec = Union[ConstantKernel, GaussianKernel, BallKernel, TableKernel]


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """W[i, j] = K(x_i, y_j) * w_j over all grid nodes."""

    W: np.ndarray
    k0: float
    kinf: float
    row_mass: np.ndarray
    positive_rows: bool

    def __post_init__(self):
        self.W.flags.writeable = False


def _kernel_values(spec: KernelSpec, grid: Grid) -> np.ndarray:
    x = grid.nodes
    size = grid.size
    if isinstance(spec, ConstantKernel):
        return np.full((size, size), float(spec.c))
    if isinstance(spec, GaussianKernel):
        if spec.width <= 0:
            raise KernelError("gaussian kernel width must be positive")
        d2 = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=-1)
        return spec.amplitude * np.exp(-d2 / (2.0 * spec.width**2))
    if isinstance(spec, BallKernel):
        if spec.r <= 0:
            raise KernelError("ball radius must be positive")
        d2 = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=-1)
        # small slack so nodes exactly on the sphere count despite rounding
        inside = d2 <= (spec.r * (1 + 1e-12)) ** 2
        b = np.broadcast_to(np.asarray(spec.b, dtype=float), (size,))
        return inside * b[None, :]
    if isinstance(spec, TableKernel):
        mat = np.asarray(spec.matrix, dtype=float)
        if mat.shape != (size, size):
            raise KernelError(
                f"table kernel has shape {mat.shape}, grid needs {(size, size)}"
            )
        return mat.copy()
    raise TypeError(f"unknown kernel spec {spec!r}")


def assemble_kernel(spec: KernelSpec, grid: Grid) -> KernelMatrix:
    K = _kernel_values(spec, grid)
    if not np.all(np.isfinite(K)):
        raise KernelError("kernel has non-finite entries")
    if np.any(K < 0):
        i, j = np.unravel_index(np.argmin(K), K.shape)
        raise KernelError(
            f"kernel must be nonnegative: K[{i}, {j}] = {K[i, j]:g}"
        )
    W = K * grid.weights[None, :]
    row_mass = W.sum(axis=1)
    return KernelMatrix(
        W=W,
        k0=float(row_mass.min()),
        kinf=float(K.max()),
        row_mass=row_mass,
        positive_rows=bool(np.all(row_mass > 0)),
    )


def phi(u: Field, gamma: float, W: KernelMatrix) -> Field:
    """Nonlocal crowding ``x -> sum_j W[x, j] |u_j|^gamma``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return Field(u.grid, W.W @ np.abs(u.values) ** gamma)


# ---------------------------------------------------------------------------
# flows

@dataclass(frozen=True)
class ConstantFlow:
    components: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(float(c) for c in self.components))

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.components))

    def nodal(self, grid: Grid) -> np.ndarray:
        if len(self.components) != grid.dim:
            raise ValueError(
                f"flow has {len(self.components)} components, domain is {grid.dim}D"
            )
        return np.repeat(np.array(self.components)[:, None], grid.size, axis=1)

    def scaled(self, magnitude: float) -> ConstantFlow:
        norm = self.magnitude
        if norm == 0:
            direction = np.zeros(len(self.components))
            direction[0] = 1.0
        else:
            direction = np.array(self.components) / norm
        return ConstantFlow(tuple(magnitude * direction))


@dataclass(frozen=True, eq=False)
class FieldFlow:
    """Spatially varying flow, one nodal Field per axis."""

    components: tuple[Field, ...]

    @property
    def magnitude(self) -> float:
        v = np.stack([c.values for c in self.components])
        return float(np.sqrt((v**2).sum(axis=0)).max())

    def nodal(self, grid: Grid) -> np.ndarray:
        if len(self.components) != grid.dim:
            raise ValueError("flow component count does not match the domain")
        for c in self.components:
            if c.grid != grid:
                raise ValueError("flow field lives on a different grid")
        return np.stack([c.values for c in self.components])

    def divergence(self) -> Field:
        grid = self.components[0].grid
        out = np.zeros(grid.size)
        for axis, comp in enumerate(self.components):
            out += gradient(comp)[axis].values
        return Field(grid, out)


FlowSpec = Union[ConstantFlow, FieldFlow]


def zero_flow(dim: int) -> ConstantFlow:
    return ConstantFlow((0.0,) * dim)


def rotational_flow(grid: Grid, c: float, center=None) -> FieldFlow:
    """c * (-(y - yc), x - xc): solenoidal, exactly so under central differences."""
    if grid.dim != 2:
        raise ValueError("rotational flow needs a 2D domain")
    if center is None:
        center = tuple((lo + hi) / 2 for lo, hi in grid.domain.bounds)
    x, y = grid.nodes[:, 0], grid.nodes[:, 1]
    return FieldFlow((Field(grid, -c * (y - center[1])), Field(grid, c * (x - center[0]))))


# ---------------------------------------------------------------------------
# stencil matrices on interior unknowns

def _second_difference_1d(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / h**2


def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """-Delta_h on interior nodes with homogeneous Dirichlet data (SPD)."""
    n = grid.n
    ops = [_second_difference_1d(n, h) for h in grid.spacing]
    if grid.dim == 1:
        return ops[0].tocsr()
    eye = sp.identity(n, format="csr")
    return (sp.kron(ops[0], eye) + sp.kron(eye, ops[1])).tocsr()


def _axis_operator(grid: Grid, axis: int, d1: sp.spmatrix) -> sp.csr_matrix:
    if grid.dim == 1:
        return d1.tocsr()
    eye = sp.identity(grid.n, format="csr")
    if axis == 0:
        return sp.kron(d1, eye).tocsr()
    return sp.kron(eye, d1).tocsr()


def difference_matrices(grid: Grid, kind: str) -> list[sp.csr_matrix]:
    """First-derivative matrices on interior unknowns, one per axis.

    ``kind`` is ``central``, ``backward`` or ``forward``; Dirichlet neighbours
    are zero so their columns are dropped.
    """
    n = grid.n
    mats = []
    for axis, h in enumerate(grid.spacing):
        ones = np.ones(n - 1)
        if kind == "central":
            d1 = sp.diags([-ones, ones], [-1, 1]) / (2 * h)
        elif kind == "backward":
            d1 = sp.diags([-ones, np.ones(n)], [-1, 0]) / h
        elif kind == "forward":
            d1 = sp.diags([-np.ones(n), ones], [0, 1]) / h
        else:
            raise ValueError(f"unknown difference kind {kind!r}")
        mats.append(_axis_operator(grid, axis, d1))
    return mats


def advection_matrix(grid: Grid, flow_nodal: np.ndarray, scheme: str) -> sp.csr_matrix:
    """Interior matrix of ``w -> alpha . grad_h w`` for ``w`` vanishing on the boundary."""
    inner = grid.interior_mask
    total = sp.csr_matrix((grid.n**grid.dim,) * 2)
    if scheme == "central":
        for a, D in zip(flow_nodal, difference_matrices(grid, "central")):
            total = total + sp.diags(a[inner]) @ D
    elif scheme == "upwind":
        back = difference_matrices(grid, "backward")
        fwd = difference_matrices(grid, "forward")
        for a, Db, Df in zip(flow_nodal, back, fwd):
            a = a[inner]
            total = total + sp.diags(np.maximum(a, 0)) @ Db + sp.diags(np.minimum(a, 0)) @ Df
    else:
        raise ValueError(f"unknown advection scheme {scheme!r}")
    return total.tocsr()


def signed_power(u: np.ndarray, p: float) -> np.ndarray:
    """|u|^{p-1} u written as sign(u) |u|^p."""
    return np.sign(u) * np.abs(u) ** p


def advection_term(u: Field, p: float, flow: FlowSpec, scheme: str = "central") -> Field:
    """alpha . grad(|u|^{p-1} u) on a full field.

    Central uses :func:`gradient` (one-sided at the boundary); upwind uses
    first-order one-sided differences picked by the sign of the local flow,
    falling back to the central value on boundary nodes.
    """
    grid = u.grid
    w = Field(grid, signed_power(u.values, p))
    alpha = flow.nodal(grid)
    grads = gradient(w)
    out = np.zeros(grid.size)
    if scheme == "central":
        for a, g in zip(alpha, grads):
            out += a * g.values
        return Field(grid, out)
    if scheme != "upwind":
        raise ValueError(f"unknown advection scheme {scheme!r}")
    arr = w.values.reshape(grid.shape)
    inner = (slice(1, -1),) * grid.dim
    for axis, (a, g, h) in enumerate(zip(alpha, grads, grid.spacing)):
        back = np.diff(arr, axis=axis) / h
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        db = np.array(g.values.reshape(grid.shape))
        df = np.array(db)
        db[tuple(hi)] = back
        df[tuple(lo)] = back
        a_arr = a.reshape(grid.shape)
        comp = np.where(a_arr > 0, a_arr * db, a_arr * df)
        full = a_arr * g.values.reshape(grid.shape)
        full[inner] = comp[inner]
        out += full.ravel()
    return Field(grid, out)


def cell_peclet(grid: Grid, flow: FlowSpec, p: float, u_sup: float) -> float:
    return flow.magnitude * p * u_sup ** (p - 1) * grid.h / 2


# ---------------------------------------------------------------------------
# the assembled problem

@dataclass(frozen=True)
class ProblemParams:
    """One instance of the boundary value problem on a uniform grid."""

    lam: float
    gamma: float = 1.0
    p: float = 2.0
    flow: FlowSpec | None = None
    kernel: KernelSpec = ConstantKernel(1.0)
    domain: Domain | None = None
    n: int = 255

    def __post_init__(self):
        if self.domain is None:
            object.__setattr__(self, "domain", Domain.interval(0.0, 1.0))
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.flow is None:
            object.__setattr__(self, "flow", zero_flow(self.domain.dim))

    @property
    def grid(self) -> Grid:
        return Grid(self.domain, self.n)

    def replace(self, **changes) -> ProblemParams:
        return dataclasses.replace(self, **changes)


@dataclass(eq=False)
class Discretization:
    """Operators assembled once per (grid, kernel, flow) and reused across solves."""

    grid: Grid
    laplacian: sp.csr_matrix
    kernel: KernelMatrix
    flow: FlowSpec
    flow_nodal: np.ndarray
    W_inner: np.ndarray
    _adv_cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, params: ProblemParams, kernel: KernelMatrix | None = None) -> Discretization:
        grid = params.grid
        if kernel is None:
            kernel = assemble_kernel(params.kernel, grid)
        inner = grid.interior_mask
        return cls(
            grid=grid,
            laplacian=laplacian_matrix(grid),
            kernel=kernel,
            flow=params.flow,
            flow_nodal=params.flow.nodal(grid),
            W_inner=np.ascontiguousarray(kernel.W[np.ix_(inner, inner)]),
        )

    def with_flow(self, flow: FlowSpec) -> Discretization:
        return Discretization(
            grid=self.grid,
            laplacian=self.laplacian,
            kernel=self.kernel,
            flow=flow,
            flow_nodal=flow.nodal(self.grid),
            W_inner=self.W_inner,
        )

    def advection(self, scheme: str) -> sp.csr_matrix:
        if scheme not in self._adv_cache:
            self._adv_cache[scheme] = advection_matrix(self.grid, self.flow_nodal, scheme)
        return self._adv_cache[scheme]

    @property
    def has_flow(self) -> bool:
        return bool(np.any(self.flow_nodal != 0))

    # interior-vector kernels used by the solver ------------------------------

    def residual_vec(self, v: np.ndarray, lam, gamma, p, scheme="central") -> np.ndarray:
        """F(v) on interior unknowns ``v`` (Dirichlet values are zero)."""
        out = self.laplacian @ v
        if self.has_flow:
            out += self.advection(scheme) @ signed_power(v, p)
        out -= (lam - self.W_inner @ np.abs(v) ** gamma) * v
        return out

    def jacobian(self, v: np.ndarray, lam, gamma, p, scheme="central") -> np.ndarray:
        J = self.laplacian.toarray()
        if self.has_flow:
            dw = p * np.abs(v) ** (p - 1)
            J += (self.advection(scheme) @ sp.diags(dw)).toarray()
        phiv = self.W_inner @ np.abs(v) ** gamma
        J[np.diag_indices_from(J)] += phiv - lam
        av = np.abs(v)
        with np.errstate(divide="ignore", invalid="ignore"):
            dphi = np.where(av > 0, gamma * av ** (gamma - 1) * np.sign(v), 0.0)
        J += (v[:, None] * self.W_inner) * dphi[None, :]
        return J

    def to_field(self, v: np.ndarray) -> Field:
        full = np.zeros(self.grid.size)
        full[self.grid.interior_mask] = v
        return Field(self.grid, full)


def residual(u: Field, params: ProblemParams, assembled: Discretization | None = None,
             scheme: str = "central") -> Field:
    """-Delta_h u + alpha . grad_h(|u|^{p-1}u) - (lambda - phi_u) u; zero on the boundary."""
    if assembled is None:
        assembled = Discretization.build(params)
    v = u.values[u.grid.interior_mask]
    F = assembled.residual_vec(v, params.lam, params.gamma, params.p, scheme)
    return assembled.to_field(F)
