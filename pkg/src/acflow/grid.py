"""Staggered (MAC) grid containers and discrete operators.

Layout for an nx-by-ny cell grid covering [0, lx] x [0, ly]:

    p[i, j]    cell centers   x = (i+1/2)*hx,  y = (j+1/2)*hy    shape (nx, ny)
    ux[i, j]   x-faces        x = i*hx,        y = (j+1/2)*hy    shape (nx+1, ny)
    uy[i, j]   y-faces        x = (i+1/2)*hx,  y = j*hy          shape (nx, ny+1)

Index i runs along x and j along y.

Under periodic conditions face nx duplicates face 0 (one physical site stored
twice); apply_bc and every operator keep the seam in sync, and reductions
count each physical site exactly once.  Under no-slip conditions the
boundary-normal faces (ux rows 0 and nx, uy columns 0 and ny) are constrained
to zero, and tangential values reflect across the wall (ghost = -interior)
inside stencils so the wall velocity is zero to second order.

divergence and gradient are exact discrete adjoints for the uniform hx*hy
quadrature: <gradient(p), u> = -<p, divergence(u)> for admissible u.  The
energy bookkeeping elsewhere relies on this holding to rounding, and grad_div
is literally gradient(divergence(u)).  Reductions use numpy's deterministic
pairwise summation so identical runs reproduce ledgers bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class BC(Enum):
    PERIODIC = "periodic"
    NO_SLIP = "noslip"


class GridMismatchError(ValueError):
    """Fields from different grids (or shapes) were combined."""


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    lx: float
    ly: float
    bc: BC

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid must be at least 4x4, got {self.nx}x{self.ny}")
        if self.lx <= 0 or self.ly <= 0:
            raise ValueError("domain lengths must be positive")
        if not isinstance(self.bc, BC):
            raise ValueError(f"bc must be a BC enum, got {self.bc!r}")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    # native site coordinates, shaped to broadcast as [i, j] grids
    def cell_x(self):
        return (np.arange(self.nx)[:, None] + 0.5) * self.hx

    def cell_y(self):
        return (np.arange(self.ny)[None, :] + 0.5) * self.hy

    def xface_x(self):
        return np.arange(self.nx + 1)[:, None] * self.hx

    def xface_y(self):
        return (np.arange(self.ny)[None, :] + 0.5) * self.hy

    def yface_x(self):
        return (np.arange(self.nx)[:, None] + 0.5) * self.hx

    def yface_y(self):
        return np.arange(self.ny + 1)[None, :] * self.hy


def _as_grid_array(values, shape):
    a = np.asarray(values, dtype=float)
    if a.shape != shape:
        raise GridMismatchError(f"expected array of shape {shape}, got {a.shape}")
    return a


@dataclass
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = _as_grid_array(self.values, (self.grid.nx, self.grid.ny))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def __add__(self, other):
        _check_same(self, other, ScalarField)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same(self, other, ScalarField)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, a: float):
        return ScalarField(self.grid, self.values * float(a))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass
class VectorField:
    grid: GridSpec
    ux: np.ndarray
    uy: np.ndarray

    def __post_init__(self):
        self.ux = _as_grid_array(self.ux, (self.grid.nx + 1, self.grid.ny))
        self.uy = _as_grid_array(self.uy, (self.grid.nx, self.grid.ny + 1))

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.ux.copy(), self.uy.copy())

    def __add__(self, other):
        _check_same(self, other, VectorField)
        return VectorField(self.grid, self.ux + other.ux, self.uy + other.uy)

    def __sub__(self, other):
        _check_same(self, other, VectorField)
        return VectorField(self.grid, self.ux - other.ux, self.uy - other.uy)

    def __mul__(self, a: float):
        a = float(a)
        return VectorField(self.grid, self.ux * a, self.uy * a)

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField(self.grid, -self.ux, -self.uy)


def _check_same(a, b, cls):
    if not isinstance(b, cls):
        raise GridMismatchError(f"cannot combine {type(a).__name__} with {type(b).__name__}")
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")


def zero_scalar(grid: GridSpec) -> ScalarField:
    return ScalarField(grid, np.zeros((grid.nx, grid.ny)))


def zero_vector(grid: GridSpec) -> VectorField:
    return VectorField(grid, np.zeros((grid.nx + 1, grid.ny)),
                       np.zeros((grid.nx, grid.ny + 1)))


def sample_scalar(grid: GridSpec, fn, t: float = 0.0) -> ScalarField:
    """Sample fn(x, y, t) at cell centers."""
    return ScalarField(grid, np.broadcast_to(fn(grid.cell_x(), grid.cell_y(), t),
                                             (grid.nx, grid.ny)).copy())


def sample_vector(grid: GridSpec, fn_x, fn_y, t: float = 0.0) -> VectorField:
    """Sample component closures at their native face sites and apply bc."""
    ux = np.broadcast_to(fn_x(grid.xface_x(), grid.xface_y(), t),
                         (grid.nx + 1, grid.ny)).copy()
    uy = np.broadcast_to(fn_y(grid.yface_x(), grid.yface_y(), t),
                         (grid.nx, grid.ny + 1)).copy()
    return apply_bc(VectorField(grid, ux, uy))


def apply_bc(u: VectorField) -> VectorField:
    """Return a copy with the boundary convention enforced.

    Periodic: mirror the duplicated seam sites (face nx from face 0, face ny
    from face 0).  No-slip: zero the boundary-normal faces.
    """
    out = u.copy()
    if u.grid.bc is BC.PERIODIC:
        out.ux[-1, :] = out.ux[0, :]
        out.uy[:, -1] = out.uy[:, 0]
    else:
        out.ux[0, :] = 0.0
        out.ux[-1, :] = 0.0
        out.uy[:, 0] = 0.0
        out.uy[:, -1] = 0.0
    return out


def divergence(u: VectorField) -> ScalarField:
    """Cell-centered divergence from stored face values (bc-independent)."""
    g = u.grid
    d = (u.ux[1:, :] - u.ux[:-1, :]) / g.hx + (u.uy[:, 1:] - u.uy[:, :-1]) / g.hy
    return ScalarField(g, d)


def gradient(p: ScalarField) -> VectorField:
    """Face gradient, the exact negative adjoint of divergence.

    Periodic faces wrap.  Under no-slip the boundary-normal faces carry no
    gradient contribution (those velocity entries are constrained to zero), so
    the adjoint identity holds for admissible fields.
    """
    g = p.grid
    v = p.values
    gx = np.zeros((g.nx + 1, g.ny))
    gy = np.zeros((g.nx, g.ny + 1))
    gx[1:-1, :] = (v[1:, :] - v[:-1, :]) / g.hx
    gy[:, 1:-1] = (v[:, 1:] - v[:, :-1]) / g.hy
    if g.bc is BC.PERIODIC:
        seam_x = (v[0, :] - v[-1, :]) / g.hx
        gx[0, :] = seam_x
        gx[-1, :] = seam_x
        seam_y = (v[:, 0] - v[:, -1]) / g.hy
        gy[:, 0] = seam_y
        gy[:, -1] = seam_y
    return VectorField(g, gx, gy)


def grad_div(u: VectorField) -> VectorField:
    """Exactly the composition gradient(divergence(u))."""
    return gradient(divergence(u))


def _lap_component_periodic(a, hx, hy, axis_is_x):
    # a holds the distinct sites only
    xx = (np.roll(a, -1, 0) - 2.0 * a + np.roll(a, 1, 0)) / hx ** 2
    yy = (np.roll(a, -1, 1) - 2.0 * a + np.roll(a, 1, 1)) / hy ** 2
    return xx + yy


def laplacian(u: VectorField) -> VectorField:
    """Component-wise five-point Laplacian on each component's native sites.

    No-slip walls use reflected ghosts for the tangential direction and the
    stored zero values for the normal direction; output at constrained
    boundary-normal faces is zero (they are not degrees of freedom).
    """
    g = u.grid
    hx, hy = g.hx, g.hy
    out_x = np.zeros_like(u.ux)
    out_y = np.zeros_like(u.uy)
    if g.bc is BC.PERIODIC:
        lx = _lap_component_periodic(u.ux[:-1, :], hx, hy, True)
        out_x[:-1, :] = lx
        out_x[-1, :] = lx[0, :]
        ly = _lap_component_periodic(u.uy[:, :-1], hx, hy, False)
        out_y[:, :-1] = ly
        out_y[:, -1] = ly[:, 0]
        return VectorField(g, out_x, out_y)

    # ux: Dirichlet zeros stored at i = 0, nx; reflection ghosts across y walls
    px = np.empty((g.nx + 1, g.ny + 2))
    px[:, 1:-1] = u.ux
    px[:, 0] = -u.ux[:, 0]
    px[:, -1] = -u.ux[:, -1]
    xx = (u.ux[2:, :] - 2.0 * u.ux[1:-1, :] + u.ux[:-2, :]) / hx ** 2
    yy = (px[1:-1, 2:] - 2.0 * px[1:-1, 1:-1] + px[1:-1, :-2]) / hy ** 2
    out_x[1:-1, :] = xx + yy

    # uy: Dirichlet zeros at j = 0, ny; reflection ghosts across x walls
    py = np.empty((g.nx + 2, g.ny + 1))
    py[1:-1, :] = u.uy
    py[0, :] = -u.uy[0, :]
    py[-1, :] = -u.uy[-1, :]
    yy2 = (u.uy[:, 2:] - 2.0 * u.uy[:, 1:-1] + u.uy[:, :-2]) / hy ** 2
    xx2 = (py[2:, 1:-1] - 2.0 * py[1:-1, 1:-1] + py[:-2, 1:-1]) / hx ** 2
    out_y[:, 1:-1] = xx2 + yy2
    return VectorField(g, out_x, out_y)


def inner(a, b) -> float:
    """Quadrature-weighted inner product hx*hy * sum over distinct sites.

    Periodic vector fields count the duplicated seam faces once.  numpy's
    pairwise summation keeps the reduction order fixed, so results are
    reproducible run to run.
    """
    if isinstance(a, ScalarField):
        _check_same(a, b, ScalarField)
        s = float(np.sum(a.values * b.values))
    elif isinstance(a, VectorField):
        _check_same(a, b, VectorField)
        if a.grid.bc is BC.PERIODIC:
            s = float(np.sum(a.ux[:-1, :] * b.ux[:-1, :]))
            s += float(np.sum(a.uy[:, :-1] * b.uy[:, :-1]))
        else:
            s = float(np.sum(a.ux * b.ux)) + float(np.sum(a.uy * b.uy))
    else:
        raise TypeError(f"unsupported field type {type(a).__name__}")
    return a.grid.hx * a.grid.hy * s


def l2norm(a) -> float:
    return float(np.sqrt(max(inner(a, a), 0.0)))


def h1_seminorm_sq(u: VectorField) -> float:
    """Discrete |grad u|^2 induced by the Laplacian stencil, <-lap(u), u>.

    This is the quantity that makes the viscous term in the energy ledgers
    exact; it is nonnegative up to rounding.
    """
    return -inner(laplacian(u), u)


def smooth_random_velocity(grid: GridSpec, seed: int, amplitude: float = 1.0,
                           modes: int = 3) -> VectorField:
    """Band-limited random velocity from a streamfunction on grid nodes.

    Differencing a node streamfunction yields a discretely divergence-free,
    admissible field under either boundary convention (the streamfunction
    vanishes on no-slip walls).
    """
    rng = np.random.default_rng(seed)
    nxn = np.arange(grid.nx + 1)[:, None] * (1.0 / grid.nx)
    nyn = np.arange(grid.ny + 1)[None, :] * (1.0 / grid.ny)
    psi = np.zeros((grid.nx + 1, grid.ny + 1))
    for m in range(1, modes + 1):
        for n in range(1, modes + 1):
            a = rng.standard_normal()
            if grid.bc is BC.PERIODIC:
                phix = rng.uniform(0.0, 2.0 * np.pi)
                phiy = rng.uniform(0.0, 2.0 * np.pi)
                psi += a * np.sin(2.0 * np.pi * m * nxn + phix) * \
                    np.sin(2.0 * np.pi * n * nyn + phiy)
            else:
                psi += a * np.sin(np.pi * m * nxn) * np.sin(np.pi * n * nyn)
    psi *= amplitude / (modes * modes)
    ux = (psi[:, 1:] - psi[:, :-1]) / grid.hy
    uy = -(psi[1:, :] - psi[:-1, :]) / grid.hx
    return apply_bc(VectorField(grid, ux, uy))


def smooth_random_pressure(grid: GridSpec, seed: int, amplitude: float = 1.0,
                           modes: int = 3) -> ScalarField:
    rng = np.random.default_rng(seed)
    x = grid.cell_x() / grid.lx
    y = grid.cell_y() / grid.ly
    p = np.zeros((grid.nx, grid.ny))
    for m in range(1, modes + 1):
        for n in range(1, modes + 1):
            a = rng.standard_normal()
            phix = rng.uniform(0.0, 2.0 * np.pi)
            phiy = rng.uniform(0.0, 2.0 * np.pi)
            p += a * np.cos(2.0 * np.pi * m * x + phix) * np.cos(2.0 * np.pi * n * y + phiy)
    p *= amplitude / (modes * modes)
    return ScalarField(grid, p)


_BC_TOKENS = {BC.PERIODIC: "periodic", BC.NO_SLIP: "noslip"}
_TOKEN_BCS = {v: k for k, v in _BC_TOKENS.items()}


def write_field(path, field) -> None:
    """Plain-text snapshot: header line, then one value per line.

    Header: FIELD <kind> <nx> <ny> <lx> <ly> <bc> with kind scalar|vector.
    Values are written row-major over [i, j] (j fastest) with 17 significant
    digits; vector fields store the ux block then the uy block.
    """
    g = field.grid
    kind = "scalar" if isinstance(field, ScalarField) else "vector"
    with open(path, "w") as fh:
        fh.write(f"FIELD {kind} {g.nx} {g.ny} {g.lx:.17g} {g.ly:.17g} {_BC_TOKENS[g.bc]}\n")
        if kind == "scalar":
            blocks = [field.values]
        else:
            blocks = [field.ux, field.uy]
        for block in blocks:
            for v in block.ravel(order="C"):
                fh.write(f"{v:.17e}\n")


def read_field(path):
    """Read a snapshot written by write_field."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 7 or header[0] != "FIELD":
            raise ValueError(f"{path}: not a field snapshot")
        kind = header[1]
        nx, ny = int(header[2]), int(header[3])
        lx, ly = float(header[4]), float(header[5])
        bc = _TOKEN_BCS.get(header[6])
        if bc is None:
            raise ValueError(f"{path}: unknown bc token {header[6]!r}")
        grid = GridSpec(nx, ny, lx, ly, bc)
        values = np.array([float(line) for line in fh])
    if kind == "scalar":
        if values.size != nx * ny:
            raise ValueError(f"{path}: expected {nx * ny} values, got {values.size}")
        return ScalarField(grid, values.reshape(nx, ny))
    if kind == "vector":
        n1 = (nx + 1) * ny
        n2 = nx * (ny + 1)
        if values.size != n1 + n2:
            raise ValueError(f"{path}: expected {n1 + n2} values, got {values.size}")
        return VectorField(grid, values[:n1].reshape(nx + 1, ny),
                           values[n1:].reshape(nx, ny + 1))
    raise ValueError(f"{path}: unknown field kind {kind!r}")
