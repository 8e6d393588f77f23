"""Periodicity-cell geometry, uniform grids, and discrete differential stencils.

Supported geometries are the flat torus cell (all axes periodic, dimension 1
or 2) and the straight 2-D cylinder (periodic axis crossed with a bounded
cross-axis carrying homogeneous-Neumann walls).  Second-order centered
stencils are used throughout; diffusion is discretized in conservative flux
form with arithmetic face averaging, and first-order upwind stencils are
available for drift terms.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import sparse

from .errors import GridError

UNIT_TOL = 1e-12


class Geometry(Enum):
    TORUS = "torus"
    CYLINDER = "cylinder"


@dataclass(frozen=True)
class CellSpec:
    """Periodicity cell: dimensions, periods, geometry, and front direction.

    ``direction_e`` is a unit vector in the periodic directions; on the
    cylinder it is one-dimensional (along the axis).
    """

    dim_total: int
    dim_periodic: int
    periods: tuple[float, ...]
    geometry: Geometry
    direction_e: tuple[float, ...]
    cylinder_height: float | None = None

    def __post_init__(self):
        n, d = self.dim_total, self.dim_periodic
        if n not in (1, 2):
            raise GridError(f"dim_total must be 1 or 2, got {n}")
        if not 1 <= d <= n:
            raise GridError(f"dim_periodic must satisfy 1 <= d <= {n}, got {d}")
        if self.geometry is Geometry.TORUS and d != n:
            raise GridError("torus requires dim_periodic == dim_total")
        if self.geometry is Geometry.CYLINDER:
            if (d, n) != (1, 2):
                raise GridError("cylinder requires dim_periodic=1, dim_total=2")
            if self.cylinder_height is None or self.cylinder_height <= 0:
                raise GridError("cylinder requires a positive cylinder_height")
        if len(self.periods) != d or any(L <= 0 for L in self.periods):
            raise GridError(f"need {d} strictly positive periods, got {self.periods}")
        e = np.asarray(self.direction_e, dtype=float)
        if e.shape != (d,):
            raise GridError(f"direction_e must have {d} components")
        if abs(np.linalg.norm(e) - 1.0) > UNIT_TOL:
            raise GridError(f"|direction_e| must be 1 to {UNIT_TOL:g}")

    @property
    def e_tilde(self) -> np.ndarray:
        """Direction embedded in R^N: (e, 0, ...)."""
        e = np.zeros(self.dim_total)
        e[: self.dim_periodic] = self.direction_e
        return e

    @property
    def axis_lengths(self) -> tuple[float, ...]:
        if self.geometry is Geometry.CYLINDER:
            return (self.periods[0], float(self.cylinder_height))
        return self.periods


@dataclass(frozen=True)
class Grid:
    """Uniform node lattice over a cell (or an internally built strip).

    Periodic axes carry ``wrap=True`` and n nodes covering [0, L); the
    cylinder cross-axis carries ``wrap=False`` and n nodes covering [0, H]
    endpoints included.
    """

    spec: CellSpec
    nodes_per_axis: tuple[int, ...]
    spacings: tuple[float, ...]
    wrap: tuple[bool, ...]

    @property
    def ndim(self) -> int:
        return len(self.nodes_per_axis)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.nodes_per_axis

    @property
    def size(self) -> int:
        return int(np.prod(self.nodes_per_axis))

    def axis_coordinates(self, axis: int) -> np.ndarray:
        return np.arange(self.nodes_per_axis[axis]) * self.spacings[axis]

    def coords(self) -> list[np.ndarray]:
        """Meshgrid node coordinates, one array of shape ``self.shape`` per axis."""
        axes = [self.axis_coordinates(j) for j in range(self.ndim)]
        return list(np.meshgrid(*axes, indexing="ij"))

    @property
    def e_tilde(self) -> np.ndarray:
        return self.spec.e_tilde


def build_grid(spec: CellSpec, nodes_per_axis) -> Grid:
    """Build the uniform grid over the periodicity cell.

    Rejects fewer than 4 nodes per axis (the stencils need the width) and
    node lists inconsistent with the geometry.
    """
    nodes = tuple(int(n) for n in np.atleast_1d(nodes_per_axis))
    if len(nodes) != spec.dim_total:
        raise GridError(f"expected {spec.dim_total} axis node counts, got {len(nodes)}")
    if any(n < 4 for n in nodes):
        raise GridError(f"need at least 4 nodes per axis for the stencil width, got {nodes}")
    spacings = []
    wraps = []
    for j, n in enumerate(nodes):
        if j < spec.dim_periodic:
            spacings.append(spec.periods[j] / n)
            wraps.append(True)
        else:
            spacings.append(spec.cylinder_height / (n - 1))
            wraps.append(False)
    return Grid(spec, nodes, tuple(spacings), tuple(wraps))


# ---------------------------------------------------------------------------
# array-level stencils (act on the trailing grid.ndim axes, so leading batch
# dimensions - e.g. an s-lattice - pass through)


def _ax(u: np.ndarray, grid: Grid, axis: int) -> int:
    return u.ndim - grid.ndim + axis


def deriv_centered(grid: Grid, u: np.ndarray, axis: int) -> np.ndarray:
    """Second-order first derivative; one-sided at non-wrapped boundaries."""
    a = _ax(u, grid, axis)
    h = grid.spacings[axis]
    if grid.wrap[axis]:
        return (np.roll(u, -1, axis=a) - np.roll(u, 1, axis=a)) / (2 * h)
    out = np.empty_like(u)
    sl = [slice(None)] * u.ndim

    def at(i):
        s = list(sl)
        s[a] = i
        return tuple(s)

    out[at(slice(1, -1))] = (u[at(slice(2, None))] - u[at(slice(0, -2))]) / (2 * h)
    out[at(0)] = (-3 * u[at(0)] + 4 * u[at(1)] - u[at(2)]) / (2 * h)
    out[at(-1)] = (3 * u[at(-1)] - 4 * u[at(-2)] + u[at(-3)]) / (2 * h)
    return out


def gradient(grid: Grid, u: np.ndarray) -> list[np.ndarray]:
    return [deriv_centered(grid, u, j) for j in range(grid.ndim)]


def divergence(grid: Grid, field: list[np.ndarray]) -> np.ndarray:
    out = deriv_centered(grid, field[0], 0)
    for j in range(1, grid.ndim):
        out = out + deriv_centered(grid, field[j], j)
    return out


def spectral_derivative(grid: Grid, u: np.ndarray, axis: int) -> np.ndarray:
    """FFT derivative on wrapped axes (spectrally accurate for smooth
    periodic fields); falls back to the centered stencil on bounded axes."""
    if not grid.wrap[axis]:
        return deriv_centered(grid, u, axis)
    a = _ax(u, grid, axis)
    n = grid.nodes_per_axis[axis]
    h = grid.spacings[axis]
    k = 2j * np.pi * np.fft.fftfreq(n, d=h)
    if n % 2 == 0:
        k[n // 2] = 0.0  # drop the Nyquist mode's odd derivative
    shape = [1] * u.ndim
    shape[a] = n
    uh = np.fft.fft(u, axis=a)
    return np.real(np.fft.ifft(uh * k.reshape(shape), axis=a))


def spectral_gradient(grid: Grid, u: np.ndarray) -> list[np.ndarray]:
    return [spectral_derivative(grid, u, j) for j in range(grid.ndim)]


def spectral_divergence(grid: Grid, field: list[np.ndarray]) -> np.ndarray:
    out = spectral_derivative(grid, field[0], 0)
    for j in range(1, grid.ndim):
        out = out + spectral_derivative(grid, field[j], j)
    return out


def _face_average(grid: Grid, a: np.ndarray, axis: int, batch_ndim: int = 0) -> np.ndarray:
    ax = batch_ndim + axis
    if grid.wrap[axis]:
        return 0.5 * (a + np.roll(a, -1, axis=ax))
    out = 0.5 * (a + np.roll(a, -1, axis=ax))
    sl = [slice(None)] * a.ndim
    sl[ax] = -1
    out[tuple(sl)] = 0.0  # no face beyond the wall
    return out


def div_a_grad(grid: Grid, A: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Conservative-flux discretization of div(A grad u).

    ``A`` has shape ``grid.shape + (N, N)``.  Axis-aligned parts use flux
    differencing with arithmetic face averages; mixed parts use commuting
    centered first derivatives (offdiagonal A must vanish at cylinder walls,
    which the supported media guarantee).  Walls carry zero-flux
    (mirror-ghost) closures.
    """
    nd = grid.ndim
    out = np.zeros_like(u, dtype=float)
    for j in range(nd):
        ajj = A[..., j, j]
        h = grid.spacings[j]
        a = _ax(u, grid, j)
        face = _face_average(grid, ajj, j)
        if grid.wrap[j]:
            fplus = face * (np.roll(u, -1, axis=a) - u)
            out += (fplus - np.roll(fplus, 1, axis=a)) / h**2
        else:
            fplus = face * (np.roll(u, -1, axis=a) - u)
            sl_last = [slice(None)] * u.ndim
            sl_last[a] = -1
            fplus[tuple(sl_last)] = 0.0
            fminus = np.roll(fplus, 1, axis=a)
            sl0 = [slice(None)] * u.ndim
            sl0[a] = 0
            fminus[tuple(sl0)] = 0.0
            term = (fplus - fminus) / h**2
            # half-cell finite volume at the walls (mirror-ghost equivalent)
            term[tuple(sl0)] *= 2.0
            term[tuple(sl_last)] *= 2.0
            out += term
    if nd == 2:
        a12 = A[..., 0, 1]
        if np.any(a12):
            out += deriv_centered(grid, a12 * deriv_centered(grid, u, 1), 0)
            out += deriv_centered(grid, a12 * deriv_centered(grid, u, 0), 1)
    return out


def upwind_dot_grad(grid: Grid, v: np.ndarray, u: np.ndarray) -> np.ndarray:
    """First-order upwind realization of v . grad u, biased toward +v.

    With this bias the matrix form carries nonnegative off-diagonal entries,
    and explicit stepping of u_t = v.grad u + ... is monotone under the CFL
    bound dt <= h/|v|.
    """
    out = np.zeros_like(u, dtype=float)
    for j in range(grid.ndim):
        h = grid.spacings[j]
        a = _ax(u, grid, j)
        vj = v[..., j]
        vpos = np.maximum(vj, 0.0)
        vneg = np.minimum(vj, 0.0)
        if grid.wrap[j]:
            dplus = (np.roll(u, -1, axis=a) - u) / h
            dminus = (u - np.roll(u, 1, axis=a)) / h
        else:
            dplus = (np.roll(u, -1, axis=a) - u) / h
            dminus = (u - np.roll(u, 1, axis=a)) / h
            sl_last = [slice(None)] * u.ndim
            sl_last[a] = -1
            sl0 = [slice(None)] * u.ndim
            sl0[a] = 0
            dplus[tuple(sl_last)] = dminus[tuple(sl_last)]
            dminus[tuple(sl0)] = dplus[tuple(sl0)]
        out += vpos * dplus + vneg * dminus
    return out


# ---------------------------------------------------------------------------
# sparse matrix realizations (kron composition of per-axis operators)


def _axis_matrix(shape: tuple[int, ...], axis: int, m1: sparse.spmatrix) -> sparse.csr_matrix:
    op = sparse.identity(1, format="csr")
    for j, n in enumerate(shape):
        blk = m1 if j == axis else sparse.identity(n, format="csr")
        op = sparse.kron(op, blk, format="csr")
    return op


def _d1_centered(n: int, h: float, wrap: bool) -> sparse.csr_matrix:
    if wrap:
        m = sparse.diags([np.full(n - 1, 1.0), np.full(n - 1, -1.0)], [1, -1], format="lil")
        m[0, n - 1] = -1.0
        m[n - 1, 0] = 1.0
    else:
        m = sparse.diags([np.full(n - 1, 1.0), np.full(n - 1, -1.0)], [1, -1], format="lil")
        m[0, 0], m[0, 1], m[0, 2] = -3.0, 4.0, -1.0
        m[n - 1, n - 1], m[n - 1, n - 2], m[n - 1, n - 3] = 3.0, -4.0, 1.0
    return (m / (2 * h)).tocsr()


def _d1_forward(n: int, h: float, wrap: bool) -> sparse.csr_matrix:
    m = sparse.diags([np.full(n, -1.0), np.full(n - 1, 1.0)], [0, 1], format="lil")
    if wrap:
        m[n - 1, 0] = 1.0
    else:
        m[n - 1, n - 1], m[n - 1, n - 2] = 1.0, -1.0  # fall back to backward
    return (m / h).tocsr()


def _d1_backward(n: int, h: float, wrap: bool) -> sparse.csr_matrix:
    m = sparse.diags([np.full(n, 1.0), np.full(n - 1, -1.0)], [0, -1], format="lil")
    if wrap:
        m[0, n - 1] = -1.0
    else:
        m[0, 0], m[0, 1] = -1.0, 1.0  # fall back to forward
    return (m / h).tocsr()


def _flux_pair(n: int, h: float, wrap: bool) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """(face-difference, node-difference) pair: S = Dm @ diag(a_face) @ Dp."""
    dp = sparse.diags([np.full(n, -1.0), np.full(n - 1, 1.0)], [0, 1], format="lil")
    dm = sparse.diags([np.full(n, 1.0), np.full(n - 1, -1.0)], [0, -1], format="lil")
    if wrap:
        dp[n - 1, 0] = 1.0
        dm[0, n - 1] = -1.0
    else:
        dp[n - 1, :] = 0.0  # no face beyond the wall
        dm[0, 0] = 1.0  # uses face 0 only; wall flux is zero
        dm[0, n - 1] = 0.0
    return (dm / h).tocsr(), (dp / h).tocsr()


def div_a_grad_matrix(grid: Grid, A: np.ndarray) -> sparse.csr_matrix:
    """Sparse matrix of the conservative div(A grad .) stencil."""
    shape = grid.shape
    n_total = grid.size
    out = sparse.csr_matrix((n_total, n_total))
    for j in range(grid.ndim):
        n, h = shape[j], grid.spacings[j]
        dm1, dp1 = _flux_pair(n, h, grid.wrap[j])
        dm = _axis_matrix(shape, j, dm1)
        dp = _axis_matrix(shape, j, dp1)
        aface = _face_average(grid, A[..., j, j], j).ravel()
        term = dm @ sparse.diags(aface) @ dp
        if not grid.wrap[j]:
            w = np.ones(shape)
            sl = [slice(None)] * grid.ndim
            sl[j] = 0
            w[tuple(sl)] = 2.0
            sl[j] = -1
            w[tuple(sl)] = 2.0
            term = sparse.diags(w.ravel()) @ term
        out = out + term
    if grid.ndim == 2:
        a12 = A[..., 0, 1].ravel()
        if np.any(a12):
            dc0 = _axis_matrix(shape, 0, _d1_centered(shape[0], grid.spacings[0], grid.wrap[0]))
            dc1 = _axis_matrix(shape, 1, _d1_centered(shape[1], grid.spacings[1], grid.wrap[1]))
            d12 = sparse.diags(a12)
            out = out + dc0 @ d12 @ dc1 + dc1 @ d12 @ dc0
    return out.tocsr()


def drift_matrix(grid: Grid, v: np.ndarray, upwind: bool) -> sparse.csr_matrix:
    """Sparse matrix of v . grad, upwinded toward +v or centered."""
    shape = grid.shape
    n_total = grid.size
    out = sparse.csr_matrix((n_total, n_total))
    for j in range(grid.ndim):
        n, h = shape[j], grid.spacings[j]
        vj = v[..., j].ravel()
        if not np.any(vj):
            continue
        if upwind:
            dp = _axis_matrix(shape, j, _d1_forward(n, h, grid.wrap[j]))
            dm = _axis_matrix(shape, j, _d1_backward(n, h, grid.wrap[j]))
            out = out + sparse.diags(np.maximum(vj, 0.0)) @ dp
            out = out + sparse.diags(np.minimum(vj, 0.0)) @ dm
        else:
            dc = _axis_matrix(shape, j, _d1_centered(n, h, grid.wrap[j]))
            out = out + sparse.diags(vj) @ dc
    return out.tocsr()


@dataclass(frozen=True)
class DiffOps:
    """Stencil set bound to one grid; all methods are pure."""

    grid: Grid

    def gradient(self, u):
        return gradient(self.grid, u)

    def divergence(self, field):
        return divergence(self.grid, field)

    def div_a_grad(self, A, u):
        return div_a_grad(self.grid, A, u)

    def upwind_dot_grad(self, v, u):
        return upwind_dot_grad(self.grid, v, u)


def diff_ops(grid: Grid) -> DiffOps:
    return DiffOps(grid)
