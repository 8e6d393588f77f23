"""Coefficient triple (diffusion A, advection q, reaction f): construction,
classification, and hypothesis validation.

All fields are stored as node samples on a cell grid; periodicity in the
periodic axes holds by construction (samples wrap).  The reaction term is
either a product h(x,y) * g(u) of a positive node field with a scalar
reaction curve, or an explicit callable.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np

from . import cell
from .cell import Geometry, Grid
from .errors import ClassError, MediaError

SYM_TOL = 1e-12
EXACT_TOL = 1e-12
CONSTRUCTED_DIV_TOL = 1e-10
EXPLICIT_DIV_TOL = 1e-6
MEAN_TOL = 1e-10
U_LATTICE = 64  # sampled u-points per hypothesis check
SLOPE_STEP = 1e-6  # one-sided differencing step for slope_at_one fallback


class NonlinKind(Enum):
    COMBUSTION = "combustion"
    ZFK = "zfk"
    KPP = "kpp"


def _sample(grid: Grid, fn_or_array, trailing: tuple[int, ...] = ()) -> np.ndarray:
    if callable(fn_or_array):
        out = np.asarray(fn_or_array(*grid.coords()), dtype=float)
    else:
        out = np.asarray(fn_or_array, dtype=float)
    want = grid.shape + trailing
    out = np.broadcast_to(out, want).astype(float).copy()
    return out


# ---------------------------------------------------------------------------
# diffusion


@dataclass
class DiffusionField:
    """Symmetric matrix field with declared ellipticity bounds."""

    samples: np.ndarray  # (*grid.shape, N, N)
    ellipticity_bounds: tuple[float, float]
    construction: str = "explicit"

    @staticmethod
    def constant(grid: Grid, a) -> "DiffusionField":
        N = grid.ndim
        a = np.asarray(a, dtype=float)
        mat = a * np.eye(N) if a.ndim == 0 else a
        if mat.shape != (N, N):
            raise MediaError(f"constant diffusion must be scalar or {N}x{N}")
        samples = np.broadcast_to(mat, grid.shape + (N, N)).copy()
        return DiffusionField(samples, _eig_bounds(samples), "constant")

    @staticmethod
    def isotropic(grid: Grid, scalar_field) -> "DiffusionField":
        N = grid.ndim
        a = _sample(grid, scalar_field)
        if np.min(a) <= 0:
            raise MediaError("isotropic diffusion requires a strictly positive field")
        samples = a[..., None, None] * np.eye(N)
        return DiffusionField(samples, (float(np.min(a)), float(np.max(a))), "isotropic")

    @staticmethod
    def from_function(grid: Grid, fn: Callable) -> "DiffusionField":
        N = grid.ndim
        samples = _sample(grid, fn, (N, N))
        return DiffusionField(samples, _eig_bounds(samples), "function")

    @staticmethod
    def explicit(grid: Grid, samples) -> "DiffusionField":
        N = grid.ndim
        samples = _sample(grid, samples, (N, N))
        return DiffusionField(samples, _eig_bounds(samples), "explicit")

    def axial(self, e_tilde: np.ndarray) -> np.ndarray:
        """Quadratic form e.A(x)e at every node."""
        return np.einsum("...ij,i,j->...", self.samples, e_tilde, e_tilde)

    def times_vector(self, e_tilde: np.ndarray) -> np.ndarray:
        """A(x) e at every node, shape (*shape, N)."""
        return np.einsum("...ij,j->...i", self.samples, e_tilde)

    def tiled(self, reps: int, axis: int) -> "DiffusionField":
        return replace(self, samples=np.tile(self.samples, _tile_reps(self.samples, reps, axis)))


def _eig_bounds(samples: np.ndarray) -> tuple[float, float]:
    sym = 0.5 * (samples + np.swapaxes(samples, -1, -2))
    w = np.linalg.eigvalsh(sym)
    return float(np.min(w)), float(np.max(w))


def _tile_reps(arr: np.ndarray, reps: int, axis: int) -> tuple[int, ...]:
    t = [1] * arr.ndim
    t[axis] = reps
    return tuple(t)


# ---------------------------------------------------------------------------
# advection


@dataclass
class AdvectionField:
    samples: np.ndarray  # (*grid.shape, N)
    construction: str = "explicit"

    @property
    def tol_div(self) -> float:
        return EXPLICIT_DIV_TOL if self.construction == "explicit" else CONSTRUCTED_DIV_TOL

    @staticmethod
    def zero(grid: Grid) -> "AdvectionField":
        return AdvectionField(np.zeros(grid.shape + (grid.ndim,)), "zero")

    @staticmethod
    def rotated_gradient(grid: Grid, stream) -> "AdvectionField":
        """q = (-d_y H, d_x H); divergence-free to round-off for the centered
        stencils (the mixed derivatives cancel exactly)."""
        if grid.ndim != 2 or not all(grid.wrap):
            raise MediaError("rotated-gradient advection needs a 2-D torus")
        H = _sample(grid, stream)
        q = np.stack([-cell.deriv_centered(grid, H, 1), cell.deriv_centered(grid, H, 0)], axis=-1)
        return AdvectionField(q, "rotated_gradient")

    @staticmethod
    def shear(grid: Grid, profile) -> "AdvectionField":
        """q = (v(transverse), 0, ...) with the node mean of v removed."""
        if grid.ndim != 2:
            raise MediaError("shear advection needs a 2-D grid")
        y = grid.axis_coordinates(1)
        v = np.asarray(profile(y) if callable(profile) else profile, dtype=float)
        v = np.broadcast_to(v, (grid.shape[1],)).astype(float)
        v = v - np.mean(np.broadcast_to(v, grid.shape))
        q = np.zeros(grid.shape + (2,))
        q[..., 0] = v[None, :]
        return AdvectionField(q, "shear")

    @staticmethod
    def explicit(grid: Grid, samples) -> "AdvectionField":
        return AdvectionField(_sample(grid, samples, (grid.ndim,)), "explicit")

    def along(self, e_tilde: np.ndarray) -> np.ndarray:
        return np.einsum("...i,i->...", self.samples, e_tilde)

    def tiled(self, reps: int, axis: int) -> "AdvectionField":
        return replace(self, samples=np.tile(self.samples, _tile_reps(self.samples, reps, axis)))


# ---------------------------------------------------------------------------
# reaction


@dataclass(frozen=True)
class ScalarReaction:
    """A scalar source curve g(u) with the metadata the speed routes need."""

    fn: Callable[[np.ndarray], np.ndarray]
    kind: NonlinKind
    lipschitz: float
    rho: float
    dg0: float  # one-sided slope at u=0+
    dg1: float  # one-sided slope at u=1-
    theta: float | None = None
    name: str = "custom"

    def __call__(self, u):
        return self.fn(np.asarray(u, dtype=float))


def kpp_quadratic(scale: float = 1.0) -> ScalarReaction:
    """g(u) = scale * u(1-u) on (0,1): the canonical KPP curve."""

    def fn(u):
        return np.where((u > 0) & (u < 1), scale * u * (1 - u), 0.0)

    return ScalarReaction(fn, NonlinKind.KPP, lipschitz=scale, rho=0.5,
                          dg0=scale, dg1=-scale, name="kpp_quadratic")


def combustion_linear(theta: float, scale: float = 1.0) -> ScalarReaction:
    """g(u) = scale * max(0, u-theta)(1-u): ignition at theta."""
    if not 0 < theta < 1:
        raise MediaError("ignition temperature must lie in (0,1)")

    def fn(u):
        return np.where((u > theta) & (u < 1), scale * np.maximum(u - theta, 0.0) * (1 - u), 0.0)

    return ScalarReaction(fn, NonlinKind.COMBUSTION, lipschitz=scale * (1 - theta),
                          rho=(1 - theta) / 2, dg0=0.0, dg1=-scale * (1 - theta),
                          theta=theta, name="combustion_linear")


def zfk_power(power: int = 2, scale: float = 1.0) -> ScalarReaction:
    """g(u) = scale * u^power (1-u): degenerate at 0 for power >= 2."""
    if power < 2:
        raise MediaError("zfk_power needs power >= 2 (power 1 is KPP)")

    def fn(u):
        return np.where((u > 0) & (u < 1), scale * u**power * (1 - u), 0.0)

    uu = np.linspace(0, 1, 4097)
    lip = float(np.max(np.abs(np.gradient(fn(uu), uu))))
    return ScalarReaction(fn, NonlinKind.ZFK, lipschitz=lip, rho=1.0 / (power + 1),
                          dg0=0.0, dg1=-scale, name=f"zfk_power{power}")


def scalar_reaction_from_callable(fn, kind: NonlinKind, theta=None, rho=None,
                                  name="custom") -> ScalarReaction:
    """Wrap a plain curve; slopes and the Lipschitz bound are estimated
    by one-sided differencing (step 1e-6) and a dense difference scan."""
    dg0 = float(fn(np.array(SLOPE_STEP)) / SLOPE_STEP)
    dg1 = float(-fn(np.array(1 - SLOPE_STEP)) / SLOPE_STEP)
    uu = np.linspace(0, 1, 8193)
    gu = fn(uu)
    lip = float(np.max(np.abs(np.diff(gu) / np.diff(uu))))
    if rho is None:
        # largest tail [1-rho, 1] on which the samples are non-increasing
        dec = np.diff(gu) <= 1e-14
        idx = len(dec)
        while idx > 0 and dec[idx - 1]:
            idx -= 1
        rho = max(float(1 - uu[idx]), 1.0 / len(uu))
    return ScalarReaction(fn, kind, lipschitz=lip, rho=rho, dg0=dg0, dg1=dg1,
                          theta=theta, name=name)


def smoothstep_cutoff(u: np.ndarray, theta: float) -> np.ndarray:
    """Cubic smoothstep ramp: 0 below theta, 1 above 2*theta, C^1 monotone."""
    r = np.clip((np.asarray(u, dtype=float) - theta) / theta, 0.0, 1.0)
    return 3 * r**2 - 2 * r**3


@dataclass
class Nonlinearity:
    """Reaction term f(x,y,u) sampled against a grid.

    ``value(u)`` broadcasts: u may carry leading batch axes over the grid
    shape.  ``zeta`` is the linearization slope at u=0 (zero field for
    combustion) and ``slope_at_one`` the one-sided slope at u=1.
    """

    grid_shape: tuple[int, ...]
    kind: NonlinKind
    form: str  # homogeneous | product | explicit
    zeta: np.ndarray
    slope_at_one: np.ndarray
    lipschitz_bound: float
    rho: float
    theta: float | None = None
    reaction: ScalarReaction | None = None
    h: np.ndarray | None = None
    value_fn: Callable | None = None
    name: str = "reaction"

    def value(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.value_fn is not None:
            return self.value_fn(u)
        g = self.reaction(u)
        return g if self.h is None else self.h * g

    def tiled(self, reps: int, axis: int) -> "Nonlinearity":
        if self.value_fn is not None:
            raise MediaError("explicit nonlinearities cannot be tiled onto a strip")
        shape = list(self.grid_shape)
        shape[axis] *= reps
        h = None if self.h is None else np.tile(self.h, _tile_reps(self.h, reps, axis))
        return replace(self, grid_shape=tuple(shape), h=h,
                       zeta=np.tile(self.zeta, _tile_reps(self.zeta, reps, axis)),
                       slope_at_one=np.tile(self.slope_at_one, _tile_reps(self.slope_at_one, reps, axis)))


def homogeneous_nonlinearity(grid: Grid, g: ScalarReaction) -> Nonlinearity:
    shape = grid.shape
    return Nonlinearity(shape, g.kind, "homogeneous",
                        zeta=np.full(shape, g.dg0), slope_at_one=np.full(shape, g.dg1),
                        lipschitz_bound=g.lipschitz, rho=g.rho, theta=g.theta,
                        reaction=g, name=g.name)


def make_product_nonlinearity(grid: Grid, h, g: ScalarReaction,
                              class_hint: NonlinKind | None = None) -> Nonlinearity:
    """f(x,y,u) = h(x,y) g(u) with h > 0 bounded periodic.

    The class is inherited from g unless a hint overrides it (the validator
    then judges whether the claim holds).
    """
    h_arr = _sample(grid, h)
    if np.min(h_arr) <= 0:
        raise MediaError("product nonlinearity requires h > 0 at every node")
    if not np.all(np.isfinite(h_arr)):
        raise MediaError("product nonlinearity requires bounded h")
    kind = class_hint or g.kind
    return Nonlinearity(grid.shape, kind, "product",
                        zeta=h_arr * g.dg0, slope_at_one=h_arr * g.dg1,
                        lipschitz_bound=float(np.max(h_arr)) * g.lipschitz,
                        rho=g.rho, theta=g.theta, reaction=g, h=h_arr,
                        name=f"{g.name}*h")


def explicit_nonlinearity(grid: Grid, value_fn, kind: NonlinKind, zeta, slope_at_one,
                          lipschitz_bound: float, rho: float, theta=None,
                          name="explicit") -> Nonlinearity:
    return Nonlinearity(grid.shape, kind, "explicit",
                        zeta=_sample(grid, zeta), slope_at_one=_sample(grid, slope_at_one),
                        lipschitz_bound=lipschitz_bound, rho=rho, theta=theta,
                        value_fn=value_fn, name=name)


def regularize_combustion(f: Nonlinearity, theta: float) -> Nonlinearity:
    """Cut the source off near u=0: f_theta = f * smoothstep ramp on [theta, 2*theta].

    Output is a combustion nonlinearity with ignition temperature theta,
    pointwise below f, and non-increasing pointwise in theta.
    """
    if not 0 < theta < 0.5:
        raise MediaError("cut-off temperature must lie in (0, 1/2)")
    if f.kind is NonlinKind.COMBUSTION:
        raise ClassError("cut-off is defined for KPP/ZFK sources, not combustion")
    shape = f.grid_shape
    rho = min(f.rho, 1 - 2 * theta)
    if f.value_fn is not None:
        base_fn = f.value_fn
        fn = lambda u: base_fn(u) * smoothstep_cutoff(u, theta)
        sup_f = float(np.max(np.abs(fn(np.linspace(theta, 2 * theta, 65)))))
        lip = f.lipschitz_bound + 1.5 / theta * sup_f
        return replace(f, kind=NonlinKind.COMBUSTION, value_fn=fn, theta=theta, rho=rho,
                       zeta=np.zeros(shape), lipschitz_bound=lip,
                       name=f"{f.name}_cut{theta:g}")
    g = f.reaction

    def g_cut(u, _g=g.fn, _t=theta):
        return _g(u) * smoothstep_cutoff(u, _t)

    strip = np.linspace(theta, 2 * theta, 65)
    sup_g = float(np.max(g.fn(strip)))
    lip_g = g.lipschitz + 1.5 / theta * sup_g
    new_g = ScalarReaction(g_cut, NonlinKind.COMBUSTION, lipschitz=lip_g, rho=rho,
                           dg0=0.0, dg1=g.dg1, theta=theta, name=f"{g.name}_cut{theta:g}")
    h_max = 1.0 if f.h is None else float(np.max(f.h))
    return replace(f, kind=NonlinKind.COMBUSTION, reaction=new_g, theta=theta, rho=rho,
                   zeta=np.zeros(shape), lipschitz_bound=h_max * lip_g,
                   name=f"{f.name}_cut{theta:g}")


# ---------------------------------------------------------------------------
# bundle + validation


@dataclass
class Media:
    grid: Grid
    diffusion: DiffusionField
    advection: AdvectionField
    reaction: Nonlinearity


@dataclass
class HypothesisCheck:
    name: str
    ok: bool
    residual: float
    tol: float
    note: str = ""


@dataclass
class ValidationReport:
    checks: list[HypothesisCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.ok]

    def add(self, name, ok, residual, tol, note=""):
        self.checks.append(HypothesisCheck(name, bool(ok), float(residual), float(tol), note))

    def format(self) -> str:
        lines = []
        for c in self.checks:
            status = "PASS" if c.ok else "FAIL"
            extra = f"  ({c.note})" if c.note else ""
            lines.append(f"{status}  {c.name:<32s} residual={c.residual:.3e} tol={c.tol:.3e}{extra}")
        verdict = "ALL HYPOTHESES PASS" if self.passed else "HYPOTHESIS FAILURES: " + ", ".join(self.failures())
        return "\n".join(lines + [verdict])


def _unit_test_vectors(N: int) -> np.ndarray:
    if N == 1:
        return np.array([[1.0], [-1.0]] * 8)
    ang = np.arange(16) * (2 * np.pi / 16)
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def validate_media(grid: Grid, A: DiffusionField, q: AdvectionField,
                   f: Nonlinearity) -> ValidationReport:
    """Check every structural hypothesis on the sampled coefficients.

    Failures are reported, never raised; the report lists each hypothesis
    with its measured residual.
    """
    rep = ValidationReport()
    N = grid.ndim

    asym = float(np.max(np.abs(A.samples - np.swapaxes(A.samples, -1, -2))))
    rep.add("diffusion.symmetry", asym <= SYM_TOL, asym, SYM_TOL)

    a1, a2 = A.ellipticity_bounds
    xis = _unit_test_vectors(N)
    qf = np.einsum("...ij,ki,kj->k...", A.samples, xis, xis)
    viol = max(float(a1 - np.min(qf)), float(np.max(qf) - a2), 0.0)
    ok_ell = viol <= 1e-10 and a1 > 0
    rep.add("diffusion.ellipticity", ok_ell, viol if a1 > 0 else -a1, 1e-10,
            note=f"declared [{a1:.4g}, {a2:.4g}]")

    if grid.spec.geometry is Geometry.CYLINDER and N == 2:
        walls = np.abs(A.samples[:, [0, -1], 0, 1])
        wall_off = float(np.max(walls)) if walls.size else 0.0
        rep.add("diffusion.wall_offdiagonal", wall_off <= SYM_TOL, wall_off, SYM_TOL,
                note="A must be diagonal at the cylinder walls")

    divq = cell.divergence(grid, [q.samples[..., j] for j in range(N)])
    max_div = float(np.max(np.abs(divq)))
    rep.add("advection.divergence_free", max_div <= q.tol_div, max_div, q.tol_div)

    d = grid.spec.dim_periodic
    mean_res = max(float(abs(np.mean(q.samples[..., i]))) for i in range(d))
    rep.add("advection.mean_zero", mean_res <= MEAN_TOL, mean_res, MEAN_TOL)

    if grid.spec.geometry is Geometry.CYLINDER:
        wall_q = float(np.max(np.abs(q.samples[:, [0, -1], 1])))
        rep.add("advection.wall_normal", wall_q <= SYM_TOL, wall_q, SYM_TOL)

    for s in (-0.5, 0.0, 1.0, 1.25):
        r = float(np.max(np.abs(f.value(np.full((1,) + grid.shape, s)))))
        rep.add(f"reaction.vanishes_at_u={s:g}", r <= EXACT_TOL, r, EXACT_TOL)

    uu = 1 - f.rho + f.rho * np.arange(U_LATTICE + 1) / U_LATTICE
    fv = f.value(uu.reshape((-1,) + (1,) * N) * np.ones((1,) + grid.shape))
    inc = float(np.max(np.diff(fv, axis=0)))
    rep.add("reaction.monotone_tail", inc <= EXACT_TOL, max(inc, 0.0), EXACT_TOL,
            note=f"on [1-rho,1], rho={f.rho:g}")

    interior = (np.arange(U_LATTICE) + 0.5) / U_LATTICE
    fi = f.value(interior.reshape((-1,) + (1,) * N) * np.ones((1,) + grid.shape))

    if f.kind is NonlinKind.COMBUSTION:
        theta = f.theta if f.theta is not None else 0.0
        low = theta * np.arange(U_LATTICE + 1) / U_LATTICE
        r = float(np.max(np.abs(f.value(low.reshape((-1,) + (1,) * N) * np.ones((1,) + grid.shape)))))
        rep.add("reaction.ignition_zero", r <= EXACT_TOL, r, EXACT_TOL,
                note=f"theta={theta:g}")
        above = theta + (1 - theta) * interior
        fa = f.value(above.reshape((-1,) + (1,) * N) * np.ones((1,) + grid.shape))
        worst = float(np.min(fa.reshape(fa.shape[0], -1).max(axis=1)))
        rep.add("reaction.active_above_ignition", worst > 0, worst, 0.0)
    else:
        worst = float(np.min(fi.reshape(fi.shape[0], -1).max(axis=1)))
        rep.add("reaction.active_interior", worst > 0, worst, 0.0)

    if f.kind is NonlinKind.KPP:
        zmin = float(np.min(f.zeta))
        rep.add("reaction.nondegenerate", zmin > 0, zmin, 0.0,
                note="min over nodes of the slope at u=0")
        bound = f.zeta * interior.reshape((-1,) + (1,) * N)
        margin = float(np.min(bound - fi))
        pos = float(np.min(fi))
        ok = (margin >= -EXACT_TOL) and (pos > 0)
        rep.add("reaction.kpp_inequality", ok, min(margin, pos), -EXACT_TOL,
                note="0 < f <= zeta*u on the sampled lattice")

    return rep
