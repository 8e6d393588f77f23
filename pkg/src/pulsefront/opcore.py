"""Discrete operator cores: the exponentially tilted cell operator, the
travelling-front operator in the (s, x, y) frame, and the pointwise speed
functional evaluated on admissible test functions.

The speed functional of a test function phi is

    (F[phi] + q . grad phi + f(x,y,phi)) / phi_s  +  q . e~

where F[phi] collects the divergence-form second-order terms of the front
frame.  Its sup over (s, nodes) upper-bounds the front speed for any
admissible phi; on a true front profile it is constant and equal to the
speed.  s-derivatives of test functions are analytic (jet-based); the only
discrete derivatives taken here are spatial divergences of node-sampled
fields (spectral on periodic axes).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy import sparse

from . import cell
from .cell import Grid
from .errors import AdmissibilityError, TailError
from .media import AdvectionField, DiffusionField, Nonlinearity

PHI_S_FLOOR = 1e-14
MIN_S_SAMPLES = 129


@dataclass
class Jet:
    """Analytic derivatives of phi(s, x, y) on an (s-lattice x grid) sample."""

    phi: np.ndarray  # (ns, *shape)
    phi_s: np.ndarray
    phi_ss: np.ndarray
    grad: list[np.ndarray]  # spatial gradient, one (ns, *shape) array per axis
    grad_s: list[np.ndarray]  # spatial gradient of phi_s


class TestFunctionLike(Protocol):
    decay_rate: float

    def jet(self, grid: Grid, s: np.ndarray) -> Jet: ...

    def tail_fields(self, grid: Grid, A: DiffusionField, q: AdvectionField,
                    f: Nonlinearity): ...


@dataclass
class OperatorMatrix:
    """Sparse tilted-operator matrix with its assembly metadata."""

    matrix: sparse.csr_matrix
    lam: float
    upwind: bool
    grid: Grid


def tilted_operator(grid: Grid, A: DiffusionField, q: AdvectionField, zeta,
                    lam: float, upwind: bool = True) -> OperatorMatrix:
    """Assemble the lambda-tilted cell operator

        div(A grad .) + (q + 2 lam A e~) . grad .
          + [lam^2 e~Ae~ + lam div(A e~) + lam q.e~ + zeta] .

    First-order terms are upwinded on the combined drift (preserving the
    nonnegative off-diagonal structure the Perron iteration relies on) when
    ``upwind`` is set, centered otherwise.  On the cylinder the eigenfunction
    boundary condition reduces to homogeneous Neumann because the supported
    wall media satisfy nu.Ae~ = 0 there.
    """
    if lam < 0:
        raise ValueError(f"tilt parameter must be >= 0, got {lam}")
    e = grid.e_tilde
    zeta_arr = np.broadcast_to(np.asarray(zeta, dtype=float), grid.shape)
    a_e = A.times_vector(e)  # (*shape, N)
    diffusion = cell.div_a_grad_matrix(grid, A.samples)
    drift = cell.drift_matrix(grid, q.samples + 2 * lam * a_e, upwind)
    div_ae = cell.divergence(grid, [a_e[..., j] for j in range(grid.ndim)])
    zero_order = lam**2 * A.axial(e) + lam * div_ae + lam * q.along(e) + zeta_arr
    m = (diffusion + drift + sparse.diags(zero_order.ravel())).tocsr()
    return OperatorMatrix(m, float(lam), bool(upwind), grid)


def front_divergence_form(grid: Grid, A: DiffusionField, jet: Jet) -> np.ndarray:
    """The divergence-form second-order block of the front operator:

        div(A (grad phi + e~ phi_s)) + (e~Ae~) phi_ss + e~ . A grad(phi_s)
    """
    e = grid.e_tilde
    a = A.samples
    w = [
        sum(a[..., i, j] * jet.grad[j] for j in range(grid.ndim))
        + sum(a[..., i, j] * e[j] for j in range(grid.ndim)) * jet.phi_s
        for i in range(grid.ndim)
    ]
    out = cell.spectral_divergence(grid, w)
    out += A.axial(e) * jet.phi_ss
    for i in range(grid.ndim):
        out += e[i] * sum(a[..., i, j] * jet.grad_s[j] for j in range(grid.ndim))
    return out


def apply_front_operator(grid: Grid, A: DiffusionField, q: AdvectionField,
                         c: float, jet: Jet) -> np.ndarray:
    """Front operator at speed c: F[phi] + q.grad phi + (q.e~ - c) phi_s."""
    e = grid.e_tilde
    out = front_divergence_form(grid, A, jet)
    for j in range(grid.ndim):
        out += q.samples[..., j] * jet.grad[j]
    out += (q.along(e) - c) * jet.phi_s
    return out


@dataclass
class SpeedFunctionalSample:
    """Speed-functional values on the (s x nodes) lattice plus tail limits."""

    s: np.ndarray
    values: np.ndarray  # (ns, *shape)
    tail_neg: np.ndarray | None
    tail_pos: np.ndarray | None
    sup: float
    inf: float
    arg_sup: dict
    arg_inf: dict
    window_only: bool = False

    @property
    def spread(self) -> float:
        return self.sup - self.inf


def _functional_slices(grid, A, q, f, testfn, s: np.ndarray) -> np.ndarray:
    jet = testfn.jet(grid, s)
    if float(np.min(jet.phi_s)) <= PHI_S_FLOOR:
        raise AdmissibilityError(
            f"phi_s <= {PHI_S_FLOOR:g} at a sample; test function leaves the admissible set")
    num = front_divergence_form(grid, A, jet)
    for j in range(grid.ndim):
        num += q.samples[..., j] * jet.grad[j]
    num += f.value(jet.phi)
    return num / jet.phi_s + q.along(grid.e_tilde)


def _stabilized(vals: np.ndarray, scale: float) -> bool:
    """Do the slice extremes vary < 1% of scale over the outer tenth of the window?"""
    ns = vals.shape[0]
    m = max(3, ns // 10)
    flat = vals.reshape(ns, -1)
    for sl in (flat[:m], flat[-m:]):
        for seq in (sl.max(axis=1), sl.min(axis=1)):
            if float(np.max(seq) - np.min(seq)) > 0.01 * scale:
                return False
    return True


def evaluate_speed_functional(grid: Grid, A: DiffusionField, q: AdvectionField,
                              f: Nonlinearity, testfn: TestFunctionLike,
                              s_window: tuple[float, float] | None = None,
                              s_samples: int = MIN_S_SAMPLES,
                              refine_passes: int = 2) -> SpeedFunctionalSample:
    """Sample the speed functional of ``testfn`` over an s-lattice, attach the
    family's analytic tail limits, and refine around the running extrema.

    Raises AdmissibilityError if phi_s underflows anywhere, and TailError if
    the family gives no tail limits and the window values have not
    stabilized in its outer tenth.
    """
    if s_samples < MIN_S_SAMPLES:
        raise ValueError(f"s_samples must be >= {MIN_S_SAMPLES}")
    if s_window is None:
        half = 12.0 / testfn.decay_rate
        s_window = (-half, half)
    s = np.linspace(s_window[0], s_window[1], s_samples)
    values = _functional_slices(grid, A, q, f, testfn, s)

    tails = testfn.tail_fields(grid, A, q, f)
    window_only = tails is None
    if window_only:
        scale = float(np.max(np.abs(values)))
        if not _stabilized(values, max(scale, 1e-30)):
            raise TailError("no analytic tail limits and the window has not stabilized "
                            "within 1% over its outer tenth")
        tail_neg = tail_pos = None
    else:
        tail_neg, tail_pos = tails

    # two bisection passes around each running extremum
    for _ in range(refine_passes):
        for mode in ("sup", "inf"):
            flat = values.reshape(values.shape[0], -1)
            i = int(np.argmax(flat.max(axis=1)) if mode == "sup" else np.argmin(flat.min(axis=1)))
            new_s = []
            if i > 0:
                new_s.append(0.5 * (s[i - 1] + s[i]))
            if i < len(s) - 1:
                new_s.append(0.5 * (s[i] + s[i + 1]))
            if not new_s:
                continue
            extra = _functional_slices(grid, A, q, f, testfn, np.asarray(new_s))
            s = np.concatenate([s, new_s])
            values = np.concatenate([values, extra], axis=0)
            order = np.argsort(s)
            s, values = s[order], values[order]

    flat = values.reshape(values.shape[0], -1)
    i_sup = int(np.argmax(flat.max(axis=1)))
    i_inf = int(np.argmin(flat.min(axis=1)))
    sup_lattice = float(flat[i_sup].max())
    inf_lattice = float(flat[i_inf].min())
    sup, arg_sup = sup_lattice, {"where": "lattice", "s": float(s[i_sup]),
                                 "node": int(np.argmax(flat[i_sup]))}
    inf, arg_inf = inf_lattice, {"where": "lattice", "s": float(s[i_inf]),
                                 "node": int(np.argmin(flat[i_inf]))}
    if not window_only:
        for name, tail in (("tail_neg", tail_neg), ("tail_pos", tail_pos)):
            tmax, tmin = float(np.max(tail)), float(np.min(tail))
            if tmax > sup:
                sup, arg_sup = tmax, {"where": name, "node": int(np.argmax(tail))}
            if tmin < inf:
                inf, arg_inf = tmin, {"where": name, "node": int(np.argmin(tail))}

    return SpeedFunctionalSample(s, values, tail_neg, tail_pos, sup, inf,
                                 arg_sup, arg_inf, window_only)
