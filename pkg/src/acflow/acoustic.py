"""Linear acoustic sub-model with a time-dependent compressibility.

Integrates the first-order system

    u_t + grad p = 0,        eps(t) p_t + div u = 0

on a periodic grid with the implicit midpoint rule: both fields are
advanced through their averages and the coefficient is frozen at the
half step, eps_m = eps(t_n + k/2).  Eliminating u_{n+1} gives one SPD
scalar solve per step,

    [eps_m I - (k^2/4) lap_c] p_{n+1}
        = eps_m p_n + (k^2/4) lap_c p_n - k div u_n,

with lap_c the cell-centered divergence-of-gradient; the velocity then
follows from u_{n+1} = u_n - (k/2) grad(p_n + p_{n+1}).

Two energies are tracked.  The wave energy of the induced scalar
equation (eps p_t)_t - lap p = 0 is

    W = int eps p_t^2 + |grad p|^2,     d/dt W = -int eps_t p_t^2,

evaluated through the exact substitution p_t = -div u / eps so no time
differencing enters; for constant eps the midpoint rule conserves this
quadratic invariant exactly (up to the linear-solver tolerance), so an
O(k^2) drift is only visible in the finite-difference reconstruction
``wave_energy_fd`` that rebuilds p_t from the p series.  The model
energy is E = 1/2 int |u|^2 + eps p^2 with d/dt E = 1/2 int eps_t p^2:
growing eps feeds energy into the pressure component and shrinking eps
removes it.  Both rate identities are checked by centered differences
over a three-state window.

The time-rescaling diagnostic s(t) = int_0^t eps(tau)^(-1/2) dtau maps
the variable-coefficient wave equation onto unit speed; it is provided
as a reporting utility only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np

from .grid import (BC, GridSpec, ScalarField, VectorField, divergence,
                   gradient, inner, l2norm)
from .stepper import KrylovBreakdownError, SolverParams


@dataclass(frozen=True)
class AcousticState:
    u: VectorField
    p: ScalarField
    t: float

    def __post_init__(self) -> None:
        if self.u.grid is not self.p.grid and self.u.grid != self.p.grid:
            raise ValueError("velocity and pressure grids differ")
        if not np.isfinite(self.t):
            raise ValueError("time must be finite")


def _cell_laplacian(p: ScalarField) -> ScalarField:
    return divergence(gradient(p))


def _scalar_cg(eps_m: float, c: float, rhs: ScalarField,
               params: SolverParams) -> Tuple[ScalarField, int]:
    """CG for (eps_m I - c lap_c) p = rhs on cell centers."""

    def apply_op(q: ScalarField) -> ScalarField:
        return eps_m * q - c * _cell_laplacian(q)

    bnorm = l2norm(rhs)
    if not np.isfinite(bnorm):
        raise ValueError("acoustic right-hand side is not finite")
    if bnorm == 0.0:
        return ScalarField(rhs.grid, np.zeros_like(rhs.values)), 0
    x = (1.0 / eps_m) * rhs
    r = rhs - apply_op(x)
    rs = inner(r, r)
    if math.sqrt(rs) <= params.krylov_tol * bnorm:
        return x, 0
    p = r.copy()
    for it in range(1, params.krylov_max + 1):
        ap = apply_op(p)
        denom = inner(p, ap)
        if not (denom > 0.0 and np.isfinite(denom)):
            raise KrylovBreakdownError(
                f"acoustic solve lost positive definiteness (p.Ap={denom:g})")
        a = rs / denom
        x = x + a * p
        r = r - a * ap
        rs_new = inner(r, r)
        if not np.isfinite(rs_new):
            raise KrylovBreakdownError("acoustic residual overflowed")
        if math.sqrt(rs_new) <= params.krylov_tol * bnorm:
            return x, it
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise KrylovBreakdownError(
        f"acoustic solve: no convergence in {params.krylov_max} iterations")


def acoustic_step(state: AcousticState, eps_fn: Callable[[float], float],
                  k: float, params: SolverParams) -> AcousticState:
    """One implicit-midpoint step of the acoustic system."""
    if not (k > 0.0 and math.isfinite(k)):
        raise ValueError("step size must be finite and positive")
    if state.u.grid.bc is not BC.PERIODIC:
        raise ValueError("acoustic model requires a periodic grid")
    eps_m = eps_fn(state.t + 0.5 * k)
    if not (eps_m > 0.0 and math.isfinite(eps_m)):
        raise ValueError(f"eps({state.t + 0.5 * k:g}) = {eps_m!r} must be positive")
    c = 0.25 * k * k
    rhs = eps_m * state.p + c * _cell_laplacian(state.p) \
        - k * divergence(state.u)
    p_next, _ = _scalar_cg(eps_m, c, rhs, params)
    u_next = state.u - (0.5 * k) * gradient(state.p + p_next)
    return AcousticState(u=u_next, p=p_next, t=state.t + k)


def integrate(state: AcousticState, eps_fn, k: float, n_steps: int,
              params: SolverParams):
    """Yield the n_steps states after the initial one."""
    for _ in range(n_steps):
        state = acoustic_step(state, eps_fn, k, params)
        yield state


def wave_energy(state: AcousticState, eps: float) -> float:
    """W = int eps p_t^2 + |grad p|^2 with p_t = -div u / eps (exact)."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    d = divergence(state.u)
    gp = gradient(state.p)
    return inner(d, d) / eps + inner(gp, gp)


def wave_energy_fd(prev: AcousticState, curr: AcousticState,
                   next_: AcousticState, eps: float) -> float:
    """W with p_t rebuilt by centered differences of the pressure series.

    Carries the integrator's O(k^2) reconstruction error, so its drift
    shrinks fourfold under step halving even when the exact W is flat.
    """
    dt = next_.t - prev.t
    if dt <= 0.0:
        raise ValueError("states must be time-ordered")
    p_t = (1.0 / dt) * (next_.p - prev.p)
    gp = gradient(curr.p)
    return eps * inner(p_t, p_t) + inner(gp, gp)


def model_energy(state: AcousticState, eps: float) -> float:
    """E = 1/2 int |u|^2 + eps p^2."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    return 0.5 * (inner(state.u, state.u) + eps * inner(state.p, state.p))


def _eps_t_fd(eps_fn, t: float, dt: float) -> float:
    return (eps_fn(t + dt) - eps_fn(t - dt)) / (2.0 * dt)


@dataclass(frozen=True)
class RateReport:
    value: float
    rate_lhs: float
    rate_rhs: float

    @property
    def residual(self) -> float:
        return self.rate_lhs - self.rate_rhs


def wave_rate_report(prev: AcousticState, curr: AcousticState,
                     next_: AcousticState, eps_fn) -> RateReport:
    """Centered check of d/dt W = -int eps_t p_t^2 at the middle state."""
    dt = 0.5 * (next_.t - prev.t)
    eps_c = eps_fn(curr.t)
    w_prev = wave_energy(prev, eps_fn(prev.t))
    w_next = wave_energy(next_, eps_fn(next_.t))
    lhs = (w_next - w_prev) / (2.0 * dt)
    p_t = (-1.0 / eps_c) * divergence(curr.u)
    rhs = -_eps_t_fd(eps_fn, curr.t, dt) * inner(p_t, p_t)
    return RateReport(value=wave_energy(curr, eps_c), rate_lhs=lhs, rate_rhs=rhs)


def model_rate_report(prev: AcousticState, curr: AcousticState,
                      next_: AcousticState, eps_fn) -> RateReport:
    """Centered check of d/dt E = 1/2 int eps_t p^2 at the middle state."""
    dt = 0.5 * (next_.t - prev.t)
    e_prev = model_energy(prev, eps_fn(prev.t))
    e_next = model_energy(next_, eps_fn(next_.t))
    lhs = (e_next - e_prev) / (2.0 * dt)
    rhs = 0.5 * _eps_t_fd(eps_fn, curr.t, dt) * inner(curr.p, curr.p)
    return RateReport(value=model_energy(curr, eps_fn(curr.t)),
                      rate_lhs=lhs, rate_rhs=rhs)


def rescaled_time(eps_samples: Sequence[float], dt: float) -> np.ndarray:
    """Trapezoid cumulative s(t) = int eps^(-1/2); s[0] = 0."""
    eps = np.asarray(eps_samples, dtype=float)
    if eps.ndim != 1 or eps.size < 2:
        raise ValueError("need at least two eps samples")
    if not (dt > 0.0 and math.isfinite(dt)):
        raise ValueError("dt must be finite and positive")
    if not np.all(eps > 0.0):
        raise ValueError("eps samples must be positive")
    integrand = 1.0 / np.sqrt(eps)
    s = np.zeros_like(integrand)
    s[1:] = np.cumsum(0.5 * dt * (integrand[1:] + integrand[:-1]))
    return s


def standing_wave_state(grid: GridSpec, mode: int, eps: float,
                        amplitude: float = 1.0) -> AcousticState:
    """p = amplitude cos(2 pi m x), u = 0: an eigenmode standing wave.

    Sampled cosines are exact eigenvectors of the discrete cell
    Laplacian, so the semi-discrete evolution is p(t) = p(0) cos(w_h t)
    with w_h = sqrt(lambda_h / eps); see ``discrete_frequency``.
    """
    if grid.bc is not BC.PERIODIC:
        raise ValueError("standing wave init requires a periodic grid")
    x = grid.cell_x()
    y = grid.cell_y()
    vals = amplitude * np.cos(2.0 * math.pi * mode * x / grid.lx) \
        + 0.0 * y
    p = ScalarField(grid, vals)
    u = VectorField(grid, np.zeros((grid.nx + 1, grid.ny)),
                    np.zeros((grid.nx, grid.ny + 1)))
    return AcousticState(u=u, p=p, t=0.0)


def discrete_frequency(grid: GridSpec, mode: int, eps: float) -> float:
    """Frequency of the sampled cos(2 pi m x / lx) mode under lap_c."""
    hx = grid.hx
    lam = 2.0 * (1.0 - math.cos(2.0 * math.pi * mode * hx / grid.lx)) / (hx * hx)
    return math.sqrt(lam / eps)
