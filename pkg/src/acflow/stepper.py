"""Artificial-compression time steppers.

All three schemes advance (u, p) by one step of size k, relaxing the
incompressibility constraint through a penalty parameter eps > 0 that may
change from step to step.  Eliminating the new pressure from the discrete
continuity equation leaves one symmetric positive definite velocity solve per
nonlinear iteration,

    (alpha*I - nu*lap - gamma*grad_div) u_new = rhs,

followed by an exact algebraic pressure update.  Per scheme:

standard     continuity  eps_np1*(p_np1 - p_n)/k + div u_np1 = g
             gamma = k/eps_np1, explicit pressure coefficient c_p = 1,
             p_np1 = p_n + (k/eps_np1)*(g - div u_np1)

new          continuity  ((eps_np1*p_np1 - eps_n*p_n) + eps_n*(p_np1 - p_n))/(2k)
                          + div u_np1 = g
             gamma = 2k/(eps_n + eps_np1), c_p = 2*eps_n/(eps_n + eps_np1),
             p_np1 = c_p*p_n + gamma*(g - div u_np1)
             (reduces to the standard scheme when eps is constant)

bdf2_new     same continuity as "new"; the time derivative in momentum uses
             the variable-step two-step stencil with ratio tau = k_np1/k_n:
             ((2*tau+1)/(tau+1)*u_np1 - (tau+1)*u_n + tau^2/(tau+1)*u_nm1)/k

The convective term N(w; u) is frozen at the previous Picard iterate and moved
entirely to the right-hand side, so each inner solve stays SPD.  Convergence
is declared on the relative l2 norm of the velocity update.  An optional
under-relaxation factor picard_damping in (0, 1] blends each sweep with the
previous iterate; 1.0 reproduces the plain iteration bit for bit.  g is an
optional continuity source used by manufactured-solution runs; it defaults
to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .convection import NonlinearityForm, convective
from .grid import (ScalarField, VectorField, apply_bc, divergence, grad_div,
                   gradient, inner, l2norm, laplacian)


class PicardDivergedError(RuntimeError):
    """Picard update norm still above tolerance after the iteration budget."""


class KrylovBreakdownError(RuntimeError):
    """Conjugate gradients exhausted its iteration budget."""


class MissingHistoryError(ValueError):
    """Two-step scheme invoked without u_nm1 / k_n history."""


@dataclass
class SolverParams:
    picard_tol: float = 1e-11
    picard_max: int = 100
    krylov_tol: float = 1e-11
    krylov_max: int = 20000
    picard_damping: float = 1.0

    def __post_init__(self):
        if self.picard_tol <= 0 or self.krylov_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.picard_max < 1 or self.krylov_max < 1:
            raise ValueError("iteration budgets must be at least 1")
        if not 0.0 < self.picard_damping <= 1.0:
            raise ValueError("picard_damping must lie in (0, 1]")


@dataclass
class StepInputs:
    u_n: VectorField
    p_n: ScalarField
    k_np1: float
    eps_n: float
    eps_np1: float
    nu: float
    f_np1: Optional[VectorField] = None
    g_np1: Optional[ScalarField] = None
    form: NonlinearityForm = NonlinearityForm.SKEW
    u_nm1: Optional[VectorField] = None
    k_n: Optional[float] = None

    def validate(self):
        if self.k_np1 <= 0:
            raise ValueError(f"step size must be positive, got {self.k_np1}")
        if self.eps_n <= 0 or self.eps_np1 <= 0:
            raise ValueError("relaxation parameters must stay positive")
        if self.nu < 0:
            raise ValueError("viscosity must be nonnegative")
        if self.u_n.grid != self.p_n.grid:
            raise ValueError("velocity and pressure grids differ")
        for name in ("u_n", "u_nm1", "f_np1"):
            fld = getattr(self, name)
            if fld is not None and not (np.all(np.isfinite(fld.ux))
                                        and np.all(np.isfinite(fld.uy))):
                raise ValueError(f"{name} contains non-finite entries")
        if not np.all(np.isfinite(self.p_n.values)):
            raise ValueError("p_n contains non-finite entries")


@dataclass
class StepResult:
    u_np1: VectorField
    p_np1: ScalarField
    picard_iters: int
    krylov_iters: int
    picard_residual: float


def helmholtz_solve(alpha: float, nu: float, gamma: float, rhs: VectorField,
                    params: SolverParams,
                    x0: Optional[VectorField] = None) -> tuple[VectorField, int]:
    """Matrix-free CG for (alpha*I - nu*lap - gamma*grad_div) u = rhs.

    The operator is SPD on the admissible subspace for alpha > 0, nu >= 0,
    gamma >= 0.  Convergence: |residual| <= krylov_tol * |rhs|.  Returns the
    solution and the iteration count.
    """
    if alpha <= 0 or nu < 0 or gamma < 0:
        raise ValueError("operator coefficients must satisfy alpha>0, nu>=0, gamma>=0")

    def apply_op(v):
        out = alpha * v
        if nu != 0.0:
            out = out - nu * laplacian(v)
        if gamma != 0.0:
            out = out - gamma * grad_div(v)
        return out

    bnorm = l2norm(rhs)
    if not np.isfinite(bnorm):
        raise ValueError("helmholtz right-hand side is not finite")
    if bnorm == 0.0:
        g = rhs.grid
        return VectorField(g, np.zeros_like(rhs.ux), np.zeros_like(rhs.uy)), 0
    x = apply_bc(x0.copy()) if x0 is not None else 0.0 * rhs
    r = rhs - apply_op(x)
    rs = inner(r, r)
    if not np.isfinite(rs):
        # a wild initial guess is worse than none
        x = 0.0 * rhs
        r = rhs.copy()
        rs = inner(r, r)
    if np.sqrt(rs) <= params.krylov_tol * bnorm:
        return x, 0
    p = r.copy()
    for it in range(1, params.krylov_max + 1):
        ap = apply_op(p)
        denom = inner(p, ap)
        if not (denom > 0.0 and np.isfinite(denom)):
            raise KrylovBreakdownError(
                f"lost positive definiteness at iteration {it} (p.Ap = {denom:g})")
        a = rs / denom
        x = x + a * p
        r = r - a * ap
        rs_new = inner(r, r)
        if not np.isfinite(rs_new):
            raise KrylovBreakdownError(
                f"residual overflowed at iteration {it}")
        if np.sqrt(rs_new) <= params.krylov_tol * bnorm:
            return x, it
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise KrylovBreakdownError(
        f"no convergence in {params.krylov_max} iterations "
        f"(relative residual {np.sqrt(rs) / bnorm:.3e})")


def _picard_solve(inputs: StepInputs, params: SolverParams, alpha: float,
                  gamma: float, rhs_const: VectorField):
    """Fixed-point iteration on the frozen-convection momentum system.

    Any solution of the nonlinear system obeys alpha*|u| <= |rhs| (pair
    with u; the convective term is energy-neutral and the elliptic terms
    are nonnegative), so an iterate far outside that ball proves the
    iteration has left the basin and the step size is too large.
    """
    w = inputs.u_n.copy()
    ball = 10.0 * max(l2norm(rhs_const) / alpha, l2norm(inputs.u_n), 1e-30)
    theta = params.picard_damping
    krylov_total = 0
    residual = np.inf
    for m in range(1, params.picard_max + 1):
        rhs = rhs_const - convective(inputs.form, w, w)
        u_new, iters = helmholtz_solve(alpha, inputs.nu, gamma, rhs, params, x0=w)
        krylov_total += iters
        if theta != 1.0:
            # under-relaxation: at convection-dominated states the frozen-
            # convection map has eigenvalues outside the unit disk but away
            # from +1, so a convex combination restores the contraction
            u_new = w + theta * (u_new - w)
        unorm = l2norm(u_new)
        if not np.isfinite(unorm) or unorm > ball:
            raise PicardDivergedError(
                f"iterate norm {unorm:.3e} left the solution ball "
                f"{ball:.3e} at iteration {m}; reduce the step size")
        residual = l2norm(u_new - w) / (unorm if unorm > 0.0 else 1.0)
        w = u_new
        if residual <= params.picard_tol:
            return w, m, krylov_total, residual
    raise PicardDivergedError(
        f"update norm {residual:.3e} above {params.picard_tol:g} "
        f"after {params.picard_max} iterations")


def _momentum_rhs_base(inputs: StepInputs, c_p: float, gamma: float) -> VectorField:
    rhs = (1.0 / inputs.k_np1) * inputs.u_n
    if inputs.f_np1 is not None:
        rhs = rhs + inputs.f_np1
    rhs = rhs - c_p * gradient(inputs.p_n)
    if inputs.g_np1 is not None:
        rhs = rhs - gamma * gradient(inputs.g_np1)
    return apply_bc(rhs)


def _pressure_update(inputs: StepInputs, u_np1: VectorField, c_p: float,
                     gamma: float) -> ScalarField:
    p = c_p * inputs.p_n - gamma * divergence(u_np1)
    if inputs.g_np1 is not None:
        p = p + gamma * inputs.g_np1
    return p


def step_standard(inputs: StepInputs, params: SolverParams) -> StepResult:
    """Backward-Euler momentum with fully relaxed continuity."""
    inputs.validate()
    k = inputs.k_np1
    gamma = k / inputs.eps_np1
    c_p = 1.0
    rhs = _momentum_rhs_base(inputs, c_p, gamma)
    u_np1, m, kr, res = _picard_solve(inputs, params, 1.0 / k, gamma, rhs)
    p_np1 = _pressure_update(inputs, u_np1, c_p, gamma)
    return StepResult(u_np1, p_np1, m, kr, res)


def step_new(inputs: StepInputs, params: SolverParams) -> StepResult:
    """Backward-Euler momentum with the averaged two-level continuity."""
    inputs.validate()
    k = inputs.k_np1
    esum = inputs.eps_n + inputs.eps_np1
    gamma = 2.0 * k / esum
    c_p = 2.0 * inputs.eps_n / esum
    rhs = _momentum_rhs_base(inputs, c_p, gamma)
    u_np1, m, kr, res = _picard_solve(inputs, params, 1.0 / k, gamma, rhs)
    p_np1 = _pressure_update(inputs, u_np1, c_p, gamma)
    return StepResult(u_np1, p_np1, m, kr, res)


def bdf2_weights(tau: float) -> tuple[float, float, float]:
    """Variable-step two-step weights (w_np1, w_n, w_nm1); divide by k_np1.

    tau = k_np1/k_n; tau = 1 recovers (3/2, -2, 1/2).
    """
    if tau <= 0:
        raise ValueError("step ratio must be positive")
    return ((2.0 * tau + 1.0) / (tau + 1.0), -(tau + 1.0), tau * tau / (tau + 1.0))


def step_bdf2_new(inputs: StepInputs, params: SolverParams) -> StepResult:
    """Two-step momentum stencil with the averaged two-level continuity."""
    inputs.validate()
    if inputs.u_nm1 is None or inputs.k_n is None:
        raise MissingHistoryError("step_bdf2_new needs u_nm1 and k_n")
    if inputs.k_n <= 0:
        raise ValueError("previous step size must be positive")
    k = inputs.k_np1
    tau = k / inputs.k_n
    w1, w0, wm1 = bdf2_weights(tau)
    esum = inputs.eps_n + inputs.eps_np1
    gamma = 2.0 * k / esum
    c_p = 2.0 * inputs.eps_n / esum
    rhs = _momentum_rhs_base(inputs, c_p, gamma)
    # replace the backward-Euler u_n/k term with the two-step history terms
    rhs = rhs + ((-w0 - 1.0) / k) * inputs.u_n + (-wm1 / k) * inputs.u_nm1
    rhs = apply_bc(rhs)
    u_np1, m, kr, res = _picard_solve(inputs, params, w1 / k, gamma, rhs)
    p_np1 = _pressure_update(inputs, u_np1, c_p, gamma)
    return StepResult(u_np1, p_np1, m, kr, res)
