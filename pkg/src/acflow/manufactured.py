"""Closed-form solutions and exact forcings for verification runs.

A manufactured solution carries hand-derived partial-derivative
closures for a velocity/pressure pair (u, p).  From those the momentum
forcing

    f = u_t + N(u) + grad p - nu lap u

is assembled for whichever convective form N the run uses (the three
forms differ by gradient terms that do not vanish pointwise), and the
continuity source

    g = eps(t) p_t + div u

closes the relaxed continuity equation.  For a divergence-free pair
with the relaxation term treated as a perturbation, g is just
eps(t) p_t; the solver's convergence tests feed g in full so the exact
pair satisfies the relaxed system it actually solves.

Two pairs are provided.  ``printed_solution`` is the verification pair
as printed in its source: u = sin(t) (sin^3(2 pi x),
sin(2 pi x) sin^2(2 pi y)), p = cos(t) cos(pi x) sin(pi y).  That
velocity is not divergence-free (its divergence is
6 pi sin(t) sin^2 cos + 4 pi sin(t) sin sin cos), so runs built on it
must enable the continuity source.  ``divfree_solution`` is an
alternate pair u = sin(t) (sin(2 pi y) sin^2(pi x),
-sin(2 pi x) sin^2(pi y)) with the same pressure; it is exactly
divergence-free, vanishes on the boundary of the unit square, and is
the pair the convergence and adaptive harnesses use.

``verify_forcing`` is the trust anchor: it substitutes the closures
into centered finite-difference residuals of the PDE minus the
assembled forcing and demands the residual shrink at second order
under refinement.  A hand-derivation slip in any closure breaks the
observed order and raises OracleFailed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .convection import NonlinearityForm
from .grid import GridSpec, ScalarField, VectorField, sample_scalar, sample_vector


class OracleFailed(RuntimeError):
    """Finite-difference residual of the PDE failed to shrink at order 2."""


Closure = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact (u, p) with the partial derivatives forcing assembly needs."""

    name: str
    divergence_free: bool
    u1: Closure
    u2: Closure
    p: Closure
    u1_t: Closure
    u1_x: Closure
    u1_y: Closure
    u1_xx: Closure
    u1_yy: Closure
    u2_t: Closure
    u2_x: Closure
    u2_y: Closure
    u2_xx: Closure
    u2_yy: Closure
    p_t: Closure
    p_x: Closure
    p_y: Closure

    def divergence(self, x, y, t):
        return self.u1_x(x, y, t) + self.u2_y(x, y, t)

    def velocity(self, grid: GridSpec, t: float) -> VectorField:
        return sample_vector(grid, self.u1, self.u2, t)

    def pressure(self, grid: GridSpec, t: float) -> ScalarField:
        return sample_scalar(grid, self.p, t)

    def convective_term(self, form: NonlinearityForm, x, y, t):
        """Continuum counterpart of the discrete convective form."""
        u1 = self.u1(x, y, t)
        u2 = self.u2(x, y, t)
        u1x = self.u1_x(x, y, t)
        u1y = self.u1_y(x, y, t)
        u2x = self.u2_x(x, y, t)
        u2y = self.u2_y(x, y, t)
        div = u1x + u2y
        if form is NonlinearityForm.SKEW:
            n1 = u1 * u1x + u2 * u1y + 0.5 * div * u1
            n2 = u1 * u2x + u2 * u2y + 0.5 * div * u2
        elif form is NonlinearityForm.ROTATIONAL:
            # omega x u; the Bernoulli gradient is carried by the pressure
            omega = u2x - u1y
            n1 = -omega * u2
            n2 = omega * u1
        elif form is NonlinearityForm.EMAC:
            n1 = 2.0 * u1 * u1x + u2 * u1y + u2 * u2x + div * u1
            n2 = u1 * u1y + u1 * u2x + 2.0 * u2 * u2y + div * u2
        else:
            raise ValueError(f"unknown form {form}")
        return n1, n2

    def forcing_components(self, nu: float, form: NonlinearityForm, x, y, t):
        n1, n2 = self.convective_term(form, x, y, t)
        f1 = self.u1_t(x, y, t) + n1 + self.p_x(x, y, t) \
            - nu * (self.u1_xx(x, y, t) + self.u1_yy(x, y, t))
        f2 = self.u2_t(x, y, t) + n2 + self.p_y(x, y, t) \
            - nu * (self.u2_xx(x, y, t) + self.u2_yy(x, y, t))
        return f1, f2

    def forcing(self, grid: GridSpec, t: float, nu: float,
                form: NonlinearityForm) -> VectorField:
        fx = lambda x, y, tt: self.forcing_components(nu, form, x, y, tt)[0]
        fy = lambda x, y, tt: self.forcing_components(nu, form, x, y, tt)[1]
        return sample_vector(grid, fx, fy, t)

    def source(self, grid: GridSpec, t: float, eps: float) -> ScalarField:
        g = lambda x, y, tt: eps * self.p_t(x, y, tt) + self.divergence(x, y, tt)
        return sample_scalar(grid, g, t)


def exact_forcing(ms: ManufacturedSolution, nu: float,
                  form: NonlinearityForm,
                  eps_fn: Callable[[float], float]
                  ) -> Tuple[Callable, Callable]:
    """Pointwise closures (f, g) for the relaxed system at coefficient nu."""

    def f(x, y, t):
        return ms.forcing_components(nu, form, x, y, t)

    def g(x, y, t):
        return eps_fn(t) * ms.p_t(x, y, t) + ms.divergence(x, y, t)

    return f, g


def printed_solution() -> ManufacturedSolution:
    a = 2.0 * math.pi
    pi = math.pi

    def T(t):
        return math.sin(t)

    def Td(t):
        return math.cos(t)

    return ManufacturedSolution(
        name="printed",
        divergence_free=False,
        u1=lambda x, y, t: T(t) * np.sin(a * x) ** 3 + 0.0 * y,
        u2=lambda x, y, t: T(t) * np.sin(a * x) * np.sin(a * y) ** 2,
        p=lambda x, y, t: math.cos(t) * np.cos(pi * x) * np.sin(pi * y),
        u1_t=lambda x, y, t: Td(t) * np.sin(a * x) ** 3 + 0.0 * y,
        u1_x=lambda x, y, t: 3.0 * a * T(t) * np.sin(a * x) ** 2 * np.cos(a * x)
        + 0.0 * y,
        u1_y=lambda x, y, t: 0.0 * x + 0.0 * y,
        u1_xx=lambda x, y, t: 3.0 * a * a * T(t)
        * (2.0 * np.sin(a * x) * np.cos(a * x) ** 2 - np.sin(a * x) ** 3)
        + 0.0 * y,
        u1_yy=lambda x, y, t: 0.0 * x + 0.0 * y,
        u2_t=lambda x, y, t: Td(t) * np.sin(a * x) * np.sin(a * y) ** 2,
        u2_x=lambda x, y, t: a * T(t) * np.cos(a * x) * np.sin(a * y) ** 2,
        u2_y=lambda x, y, t: 2.0 * a * T(t) * np.sin(a * x)
        * np.sin(a * y) * np.cos(a * y),
        u2_xx=lambda x, y, t: -a * a * T(t) * np.sin(a * x) * np.sin(a * y) ** 2,
        u2_yy=lambda x, y, t: 2.0 * a * a * T(t) * np.sin(a * x)
        * (np.cos(a * y) ** 2 - np.sin(a * y) ** 2),
        p_t=lambda x, y, t: -math.sin(t) * np.cos(pi * x) * np.sin(pi * y),
        p_x=lambda x, y, t: -pi * math.cos(t) * np.sin(pi * x) * np.sin(pi * y),
        p_y=lambda x, y, t: pi * math.cos(t) * np.cos(pi * x) * np.cos(pi * y),
    )


def divfree_solution() -> ManufacturedSolution:
    a = 2.0 * math.pi
    pi = math.pi

    def T(t):
        return math.sin(t)

    def Td(t):
        return math.cos(t)

    return ManufacturedSolution(
        name="divfree_alt",
        divergence_free=True,
        u1=lambda x, y, t: T(t) * np.sin(a * y) * np.sin(pi * x) ** 2,
        u2=lambda x, y, t: -T(t) * np.sin(a * x) * np.sin(pi * y) ** 2,
        p=lambda x, y, t: math.cos(t) * np.cos(pi * x) * np.sin(pi * y),
        u1_t=lambda x, y, t: Td(t) * np.sin(a * y) * np.sin(pi * x) ** 2,
        u1_x=lambda x, y, t: pi * T(t) * np.sin(a * y) * np.sin(a * x),
        u1_y=lambda x, y, t: a * T(t) * np.cos(a * y) * np.sin(pi * x) ** 2,
        u1_xx=lambda x, y, t: 2.0 * pi * pi * T(t) * np.sin(a * y) * np.cos(a * x),
        u1_yy=lambda x, y, t: -a * a * T(t) * np.sin(a * y) * np.sin(pi * x) ** 2,
        u2_t=lambda x, y, t: -Td(t) * np.sin(a * x) * np.sin(pi * y) ** 2,
        u2_x=lambda x, y, t: -a * T(t) * np.cos(a * x) * np.sin(pi * y) ** 2,
        u2_y=lambda x, y, t: -pi * T(t) * np.sin(a * x) * np.sin(a * y),
        u2_xx=lambda x, y, t: a * a * T(t) * np.sin(a * x) * np.sin(pi * y) ** 2,
        u2_yy=lambda x, y, t: -2.0 * pi * pi * T(t) * np.sin(a * x) * np.cos(a * y),
        p_t=lambda x, y, t: -math.sin(t) * np.cos(pi * x) * np.sin(pi * y),
        p_x=lambda x, y, t: -pi * math.cos(t) * np.sin(pi * x) * np.sin(pi * y),
        p_y=lambda x, y, t: pi * math.cos(t) * np.cos(pi * x) * np.cos(pi * y),
    )


def solution_by_name(name: str) -> ManufacturedSolution:
    if name == "printed":
        return printed_solution()
    if name == "divfree_alt":
        return divfree_solution()
    raise ValueError(f"unknown manufactured solution '{name}'")


# sample points for the finite-difference verification; interior of the
# unit square and times where sin(t), cos(t) are both active
_CHECK_POINTS = ((0.31, 0.17, 0.6), (0.62, 0.43, 1.1), (0.18, 0.77, 0.6),
                 (0.52, 0.29, 2.3), (0.83, 0.61, 1.1))


def _fd_residual(ms: ManufacturedSolution, nu: float, form: NonlinearityForm,
                 eps_fn, h: float) -> float:
    """Max PDE residual with all derivatives replaced by centered FD."""

    def d(fun, x, y, t, axis):
        if axis == 0:
            return (fun(x + h, y, t) - fun(x - h, y, t)) / (2.0 * h)
        if axis == 1:
            return (fun(x, y + h, t) - fun(x, y - h, t)) / (2.0 * h)
        return (fun(x, y, t + h) - fun(x, y, t - h)) / (2.0 * h)

    def d2(fun, x, y, t, axis):
        if axis == 0:
            return (fun(x + h, y, t) - 2.0 * fun(x, y, t)
                    + fun(x - h, y, t)) / (h * h)
        return (fun(x, y + h, t) - 2.0 * fun(x, y, t)
                + fun(x, y - h, t)) / (h * h)

    worst = 0.0
    for (px, py, pt) in _CHECK_POINTS:
        x = np.array(px)
        y = np.array(py)
        u1 = float(ms.u1(x, y, pt))
        u2 = float(ms.u2(x, y, pt))
        u1x = float(d(ms.u1, x, y, pt, 0))
        u1y = float(d(ms.u1, x, y, pt, 1))
        u2x = float(d(ms.u2, x, y, pt, 0))
        u2y = float(d(ms.u2, x, y, pt, 1))
        div = u1x + u2y
        if form is NonlinearityForm.SKEW:
            n1 = u1 * u1x + u2 * u1y + 0.5 * div * u1
            n2 = u1 * u2x + u2 * u2y + 0.5 * div * u2
        elif form is NonlinearityForm.ROTATIONAL:
            omega = u2x - u1y
            n1 = -omega * u2
            n2 = omega * u1
        else:
            n1 = 2.0 * u1 * u1x + u2 * u1y + u2 * u2x + div * u1
            n2 = u1 * u1y + u1 * u2x + 2.0 * u2 * u2y + div * u2
        r1 = float(d(ms.u1, x, y, pt, 2)) + n1 + float(d(ms.p, x, y, pt, 0)) \
            - nu * (float(d2(ms.u1, x, y, pt, 0)) + float(d2(ms.u1, x, y, pt, 1)))
        r2 = float(d(ms.u2, x, y, pt, 2)) + n2 + float(d(ms.p, x, y, pt, 1)) \
            - nu * (float(d2(ms.u2, x, y, pt, 0)) + float(d2(ms.u2, x, y, pt, 1)))
        f1, f2 = ms.forcing_components(nu, form, x, y, pt)
        rg = eps_fn(pt) * float(d(ms.p, x, y, pt, 2)) + div \
            - (eps_fn(pt) * float(ms.p_t(x, y, pt)) + float(ms.divergence(x, y, pt)))
        worst = max(worst, abs(r1 - float(f1)), abs(r2 - float(f2)), abs(rg))
    return worst


def verify_forcing(ms: ManufacturedSolution, nu: float = 0.7,
                   form: NonlinearityForm = NonlinearityForm.SKEW,
                   eps_fn=lambda t: 0.01 * (1.0 + 0.5 * math.sin(t)),
                   h: float = 2e-3) -> float:
    """Observed convergence order of the FD residual; >= 1.9 or OracleFailed."""
    coarse = _fd_residual(ms, nu, form, eps_fn, h)
    fine = _fd_residual(ms, nu, form, eps_fn, h / 2.0)
    scale = 1.0 + abs(nu)
    if coarse < 1e-12 * scale and fine < 1e-12 * scale:
        return 2.0
    if fine <= 0.0:
        return math.inf
    order = math.log2(coarse / fine)
    if order < 1.9:
        raise OracleFailed(
            f"PDE residual order {order:.3f} < 1.9 for '{ms.name}' with "
            f"form {form.value}: hand-derived forcing disagrees with the "
            f"finite-difference operator")
    return order
