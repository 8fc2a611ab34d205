"""Discrete convection terms N(w; u) on the staggered grid.

Three forms of the nonlinearity, all bilinear in (w, u) and second-order
centered:

    SKEW        (w . grad)u + (1/2)(div w) u
    ROTATIONAL  (curl w) x u
    EMAC        (grad u + grad u^T) w + (div u) w

The skew form is assembled as the exact average of a divergence (flux) form
and an advective form whose discrete sums are negative adjoints of each other,
so <N_skew(w; u), u> = 0 to rounding for every admissible w, u, under either
boundary convention.  The time steppers' energy ledgers rely on that identity
being exact rather than merely O(h^2).

Interpolation/difference notation in the helpers: quantities move between
faces, cell centers and grid nodes by two-point averages (mu) and divided
differences (delta) in a single direction.  Under no-slip, wall-tangential
values reflect across the wall (ghost = -interior) and wall-normal stored
values are zero, which makes every wall-node flux vanish; outputs at
constrained boundary-normal faces are zero.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .grid import BC, GridMismatchError, VectorField


class NonlinearityForm(Enum):
    SKEW = "skew"
    ROTATIONAL = "rotational"
    EMAC = "emac"


def convective(form: NonlinearityForm, w: VectorField, u: VectorField) -> VectorField:
    """Evaluate N(w; u) with w the advecting field."""
    if w.grid != u.grid:
        raise GridMismatchError("advecting and advected fields on different grids")
    if form is NonlinearityForm.SKEW:
        return _skew(w, u)
    if form is NonlinearityForm.ROTATIONAL:
        return _rotational(w, u)
    if form is NonlinearityForm.EMAC:
        return _emac(w, u)
    raise ValueError(f"unknown nonlinearity form {form!r}")


# ---------------------------------------------------------------------------
# periodic helpers operate on the distinct-site arrays (nx, ny); the seam is
# re-mirrored when the output field is assembled


def _skew_periodic(g, wx, wy, ux, uy):
    hx, hy = g.hx, g.hy

    def half(cmx, cmy, a):
        # x-equation pieces for component a on x-faces given advecting
        # averages cmx (cell centers) and cmy (nodes); returns div+adv parts
        prod_c = cmx * (np.roll(a, -1, 0) + a) * 0.5          # mu_x(a) at centers
        div_x = (prod_c - np.roll(prod_c, 1, 0)) / hx
        dadx_c = cmx * (np.roll(a, -1, 0) - a) / hx           # delta_x(a) at centers
        adv_x = (np.roll(dadx_c, 1, 0) + dadx_c) * 0.5
        prod_n = cmy * (np.roll(a, 1, 1) + a) * 0.5           # mu_y(a) at nodes
        div_y = (np.roll(prod_n, -1, 1) - prod_n) / hy
        dady_n = cmy * (a - np.roll(a, 1, 1)) / hy            # delta_y(a) at nodes
        adv_y = (dady_n + np.roll(dady_n, -1, 1)) * 0.5
        return 0.5 * (div_x + div_y + adv_x + adv_y)

    # advecting averages for the x-equation: wx at centers, wy at nodes
    mwx_c = (wx + np.roll(wx, -1, 0)) * 0.5
    mwy_n = (np.roll(wy, 1, 0) + wy) * 0.5
    nx_out = half(mwx_c, mwy_n, ux)

    # y-equation by symmetry (swap axes and roles)
    def half_y(cmy, cmx, a):
        prod_c = cmy * (np.roll(a, -1, 1) + a) * 0.5
        div_y = (prod_c - np.roll(prod_c, 1, 1)) / hy
        dady_c = cmy * (np.roll(a, -1, 1) - a) / hy
        adv_y = (np.roll(dady_c, 1, 1) + dady_c) * 0.5
        prod_n = cmx * (np.roll(a, 1, 0) + a) * 0.5
        div_x = (np.roll(prod_n, -1, 0) - prod_n) / hx
        dadx_n = cmx * (a - np.roll(a, 1, 0)) / hx
        adv_x = (dadx_n + np.roll(dadx_n, -1, 0)) * 0.5
        return 0.5 * (div_y + div_x + adv_y + adv_x)

    mwy_c = (wy + np.roll(wy, -1, 1)) * 0.5
    mwx_n = (np.roll(wx, 1, 1) + wx) * 0.5
    ny_out = half_y(mwy_c, mwx_n, uy)
    return nx_out, ny_out


def _pad_reflect_y(a):
    # ghost rows across the y walls for a field at cell-center heights
    out = np.empty((a.shape[0], a.shape[1] + 2))
    out[:, 1:-1] = a
    out[:, 0] = -a[:, 0]
    out[:, -1] = -a[:, -1]
    return out


def _pad_reflect_x(a):
    out = np.empty((a.shape[0] + 2, a.shape[1]))
    out[1:-1, :] = a
    out[0, :] = -a[0, :]
    out[-1, :] = -a[-1, :]
    return out


def _skew_noslip(g, w, u):
    hx, hy = g.hx, g.hy
    wx, wy, ux, uy = w.ux, w.uy, u.ux, u.uy
    out_x = np.zeros_like(ux)
    out_y = np.zeros_like(uy)

    # --- x-equation, interior x-faces i = 1..nx-1 ---
    mwx_c = (wx[:-1, :] + wx[1:, :]) * 0.5                    # (nx, ny) centers
    mux_c = (ux[:-1, :] + ux[1:, :]) * 0.5
    dux_c = (ux[1:, :] - ux[:-1, :]) / hx
    div_x = ((mwx_c * mux_c)[1:, :] - (mwx_c * mux_c)[:-1, :]) / hx
    adv_x = ((mwx_c * dux_c)[:-1, :] + (mwx_c * dux_c)[1:, :]) * 0.5

    wyp = _pad_reflect_x(wy)                                  # (nx+2, ny+1)
    mwy_n = (wyp[:-1, :] + wyp[1:, :]) * 0.5                  # (nx+1, ny+1) nodes
    uxp = _pad_reflect_y(ux)                                  # (nx+1, ny+2)
    muy_n = (uxp[:, :-1] + uxp[:, 1:]) * 0.5                  # (nx+1, ny+1)
    duy_n = (uxp[:, 1:] - uxp[:, :-1]) / hy
    div_y = ((mwy_n * muy_n)[:, 1:] - (mwy_n * muy_n)[:, :-1]) / hy
    adv_y = ((mwy_n * duy_n)[:, :-1] + (mwy_n * duy_n)[:, 1:]) * 0.5
    out_x[1:-1, :] = 0.5 * (div_x + adv_x + div_y[1:-1, :] + adv_y[1:-1, :])

    # --- y-equation, interior y-faces j = 1..ny-1 ---
    mwy_c = (wy[:, :-1] + wy[:, 1:]) * 0.5                    # (nx, ny) centers
    muy_c = (uy[:, :-1] + uy[:, 1:]) * 0.5
    duy_c = (uy[:, 1:] - uy[:, :-1]) / hy
    div_yy = ((mwy_c * muy_c)[:, 1:] - (mwy_c * muy_c)[:, :-1]) / hy
    adv_yy = ((mwy_c * duy_c)[:, :-1] + (mwy_c * duy_c)[:, 1:]) * 0.5

    wxp = _pad_reflect_y(wx)                                  # (nx+1, ny+2)
    mwx_n = (wxp[:, :-1] + wxp[:, 1:]) * 0.5                  # (nx+1, ny+1) nodes
    uyp = _pad_reflect_x(uy)                                  # (nx+2, ny+1)
    mux_n = (uyp[:-1, :] + uyp[1:, :]) * 0.5
    dux_n = (uyp[1:, :] - uyp[:-1, :]) / hx
    div_xx = ((mwx_n * mux_n)[1:, :] - (mwx_n * mux_n)[:-1, :]) / hx
    adv_xx = ((mwx_n * dux_n)[:-1, :] + (mwx_n * dux_n)[1:, :]) * 0.5
    out_y[:, 1:-1] = 0.5 * (div_yy + adv_yy + div_xx[:, 1:-1] + adv_xx[:, 1:-1])
    return VectorField(g, out_x, out_y)


def _skew(w, u):
    g = w.grid
    if g.bc is BC.PERIODIC:
        nx_out, ny_out = _skew_periodic(g, w.ux[:-1, :], w.uy[:, :-1],
                                        u.ux[:-1, :], u.uy[:, :-1])
        out_x = np.empty_like(u.ux)
        out_x[:-1, :] = nx_out
        out_x[-1, :] = nx_out[0, :]
        out_y = np.empty_like(u.uy)
        out_y[:, :-1] = ny_out
        out_y[:, -1] = ny_out[:, 0]
        return VectorField(g, out_x, out_y)
    return _skew_noslip(g, w, u)


def _vorticity_nodes(w):
    """curl of the advecting field at grid nodes (periodic: distinct nodes)."""
    g = w.grid
    hx, hy = g.hx, g.hy
    if g.bc is BC.PERIODIC:
        wxd, wyd = w.ux[:-1, :], w.uy[:, :-1]
        return (wyd - np.roll(wyd, 1, 0)) / hx - (wxd - np.roll(wxd, 1, 1)) / hy
    wyp = _pad_reflect_x(w.uy)
    wxp = _pad_reflect_y(w.ux)
    return (wyp[1:, :] - wyp[:-1, :]) / hx - (wxp[:, 1:] - wxp[:, :-1]) / hy


def _rotational(w, u):
    g = w.grid
    out_x = np.zeros_like(u.ux)
    out_y = np.zeros_like(u.uy)
    if g.bc is BC.PERIODIC:
        om = _vorticity_nodes(w)                               # (nx, ny) nodes
        uyd, uxd = u.uy[:, :-1], u.ux[:-1, :]
        muy_n = (np.roll(uyd, 1, 0) + uyd) * 0.5
        fx = -(om * muy_n + np.roll(om * muy_n, -1, 1)) * 0.5  # mu_y back to x-faces
        mux_n = (np.roll(uxd, 1, 1) + uxd) * 0.5
        fy = (om * mux_n + np.roll(om * mux_n, -1, 0)) * 0.5   # mu_x back to y-faces
        out_x[:-1, :] = fx
        out_x[-1, :] = fx[0, :]
        out_y[:, :-1] = fy
        out_y[:, -1] = fy[:, 0]
        return VectorField(g, out_x, out_y)
    om = _vorticity_nodes(w)                                   # (nx+1, ny+1) nodes
    uyp = _pad_reflect_x(u.uy)
    muy_n = (uyp[:-1, :] + uyp[1:, :]) * 0.5
    prod = om * muy_n
    out_x[1:-1, :] = -(prod[1:-1, :-1] + prod[1:-1, 1:]) * 0.5
    uxp = _pad_reflect_y(u.ux)
    mux_n = (uxp[:, :-1] + uxp[:, 1:]) * 0.5
    prod2 = om * mux_n
    out_y[:, 1:-1] = (prod2[:-1, 1:-1] + prod2[1:, 1:-1]) * 0.5
    return VectorField(g, out_x, out_y)


def _emac(w, u):
    g = w.grid
    hx, hy = g.hx, g.hy
    out_x = np.zeros_like(u.ux)
    out_y = np.zeros_like(u.uy)
    if g.bc is BC.PERIODIC:
        uxd, uyd = u.ux[:-1, :], u.uy[:, :-1]
        wxd, wyd = w.ux[:-1, :], w.uy[:, :-1]
        dux_c = (np.roll(uxd, -1, 0) - uxd) / hx               # du1/dx at centers
        duy_c = (np.roll(uyd, -1, 1) - uyd) / hy               # du2/dy at centers
        div_c = dux_c + duy_c
        mwx_c = (wxd + np.roll(wxd, -1, 0)) * 0.5
        mwy_c = (wyd + np.roll(wyd, -1, 1)) * 0.5
        cross_n = (uxd - np.roll(uxd, 1, 1)) / hy + (uyd - np.roll(uyd, 1, 0)) / hx
        mwy_n = (np.roll(wyd, 1, 0) + wyd) * 0.5
        mwx_n = (np.roll(wxd, 1, 1) + wxd) * 0.5
        fc = (2.0 * dux_c + div_c) * mwx_c
        fx = (np.roll(fc, 1, 0) + fc) * 0.5
        fn = cross_n * mwy_n
        fx += (fn + np.roll(fn, -1, 1)) * 0.5
        gc = (2.0 * duy_c + div_c) * mwy_c
        fy = (np.roll(gc, 1, 1) + gc) * 0.5
        gn = cross_n * mwx_n
        fy += (gn + np.roll(gn, -1, 0)) * 0.5
        out_x[:-1, :] = fx
        out_x[-1, :] = fx[0, :]
        out_y[:, :-1] = fy
        out_y[:, -1] = fy[:, 0]
        return VectorField(g, out_x, out_y)

    dux_c = (u.ux[1:, :] - u.ux[:-1, :]) / hx
    duy_c = (u.uy[:, 1:] - u.uy[:, :-1]) / hy
    div_c = dux_c + duy_c
    mwx_c = (w.ux[:-1, :] + w.ux[1:, :]) * 0.5
    mwy_c = (w.uy[:, :-1] + w.uy[:, 1:]) * 0.5
    uxp = _pad_reflect_y(u.ux)
    uyp = _pad_reflect_x(u.uy)
    cross_n = (uxp[:, 1:] - uxp[:, :-1]) / hy + (uyp[1:, :] - uyp[:-1, :]) / hx
    wyp = _pad_reflect_x(w.uy)
    mwy_n = (wyp[:-1, :] + wyp[1:, :]) * 0.5
    wxp = _pad_reflect_y(w.ux)
    mwx_n = (wxp[:, :-1] + wxp[:, 1:]) * 0.5

    fc = (2.0 * dux_c + div_c) * mwx_c
    fx = (fc[:-1, :] + fc[1:, :]) * 0.5
    fn = cross_n * mwy_n
    out_x[1:-1, :] = fx + (fn[1:-1, :-1] + fn[1:-1, 1:]) * 0.5

    gc = (2.0 * duy_c + div_c) * mwy_c
    fy = (gc[:, :-1] + gc[:, 1:]) * 0.5
    gn = cross_n * mwx_n
    out_y[:, 1:-1] = fy + (gn[:-1, 1:-1] + gn[1:, 1:-1]) * 0.5
    return VectorField(g, out_x, out_y)
