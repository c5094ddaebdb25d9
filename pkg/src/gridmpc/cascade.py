"""Synthetic cascaded-grid parameter sets and fault schedules.

Real reduced-admittance data for large interconnections is proprietary
to its source models, so the package ships a parametric builder for
desk-scale cascades: ``n_grids`` unit grids of ``n_gen`` machines each,
chained behind an infinite bus.  Machines within a grid are strongly
coupled, each grid is anchored to the infinite bus with a strength that
decays along the chain, and consecutive grids are joined by a single
tie line.

The default constants are tuned so that the scripted fault (anchor
collapse of grid 1 on ``[0.87, 1.0)`` s followed by a partial line
trip) destabilizes the uncontrolled system while staying recoverable
with mechanical-power inputs limited to +/-20 percent of nominal.
"""

from __future__ import annotations

import numpy as np

from .grid import GridParameters, ParameterSchedule

__all__ = ["build_cascade", "build_fault_schedule"]

#: Scripted event times [s].
T_FAULT_DEFAULT = 0.87
T_CLEAR_DEFAULT = 1.0


def build_cascade(n_grids: int = 2, n_gen: int = 3, *, f_b: float = 60.0,
                  h: float = 6.0, d: float = 0.015, p_m: float = 0.6,
                  v: float = 1.0, v_inf: float = 1.0, g_self: float = 0.0,
                  b_intra: float = 4.0, b_tie: float = 0.8,
                  b_anchor: float = 2.2, anchor_decay: float = 0.55) -> GridParameters:
    """Build the pre-fault parameter snapshot of a synthetic cascade.

    Parameters
    ----------
    n_grids, n_gen : int
        Number of unit grids and machines per grid.
    h, d, p_m, v : float
        Per-machine inertia [s], damping [s], nominal mechanical power
        [pu] and internal voltage [pu] (identical machines).
    b_intra : float
        Susceptance between every machine pair within a grid [pu].
    b_tie : float
        Susceptance of the single tie joining the last machine of grid
        ``g`` to the first machine of grid ``g+1`` [pu].
    b_anchor, anchor_decay : float
        Susceptance between each machine of grid ``g`` and the infinite
        bus is ``b_anchor * anchor_decay**(g-1)``.
    """
    if n_grids < 1 or n_gen < 1:
        raise ValueError("need at least one grid with one generator")
    n = n_grids * n_gen
    grid_of = np.repeat(np.arange(1, n_grids + 1), n_gen)

    B = np.zeros((n + 1, n + 1))
    for g in range(n_grids):
        lo, hi = g * n_gen, (g + 1) * n_gen
        B[lo + 1:hi + 1, lo + 1:hi + 1] = b_intra
        anchor = b_anchor * anchor_decay**g
        B[lo + 1:hi + 1, 0] = anchor
        B[0, lo + 1:hi + 1] = anchor
        if g + 1 < n_grids:
            i, j = hi, hi + 1  # last machine of grid g, first of grid g+1
            B[i, j] = B[j, i] = b_tie
    np.fill_diagonal(B, 0.0)

    return GridParameters(
        f_b=f_b,
        H=np.full(n, h),
        D=np.full(n, d),
        P_m=np.full(n, p_m),
        V=np.full(n, v),
        V_inf=v_inf,
        G_self=np.full(n, g_self),
        Y=np.zeros((n + 1, n + 1)) + 1j * B,
        grid_of=grid_of,
    )


def _scale_anchor(params: GridParameters, grid: int, factor: float) -> GridParameters:
    """Copy of ``params`` with the infinite-bus admittances of one grid
    scaled by ``factor``."""
    Y = params.Y.copy()
    idx = params.grid_indices(grid) + 1  # +1: row/col 0 is the infinite bus
    Y[idx, 0] *= factor
    Y[0, idx] *= factor
    return GridParameters(
        f_b=params.f_b, H=params.H, D=params.D, P_m=params.P_m,
        V=params.V, V_inf=params.V_inf, G_self=params.G_self,
        Y=Y, grid_of=params.grid_of,
    )


def build_fault_schedule(params: GridParameters, *,
                         t_fault: float = T_FAULT_DEFAULT,
                         t_clear: float = T_CLEAR_DEFAULT,
                         fault_factor: float = 0.0,
                         trip_factor: float = 0.3,
                         faulted_grid: int = 1) -> ParameterSchedule:
    """Three-segment schedule: pre-fault, fault-on, post-trip.

    The fault collapses the faulted grid's coupling to the infinite bus
    to ``fault_factor`` of its pre-fault value on ``[t_fault, t_clear)``;
    clearing trips the line, leaving that coupling permanently at
    ``trip_factor`` of pre-fault.
    """
    if not 0.0 < t_fault < t_clear:
        raise ValueError(
            f"need 0 < t_fault < t_clear, got t_fault={t_fault}, t_clear={t_clear}")
    fault_on = _scale_anchor(params, faulted_grid, fault_factor)
    post_trip = _scale_anchor(params, faulted_grid, trip_factor)
    return ParameterSchedule((
        (0.0, params),
        (t_fault, fault_on),
        (t_clear, post_trip),
    ))
