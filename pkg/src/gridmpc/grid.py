"""Nonlinear swing-equation dynamics of a multi-machine grid.

The plant is a network-reduced multi-machine model: every modeled
generator couples to every other generator and to an infinite bus
through complex transfer admittances.  The infinite bus has fixed
voltage and angle 0 and serves as the angular reference; it carries
index 0 in the admittance matrix and is not part of the state.

For generator ``p`` with rotor angle ``delta_p`` [rad] and speed
deviation ``omega_p`` [rad/s]::

    d delta_p / dt = omega_p
    (H_p / (pi f_b)) d omega_p / dt =
        P_m_p (1 + u_p) - D_p omega_p
        - V_p V_inf (G_p0 cos delta_p + B_p0 sin delta_p)
        - V_p^2 G_self_p
        - sum_{q != p} V_p V_q (G_pq cos(delta_p - delta_q)
                                + B_pq sin(delta_p - delta_q))

with ``u_p`` the mechanical-power input as a fraction of the nominal
value ``P_m_p``.  Angles are in radians, speeds in rad/s, electrical
quantities per-unit, inertia and damping constants in seconds.

Events such as faults and line trips are piecewise-constant parameter
switches encoded in a :class:`ParameterSchedule`; network reduction
itself is out of scope and snapshots are supplied as data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "GridState",
    "GridParameters",
    "ParameterSchedule",
    "Trajectory",
    "IntegrationBlowupError",
    "swing_rhs",
    "step_rk4",
    "simulate",
    "find_equilibrium",
]

#: Default integration step [s]; chosen to divide the 50 ms sampling
#: period and typical event times exactly.
DT_INT_DEFAULT = 1e-3

#: Default sampling period of the discrete-time control loop [s].
T_S_DEFAULT = 0.05


class IntegrationBlowupError(RuntimeError):
    """Raised when integration produces a non-finite state."""

    def __init__(self, t: float, state_norm: float):
        super().__init__(
            f"integration blew up at t={t:.6g} s "
            f"(last finite state norm {state_norm:.6g})"
        )
        self.t = t
        self.state_norm = state_norm


def _as_float_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class GridState:
    """Rotor angles and speed deviations of all modeled generators.

    Attributes
    ----------
    delta : ndarray, shape (n_gen,)
        Rotor angles relative to the infinite bus [rad].
    omega : ndarray, shape (n_gen,)
        Rotor speed deviations from synchronous speed [rad/s].
    """

    delta: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        delta = _as_float_vector(self.delta, "delta")
        omega = _as_float_vector(self.omega, "omega")
        if delta.shape != omega.shape:
            raise ValueError(
                f"delta has length {delta.size} but omega has length {omega.size}"
            )
        if not np.all(np.isfinite(delta)):
            raise ValueError("delta contains non-finite entries")
        if not np.all(np.isfinite(omega)):
            raise ValueError("omega contains non-finite entries")
        delta.setflags(write=False)
        omega.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "omega", omega)

    @property
    def n_gen(self) -> int:
        return self.delta.size

    def as_vector(self) -> np.ndarray:
        """Stacked state vector [delta; omega]."""
        return np.concatenate([self.delta, self.omega])

    @staticmethod
    def from_vector(x: np.ndarray) -> "GridState":
        x = _as_float_vector(x, "state vector")
        if x.size % 2:
            raise ValueError(f"state vector length {x.size} is odd")
        n = x.size // 2
        return GridState(x[:n], x[n:])


@dataclass(frozen=True)
class GridParameters:
    """One snapshot of the reduced-network grid parameters.

    Attributes
    ----------
    f_b : float
        Base frequency [Hz].
    H : ndarray, shape (n_gen,)
        Per-unit-time inertia constants [s]; strictly positive.
    D : ndarray, shape (n_gen,)
        Damping coefficients [s]; non-negative.
    P_m : ndarray, shape (n_gen,)
        Nominal mechanical input power [pu].
    V : ndarray, shape (n_gen,)
        Internal generator voltages [pu].
    V_inf : float
        Infinite-bus voltage [pu].
    G_self : ndarray, shape (n_gen,)
        Internal conductances [pu].
    Y : complex ndarray, shape (n_gen + 1, n_gen + 1)
        Transfer admittances ``G + jB`` between all generator pairs and
        between each generator and the infinite bus (row/column 0).
        Symmetric in both real and imaginary parts.
    grid_of : ndarray of int, shape (n_gen,)
        Unit-grid membership of each generator (grid ids 1..n_grids).
    """

    f_b: float
    H: np.ndarray
    D: np.ndarray
    P_m: np.ndarray
    V: np.ndarray
    V_inf: float
    G_self: np.ndarray
    Y: np.ndarray
    grid_of: np.ndarray

    def __post_init__(self):
        H = _as_float_vector(self.H, "H")
        n = H.size
        fields = {}
        for name in ("D", "P_m", "V", "G_self"):
            v = _as_float_vector(getattr(self, name), name)
            if v.size != n:
                raise ValueError(f"{name} has length {v.size}, expected {n} (from H)")
            fields[name] = v
        grid_of = np.asarray(self.grid_of, dtype=int)
        if grid_of.shape != (n,):
            raise ValueError(f"grid_of has shape {grid_of.shape}, expected ({n},)")
        Y = np.asarray(self.Y, dtype=complex)
        if Y.shape != (n + 1, n + 1):
            raise ValueError(
                f"Y has shape {Y.shape}, expected ({n + 1}, {n + 1}) "
                "(modeled generators plus the infinite bus)"
            )
        if not np.allclose(Y.real, Y.real.T, atol=1e-12):
            raise ValueError("Y real part (conductances) is not symmetric")
        if not np.allclose(Y.imag, Y.imag.T, atol=1e-12):
            raise ValueError("Y imaginary part (susceptances) is not symmetric")
        if self.f_b <= 0:
            raise ValueError(f"f_b must be positive, got {self.f_b}")
        if np.any(H <= 0):
            raise ValueError("H must be strictly positive elementwise")
        if np.any(fields["D"] < 0):
            raise ValueError("D must be non-negative elementwise")

        for name, v in fields.items():
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        H.setflags(write=False)
        grid_of.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "grid_of", grid_of)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "f_b", float(self.f_b))
        object.__setattr__(self, "V_inf", float(self.V_inf))

        # Precomputed voltage-weighted coupling terms used by the RHS.
        V = fields["V"]
        Gw = np.outer(V, V) * Y.real[1:, 1:]
        Bw = np.outer(V, V) * Y.imag[1:, 1:]
        np.fill_diagonal(Gw, 0.0)
        np.fill_diagonal(Bw, 0.0)
        a_g = V * self.V_inf * Y.real[1:, 0]
        a_b = V * self.V_inf * Y.imag[1:, 0]
        p_static = V**2 * fields["G_self"]
        scale = np.pi * self.f_b / H
        for arr in (Gw, Bw, a_g, a_b, p_static, scale):
            arr.setflags(write=False)
        object.__setattr__(self, "_Gw", Gw)
        object.__setattr__(self, "_Bw", Bw)
        object.__setattr__(self, "_a_g", a_g)
        object.__setattr__(self, "_a_b", a_b)
        object.__setattr__(self, "_p_static", p_static)
        object.__setattr__(self, "_scale", scale)

    @property
    def n_gen(self) -> int:
        return self.H.size

    @property
    def n_grids(self) -> int:
        return int(self.grid_of.max())

    def grid_indices(self, g: int) -> np.ndarray:
        """Generator indices belonging to unit grid ``g``."""
        idx = np.flatnonzero(self.grid_of == g)
        if idx.size == 0:
            raise ValueError(f"grid index {g} not present in grid_of")
        return idx


@dataclass(frozen=True)
class ParameterSchedule:
    """Time-switched sequence of parameter snapshots.

    Segment ``k`` is active on ``[t_start_k, t_start_{k+1})``; the last
    segment extends to the end of the simulation.  Faults and line
    trips are represented as admittance changes between segments.
    """

    segments: tuple

    def __post_init__(self):
        segs = tuple((float(t), p) for t, p in self.segments)
        if not segs:
            raise ValueError("schedule needs at least one segment")
        if segs[0][0] != 0.0:
            raise ValueError(f"first segment must start at t=0, got {segs[0][0]}")
        times = [t for t, _ in segs]
        if any(t1 >= t2 for t1, t2 in zip(times, times[1:])):
            raise ValueError("segment start times must be strictly increasing")
        n = segs[0][1].n_gen
        grid_of = segs[0][1].grid_of
        for t, p in segs[1:]:
            if p.n_gen != n:
                raise ValueError(
                    f"segment at t={t} has {p.n_gen} generators, expected {n}"
                )
            if not np.array_equal(p.grid_of, grid_of):
                raise ValueError(f"segment at t={t} changes the grid_of map")
        object.__setattr__(self, "segments", segs)

    @staticmethod
    def constant(params: GridParameters) -> "ParameterSchedule":
        return ParameterSchedule(((0.0, params),))

    @property
    def n_gen(self) -> int:
        return self.segments[0][1].n_gen

    def params_at(self, t: float) -> GridParameters:
        active = self.segments[0][1]
        for t_start, p in self.segments:
            if t_start <= t + 1e-12:
                active = p
            else:
                break
        return active


@dataclass(frozen=True)
class Trajectory:
    """Sampled trajectory: states at every sampling instant plus the
    input held over each sampling interval."""

    times: np.ndarray          # (S+1,)
    delta: np.ndarray          # (S+1, n_gen)
    omega: np.ndarray          # (S+1, n_gen)
    inputs: np.ndarray         # (S, m)

    def __post_init__(self):
        if len(self.delta) != len(self.times) or len(self.omega) != len(self.times):
            raise ValueError("states and times must have equal length")
        if len(self.inputs) != len(self.times) - 1:
            raise ValueError("inputs must have one fewer row than times")

    @property
    def states(self) -> list:
        return [GridState(d, w) for d, w in zip(self.delta, self.omega)]

    @property
    def n_gen(self) -> int:
        return self.delta.shape[1]


# ---------------------------------------------------------------------------
# Right-hand side and integration
# ---------------------------------------------------------------------------

def _rhs(delta, omega, params: GridParameters, u):
    """Array core of the swing dynamics; broadcasts over leading axes.

    ``delta``, ``omega`` and ``u`` have shape ``(..., n_gen)``.
    Returns ``(ddelta_dt, domega_dt)`` with the same shape.
    """
    cd = np.cos(delta)
    sd = np.sin(delta)
    # sum_q Vp Vq [G_pq cos(dp-dq) + B_pq sin(dp-dq)], q != p
    coupling = (
        cd * (cd @ params._Gw)
        + sd * (sd @ params._Gw)
        + sd * (cd @ params._Bw)
        - cd * (sd @ params._Bw)
    )
    to_inf = params._a_g * cd + params._a_b * sd
    p_acc = (
        params.P_m * (1.0 + u)
        - params.D * omega
        - to_inf
        - params._p_static
        - coupling
    )
    return omega, params._scale * p_acc


def _check_input(u, n_gen: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (n_gen,):
        raise ValueError(
            f"u has shape {u.shape}, expected ({n_gen},) "
            "(one entry per modeled generator)"
        )
    return u


def swing_rhs(state: GridState, params: GridParameters, u) -> tuple:
    """Time derivative (d delta/dt, d omega/dt) of the swing dynamics.

    ``u`` is the per-generator mechanical-power input as a fraction of
    the nominal value; the infinite bus stays at angle 0 and is not
    part of the state.
    """
    if state.n_gen != params.n_gen:
        raise ValueError(
            f"state has {state.n_gen} generators but parameters have {params.n_gen}"
        )
    u = _check_input(u, params.n_gen)
    return _rhs(state.delta, state.omega, params, u)


def _rk4(delta, omega, params: GridParameters, u, dt: float):
    """One classical Runge-Kutta step under zero-order-hold input."""
    k1d, k1w = _rhs(delta, omega, params, u)
    k2d, k2w = _rhs(delta + 0.5 * dt * k1d, omega + 0.5 * dt * k1w, params, u)
    k3d, k3w = _rhs(delta + 0.5 * dt * k2d, omega + 0.5 * dt * k2w, params, u)
    k4d, k4w = _rhs(delta + dt * k3d, omega + dt * k3w, params, u)
    delta_next = delta + (dt / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
    omega_next = omega + (dt / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    return delta_next, omega_next


def step_rk4(state: GridState, params: GridParameters, u, dt: float,
             t: float = 0.0) -> GridState:
    """Advance the state by one RK4 step of length ``dt`` with ``u`` held."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if state.n_gen != params.n_gen:
        raise ValueError(
            f"state has {state.n_gen} generators but parameters have {params.n_gen}"
        )
    u = _check_input(u, params.n_gen)
    d, w = _rk4(state.delta, state.omega, params, u, dt)
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(w))):
        norm = float(np.linalg.norm(np.concatenate([state.delta, state.omega])))
        raise IntegrationBlowupError(t + dt, norm)
    return GridState(d, w)


def _grid_count(x: float, dt: float, name: str) -> int:
    k = round(x / dt)
    if k <= 0 or abs(x - k * dt) > 1e-9 * max(1.0, abs(x)):
        raise ValueError(f"{name}={x} is not a positive integer multiple of {dt}")
    return k


@dataclass(frozen=True)
class _StepPlan:
    """Integration plan: step counts and the active segment per step."""

    n_samples: int
    steps_per_sample: int
    dt: float
    T_s: float
    seg_of_step: np.ndarray  # (n_steps,) index into schedule.segments

    @staticmethod
    def build(schedule: ParameterSchedule, t_end: float, dt: float,
              T_s: float) -> "_StepPlan":
        steps_per_sample = _grid_count(T_s, dt, "T_s")
        n_samples = _grid_count(t_end, T_s, "t_end")
        n_steps = n_samples * steps_per_sample
        switch_steps = []
        for t_start, _ in schedule.segments:
            k = round(t_start / dt)
            if abs(t_start - k * dt) > 1e-9 * max(1.0, t_start):
                raise ValueError(
                    f"segment start t={t_start} is not aligned to dt_int={dt}; "
                    "integration steps must not straddle a parameter switch"
                )
            switch_steps.append(k)
        seg_of_step = np.searchsorted(
            np.asarray(switch_steps), np.arange(n_steps), side="right") - 1
        seg_of_step = np.maximum(seg_of_step, 0)
        return _StepPlan(n_samples, steps_per_sample, dt, T_s, seg_of_step)

    def integrate_interval(self, schedule: ParameterSchedule, delta, omega,
                           u, k: int):
        """Integrate sampling interval ``k``, switching segments exactly
        at their start steps.  Returns the state at the next sample."""
        base = k * self.steps_per_sample
        for j in range(self.steps_per_sample):
            params = schedule.segments[self.seg_of_step[base + j]][1]
            delta, omega = _rk4(delta, omega, params, u, self.dt)
        if not (np.all(np.isfinite(delta)) and np.all(np.isfinite(omega))):
            raise IntegrationBlowupError(
                (base + self.steps_per_sample) * self.dt, float("nan"))
        return delta, omega


def _resolve_input_signal(input_signal, n_gen: int, n_samples: int):
    """Normalize the per-interval input source to a callable."""
    if input_signal is None:
        const = np.zeros(n_gen)
        return lambda k, t, state: const
    if callable(input_signal):
        return input_signal
    arr = np.asarray(input_signal, dtype=float)
    if arr.ndim == 1:
        if arr.size != n_gen:
            raise ValueError(
                f"constant input has length {arr.size}, expected {n_gen}")
        return lambda k, t, state: arr
    if arr.ndim == 2:
        if arr.shape != (n_samples, n_gen):
            raise ValueError(
                f"input sequence has shape {arr.shape}, expected "
                f"({n_samples}, {n_gen})")
        return lambda k, t, state: arr[k]
    raise ValueError("input_signal must be None, a vector, a (S, m) array "
                     "or a callable")


def simulate(x0: GridState, schedule: ParameterSchedule, input_signal,
             t_end: float, dt_int: float = DT_INT_DEFAULT,
             T_s: float = T_S_DEFAULT) -> Trajectory:
    """Integrate the swing dynamics under zero-order-hold inputs.

    The input is held constant over each sampling interval of length
    ``T_s``; parameters switch exactly at segment boundaries, which must
    lie on the ``dt_int`` grid.  The state is recorded at every
    sampling instant, including ``t=0`` and ``t=t_end``.

    Parameters
    ----------
    x0 : GridState
        Initial state.
    schedule : ParameterSchedule
        Piecewise-constant plant parameters.
    input_signal : None | ndarray | callable
        ``None`` for zero input, a length-``n_gen`` vector held for the
        whole run, an ``(S, n_gen)`` array of per-interval inputs, or a
        callable ``f(k, t, state) -> u`` evaluated at each sampling
        instant.
    t_end, dt_int, T_s : float
        Horizon, integration step and sampling period [s]; ``T_s`` must
        be an integer multiple of ``dt_int`` and ``t_end`` of ``T_s``.
    """
    n = schedule.n_gen
    if x0.n_gen != n:
        raise ValueError(
            f"x0 has {x0.n_gen} generators but schedule has {n}")
    plan = _StepPlan.build(schedule, t_end, dt_int, T_s)
    get_u = _resolve_input_signal(input_signal, n, plan.n_samples)

    delta = np.empty((plan.n_samples + 1, n))
    omega = np.empty((plan.n_samples + 1, n))
    inputs = np.empty((plan.n_samples, n))
    delta[0] = x0.delta
    omega[0] = x0.omega
    d, w = x0.delta.copy(), x0.omega.copy()
    for k in range(plan.n_samples):
        t_k = k * T_s
        u = _check_input(get_u(k, t_k, GridState(d, w)), n)
        d, w = plan.integrate_interval(schedule, d, w, u, k)
        inputs[k] = u
        delta[k + 1] = d
        omega[k + 1] = w
    times = np.arange(plan.n_samples + 1) * T_s
    return Trajectory(times, delta, omega, inputs)


# ---------------------------------------------------------------------------
# Equilibrium
# ---------------------------------------------------------------------------

def _accelerating_power(delta, params: GridParameters):
    """Net accelerating power at omega = 0, u = 0 (the bracket of the
    speed equation before the pi f_b / H scaling)."""
    zero = np.zeros_like(delta)
    _, dw = _rhs(delta, zero, params, zero)
    return dw / params._scale


def _accel_jacobian(delta, params: GridParameters) -> np.ndarray:
    cd, sd = np.cos(delta), np.sin(delta)
    # d/d theta of (G cos theta + B sin theta), theta_pq = delta_p - delta_q
    sin_pq = np.outer(sd, cd) - np.outer(cd, sd)
    cos_pq = np.outer(cd, cd) + np.outer(sd, sd)
    K = params._Gw * sin_pq - params._Bw * cos_pq
    J = -K.copy()
    np.fill_diagonal(J, K.sum(axis=1) + (params._a_g * sd - params._a_b * cd))
    return J


def find_equilibrium(params: GridParameters, guess: GridState | None = None,
                     tol: float = 1e-9, max_iter: int = 100) -> GridState:
    """Synchronous equilibrium (delta*, 0) by damped Newton iteration.

    Solves the zero-input, zero-speed balance of the swing dynamics so
    that the full state derivative satisfies
    ``max |swing_rhs(delta*, 0)| <= tol``.

    Raises
    ------
    RuntimeError
        If the iteration does not converge; the final residual is
        included in the message.
    """
    if guess is None:
        delta = np.zeros(params.n_gen)
    else:
        if guess.n_gen != params.n_gen:
            raise ValueError(
                f"guess has {guess.n_gen} generators, expected {params.n_gen}")
        delta = guess.delta.copy()

    def scaled_residual(d):
        return float(np.max(np.abs(params._scale * _accelerating_power(d, params))))

    f = _accelerating_power(delta, params)
    for _ in range(max_iter):
        if scaled_residual(delta) <= tol:
            break
        J = _accel_jacobian(delta, params)
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -f, rcond=None)[0]
        alpha = 1.0
        norm0 = np.linalg.norm(f)
        while alpha > 2.0**-30:
            cand = delta + alpha * step
            f_cand = _accelerating_power(cand, params)
            if np.linalg.norm(f_cand) < norm0 * (1.0 - 1e-4 * alpha) + 1e-300:
                delta, f = cand, f_cand
                break
            alpha *= 0.5
        else:
            break
    res = scaled_residual(delta)
    if res > tol:
        raise RuntimeError(
            f"equilibrium search did not converge: residual {res:.3e} > {tol:.1e}")
    return GridState(delta, np.zeros_like(delta))
