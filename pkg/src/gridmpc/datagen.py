"""Randomized excitation datasets for predictor identification.

A dataset is a triple of snapshot matrices ``(X, Y, U)``: column ``i``
holds a state ``x_i = [delta; omega]``, the state ``y_i`` one sampling
period later, and the input ``u_i`` held over that period.  Columns are
collected from many short trajectories started at random initial
conditions and driven by inputs redrawn uniformly at every sampling
instant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridParameters, GridState, find_equilibrium, _rk4

__all__ = ["Dataset", "SamplingConfig", "collect_dataset", "split_per_grid"]


@dataclass(frozen=True)
class Dataset:
    """Snapshot matrices of state pairs under held inputs.

    ``X`` and ``Y`` are ``(2 n_gen, K)`` with rows ordered
    ``[delta_1..delta_n, omega_1..omega_n]``; ``U`` is ``(m, K)``.
    Column ``i`` of ``Y`` is the state reached from column ``i`` of
    ``X`` after one sampling period ``T_s`` under the held input in
    column ``i`` of ``U``.
    """

    X: np.ndarray
    Y: np.ndarray
    U: np.ndarray
    T_s: float
    n_discarded: int = 0

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        U = np.asarray(self.U, dtype=float)
        if X.ndim != 2 or Y.shape != X.shape:
            raise ValueError(
                f"X and Y must be matrices of equal shape, got {X.shape} vs {Y.shape}")
        if X.shape[0] % 2:
            raise ValueError(f"X has odd row count {X.shape[0]}; rows must "
                             "stack delta over omega")
        if U.ndim != 2 or U.shape[1] != X.shape[1]:
            raise ValueError(
                f"U has {U.shape[1] if U.ndim == 2 else '?'} columns, "
                f"expected {X.shape[1]}")
        for name, a in (("X", X), ("Y", Y), ("U", U)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "T_s", float(self.T_s))

    @property
    def K(self) -> int:
        return self.X.shape[1]

    @property
    def n_state(self) -> int:
        return self.X.shape[0]

    @property
    def n_gen(self) -> int:
        return self.X.shape[0] // 2

    @property
    def m(self) -> int:
        return self.U.shape[0]


@dataclass(frozen=True)
class SamplingConfig:
    """How to draw the excitation data.

    ``delta_range`` / ``omega_range`` / ``u_range`` are symmetric
    half-widths: values are drawn uniformly from ``center +/- range``.
    Initial angles are centered on the pre-fault equilibrium when
    ``center`` is ``"equilibrium"`` (speeds are always centered on 0),
    or on zero when ``center`` is ``"zero"``.
    """

    n_traj: int
    traj_len: float
    T_s: float
    delta_range: float = np.pi / 10
    omega_range: float = 0.05
    u_range: float = 0.2
    seed: int = 0
    center: str = "equilibrium"
    dt_int: float = 1e-3

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError("n_traj must be at least 1")
        s = self.samples_per_traj
        if s < 1 or abs(self.traj_len - s * self.T_s) > 1e-9:
            raise ValueError(
                f"traj_len={self.traj_len} must be a positive multiple of "
                f"T_s={self.T_s}")
        for name in ("delta_range", "omega_range", "u_range"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.center not in ("equilibrium", "zero"):
            raise ValueError(f"center must be 'equilibrium' or 'zero', "
                             f"got {self.center!r}")

    @property
    def samples_per_traj(self) -> int:
        return round(self.traj_len / self.T_s)


def collect_dataset(params: GridParameters, cfg: SamplingConfig) -> Dataset:
    """Simulate random short trajectories and collect snapshot pairs.

    Each trajectory draws its initial condition and input sequence from
    its own RNG stream seeded by ``(cfg.seed, trajectory index)``, so
    the result is identical regardless of batching or parallelism.
    Trajectories whose integration blows up are dropped entirely and
    counted in ``Dataset.n_discarded``.
    """
    n = params.n_gen
    S = cfg.samples_per_traj
    steps = round(cfg.T_s / cfg.dt_int)
    if steps < 1 or abs(cfg.T_s - steps * cfg.dt_int) > 1e-9:
        raise ValueError(
            f"T_s={cfg.T_s} must be an integer multiple of dt_int={cfg.dt_int}")

    if cfg.center == "equilibrium":
        delta_center = find_equilibrium(params).delta
    else:
        delta_center = np.zeros(n)

    R = cfg.n_traj
    x0_delta = np.empty((R, n))
    x0_omega = np.empty((R, n))
    u_seq = np.empty((R, S, n))
    for r in range(R):
        rng = np.random.default_rng([cfg.seed, r])
        x0_delta[r] = delta_center + rng.uniform(-cfg.delta_range,
                                                 cfg.delta_range, n)
        x0_omega[r] = rng.uniform(-cfg.omega_range, cfg.omega_range, n)
        u_seq[r] = rng.uniform(-cfg.u_range, cfg.u_range, (S, n))

    # Batched integration over all trajectories; rows that go non-finite
    # are frozen and their trajectories discarded afterwards.
    snap_delta = np.empty((S + 1, R, n))
    snap_omega = np.empty((S + 1, R, n))
    snap_delta[0] = x0_delta
    snap_omega[0] = x0_omega
    d, w = x0_delta.copy(), x0_omega.copy()
    alive = np.ones(R, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(S):
            u = u_seq[:, k, :]
            for _ in range(steps):
                d_next, w_next = _rk4(d, w, params, u, cfg.dt_int)
                ok = (np.isfinite(d_next).all(axis=1)
                      & np.isfinite(w_next).all(axis=1))
                alive &= ok
                keep = alive[:, None]
                d = np.where(keep, d_next, d)
                w = np.where(keep, w_next, w)
            snap_delta[k + 1] = d
            snap_omega[k + 1] = w

    kept = np.flatnonzero(alive)
    n_discarded = R - kept.size
    if kept.size == 0:
        raise RuntimeError("all sampled trajectories diverged; "
                           "check parameters and sampling ranges")

    # (S+1, R, n) -> per-trajectory consecutive pairs, trajectory-major.
    x_stack = np.concatenate([snap_delta, snap_omega], axis=2)  # (S+1, R, 2n)
    X = x_stack[:-1, kept, :].transpose(1, 0, 2).reshape(kept.size * S, 2 * n).T
    Y = x_stack[1:, kept, :].transpose(1, 0, 2).reshape(kept.size * S, 2 * n).T
    U = u_seq[kept].reshape(kept.size * S, n).T
    return Dataset(X=X, Y=Y, U=U, T_s=cfg.T_s, n_discarded=n_discarded)


def split_per_grid(ds: Dataset, grid_of, g: int) -> Dataset:
    """Restrict a dataset to the state and input rows of one unit grid.

    Keeps every column; selects the delta and omega rows of the
    generators in grid ``g`` (preserving the [delta; omega] layout) and
    the matching input rows.
    """
    grid_of = np.asarray(grid_of, dtype=int)
    n = ds.n_gen
    if grid_of.shape != (n,):
        raise ValueError(
            f"grid_of has shape {grid_of.shape}, expected ({n},)")
    idx = np.flatnonzero(grid_of == g)
    if idx.size == 0:
        raise ValueError(f"invalid grid index {g}: no generators assigned")
    rows = np.concatenate([idx, idx + n])
    return Dataset(X=ds.X[rows], Y=ds.Y[rows], U=ds.U[idx], T_s=ds.T_s,
                   n_discarded=ds.n_discarded)
