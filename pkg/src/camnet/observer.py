"""Networked visual motion observer with cameras that may not see the target.

Each camera ``i`` keeps an estimate ``g_bar_i`` (in its own frame) of the
averaged target pose and integrates ``d/dt g_bar_i = g_bar_i hat(u_i)`` with

    u_i = delta_i k_e e_i + k_s sum_{j in N_i} E_R(g_bar_i^-1 g_ij g_bar_j)

where ``delta_i`` is 1 for viewing cameras and ``e_i`` reconstructs
``E_R(g_bar_i^-1 g_io_i)`` from the image. Cameras are static.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import camera as cam
from .camera import CameraIntrinsics, FeatureModel
from .errors import BehindCameraError, CamnetError, DegenerateGeometryError, SimulationError
from .graph import CommGraph, neighbors
from .se3 import (
    E_R,
    Pose,
    Twist,
    e_R_batch,
    exp_se3,
    exp_se3_batch,
    reorthonormalize_batch,
)

ERROR_MODES = ("visual", "geometric")
SCHEMES = ("euler", "midpoint")


@dataclass(frozen=True)
class Gains:
    k_e: float
    k_s: float

    def __post_init__(self):
        if not self.k_e > 0:
            raise ValueError(f"k_e must be > 0, got {self.k_e}")
        # k_s = 0 is the standalone single-camera observer
        if not self.k_s >= 0:
            raise ValueError(f"k_s must be >= 0, got {self.k_s}")

    @property
    def k(self) -> float:
        return self.k_e / self.k_s if self.k_s > 0 else float("inf")


@dataclass(frozen=True)
class CameraNode:
    id: int
    g_wi: Pose
    intrinsics: CameraIntrinsics
    visible: bool = False
    # (start, stop) pairs overriding `visible` when non-empty
    schedule: tuple[tuple[float, float], ...] = ()

    def sees_target(self, t: float) -> bool:
        if self.schedule:
            return any(a <= t < b for a, b in self.schedule)
        return self.visible


@dataclass(frozen=True)
class TargetView:
    """Fictitious target ``o_i`` in the world frame with constant body velocity."""

    g_wo: Pose
    velocity: Twist = Twist()

    def at(self, t: float) -> Pose:
        if self.velocity.is_zero() or t == 0.0:
            return self.g_wo
        return self.g_wo @ exp_se3(t * self.velocity.vector())


def relative_pose(g_wi: Pose, g_wj: Pose) -> Pose:
    return g_wi.inverse() @ g_wj


@dataclass(frozen=True, eq=False)
class Network:
    """Static description of the camera network and the targets it views."""

    cameras: tuple[CameraNode, ...]
    graph: CommGraph
    features: FeatureModel
    targets: dict  # camera index (0-based) -> TargetView
    transports: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.graph.n != len(self.cameras):
            raise ValueError("graph size does not match camera count")
        for idx, c in enumerate(self.cameras):
            can_see = c.visible or bool(c.schedule)
            if can_see != (idx in self.targets):
                raise ValueError(f"camera {c.id}: target view present iff the camera can see it")
        tr = {}
        for i, j in self.graph.sorted_edges():
            tr[(i, j)] = relative_pose(self.cameras[i].g_wi, self.cameras[j].g_wi)
            tr[(j, i)] = relative_pose(self.cameras[j].g_wi, self.cameras[i].g_wi)
        object.__setattr__(self, "transports", tr)
        self._build_arrays()

    @property
    def n(self) -> int:
        return len(self.cameras)

    def viewing(self) -> list[int]:
        """Static viewing set (cameras flagged visible)."""
        return [i for i, c in enumerate(self.cameras) if c.visible]

    def viewing_at(self, t: float) -> list[int]:
        return [i for i, c in enumerate(self.cameras) if c.sees_target(t)]

    def has_schedule(self) -> bool:
        return any(c.schedule for c in self.cameras)

    def has_moving_target(self) -> bool:
        return any(not tv.velocity.is_zero() for tv in self.targets.values())

    def target_in_camera(self, i: int, t: float = 0.0) -> Pose:
        return relative_pose(self.cameras[i].g_wi, self.targets[i].at(t))

    def _build_arrays(self):
        pairs = sorted(self.transports)
        I = np.array([a for a, _ in pairs], dtype=int)
        J = np.array([b for _, b in pairs], dtype=int)
        incidence = np.zeros((self.n, len(pairs)))
        incidence[I, np.arange(len(pairs))] = 1.0
        arr = {
            "I": I,
            "J": J,
            "R_ij": np.array([self.transports[k].R for k in pairs]).reshape(-1, 3, 3),
            "p_ij": np.array([self.transports[k].p for k in pairs]).reshape(-1, 3),
            "incidence": incidence,
            "lam": np.array([c.intrinsics.focal_length for c in self.cameras]),
            "z_min": np.array([c.intrinsics.z_min for c in self.cameras]),
            "R_wi": np.array([c.g_wi.R for c in self.cameras]),
            "p_wi": np.array([c.g_wi.p for c in self.cameras]),
        }
        object.__setattr__(self, "_arr", arr)


@dataclass(frozen=True, eq=False)
class ObserverState:
    """Estimates of all cameras at time ``t``: rotations (n, 3, 3), positions (n, 3)."""

    t: float
    R: np.ndarray
    p: np.ndarray

    def pose(self, i: int) -> Pose:
        return Pose(self.R[i], self.p[i])

    @classmethod
    def from_poses(cls, poses: Sequence[Pose], t: float = 0.0) -> ObserverState:
        return cls(t, np.array([g.R for g in poses]), np.array([g.p for g in poses]))

    def world_rotations(self, network: Network) -> np.ndarray:
        return network._arr["R_wi"] @ self.R


def observer_input(
    network: Network,
    state: ObserverState,
    i: int,
    gains: Gains,
    error_mode: str = "visual",
) -> Twist:
    """Input of camera ``i`` evaluated from the snapshot ``state``."""
    g_i = state.pose(i)
    g_i_inv = g_i.inverse()
    u = np.zeros(6)
    for j in sorted(neighbors(network.graph, i)):
        g_ij_bar = network.transports[(i, j)] @ state.pose(j)
        u += E_R(g_i_inv @ g_ij_bar)
    u *= gains.k_s
    c = network.cameras[i]
    if c.sees_target(state.t):
        g_io = network.target_in_camera(i, state.t)
        if error_mode == "geometric":
            e = E_R(g_i_inv @ g_io)
        else:
            f = cam.measure(c.intrinsics, network.features, g_io)
            e = cam.reconstruct_error(c.intrinsics, network.features, g_i, f)
        u = u + gains.k_e * e
    return Twist.from_vector(u)


def _inputs(network: Network, R, p, t: float, gains: Gains, error_mode: str) -> np.ndarray:
    a = network._arr
    I, J = a["I"], a["J"]
    n = network.n
    u = np.zeros((n, 6))
    if I.size:
        Rt_i = np.swapaxes(R[I], 1, 2)
        R_rel = Rt_i @ a["R_ij"] @ R[J]
        d = np.einsum("pij,pj->pi", a["R_ij"], p[J]) + a["p_ij"] - p[I]
        E = np.empty((I.size, 6))
        E[:, :3] = np.einsum("pij,pj->pi", Rt_i, d)
        E[:, 3:] = e_R_batch(R_rel)
        u = gains.k_s * (a["incidence"] @ E)
    vis = network.viewing_at(t)
    if vis:
        V = np.array(vis)
        tgt = [network.target_in_camera(i, t) for i in vis]
        R_t = np.array([g.R for g in tgt])
        p_t = np.array([g.p for g in tgt])
        if error_mode == "geometric":
            Rt = np.swapaxes(R[V], 1, 2)
            e = np.empty((V.size, 6))
            e[:, :3] = np.einsum("kij,kj->ki", Rt, p_t - p[V])
            e[:, 3:] = e_R_batch(Rt @ R_t)
        else:
            try:
                e = cam.reconstruct_error_batch(
                    a["lam"][V], a["z_min"][V], network.features.points,
                    R[V], p[V], R_t, p_t,
                )
            except (BehindCameraError, DegenerateGeometryError) as exc:
                k = getattr(exc, "batch_index", 0)
                raise SimulationError(network.cameras[vis[k]].id, t, exc) from exc
        u[V] += gains.k_e * e
    return u


def network_inputs(network: Network, state: ObserverState, gains: Gains,
                   error_mode: str = "visual") -> np.ndarray:
    """All inputs at once, shape (n, 6); rows match :func:`observer_input`."""
    return _inputs(network, state.R, state.p, state.t, gains, error_mode)


def _advance(R, p, u, h):
    dR, dp = exp_se3_batch(h * u)
    return reorthonormalize_batch(R @ dR), p + np.einsum("nij,nj->ni", R, dp)


def step(
    network: Network,
    state: ObserverState,
    gains: Gains,
    dt: float,
    scheme: str = "euler",
    error_mode: str = "visual",
    t_next: float | None = None,
) -> ObserverState:
    """One synchronous Lie-group step of every estimate.

    ``euler``: g <- g exp(dt u(g)). ``midpoint``: evaluate u at
    g exp(dt/2 u(g)) and take the full step with it (second order).
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    t = state.t
    u = _inputs(network, state.R, state.p, t, gains, error_mode)
    if scheme == "midpoint":
        R_h, p_h = _advance(state.R, state.p, u, 0.5 * dt)
        u = _inputs(network, R_h, p_h, t + 0.5 * dt, gains, error_mode)
    if not np.any(u):
        R, p = state.R, state.p
    else:
        R, p = _advance(state.R, state.p, u, dt)
    return ObserverState(t + dt if t_next is None else t_next, R, p)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded estimates: times (K,), rotations (K, n, 3, 3), positions (K, n, 3)."""

    t: np.ndarray
    R: np.ndarray
    p: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def state(self, k: int) -> ObserverState:
        return ObserverState(float(self.t[k]), self.R[k], self.p[k])


def simulate(
    network: Network,
    initial: ObserverState,
    gains: Gains,
    dt: float = 1e-3,
    t_final: float = 20.0,
    record_every: int = 10,
    scheme: str = "euler",
    error_mode: str = "visual",
) -> Trajectory:
    """Integrate from ``initial`` to ``t_final``; deterministic for identical input.

    Records step 0, every ``record_every``-th step, and the final step.
    """
    if error_mode not in ERROR_MODES:
        raise ValueError(f"unknown error mode {error_mode!r}")
    if t_final < 0:
        raise ValueError("t_final must be >= 0")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    n_steps = int(round(t_final / dt)) if t_final > 0 else 0
    ts, Rs, ps = [initial.t], [initial.R.copy()], [initial.p.copy()]
    state = initial
    t0 = initial.t
    for k in range(1, n_steps + 1):
        try:
            state = step(network, state, gains, dt, scheme, error_mode, t_next=t0 + k * dt)
        except SimulationError:
            raise
        except CamnetError as exc:
            raise SimulationError(-1, state.t, exc) from exc
        if k % record_every == 0 or k == n_steps:
            ts.append(state.t)
            Rs.append(state.R)
            ps.append(state.p)
    return Trajectory(np.array(ts), np.array(Rs), np.array(ps))
