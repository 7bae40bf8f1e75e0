"""Averaging-performance quantities for a run of the networked observer.

All per-camera quantities compare the estimate ``g_bar_i`` with the averaged
pose expressed in camera ``i``'s frame, ``g_star_i = g_wi^-1 g_star``.
Matrix positivity ``M > 0`` of a non-symmetric ``M`` is read as
``sym(M)`` positive definite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoBaselineError
from .observer import Gains, Network, ObserverState, Trajectory
from .se3 import Pose, mean_pose, phi, sym_part

DEFAULT_ZETA_MARGIN = 0.1
ZETA_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class AveragingBaseline:
    g_star: Pose
    g_star_i: tuple  # of Pose, one per camera
    viewing: tuple  # 0-based indices of the viewing set
    n: int
    rho_p: float
    rho_R: float
    phi_m: float
    zeta: float
    beta: float
    distinct_pair: bool  # a viewing pair differs in both position and rotation
    targets_positive: bool  # sym(R*_i^T R_io_i) > 0 for every viewing camera

    @property
    def R_star(self) -> np.ndarray:
        return np.array([g.R for g in self.g_star_i])

    @property
    def p_star(self) -> np.ndarray:
        return np.array([g.p for g in self.g_star_i])

    @property
    def beta_positive(self) -> bool:
        return self.beta > 0


def _min_sym_eig(M: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(sym_part(M) if M.ndim == 2 else 0.5 * (M + np.swapaxes(M, -1, -2)))[..., 0]


def baseline(network: Network, zeta_margin: float = DEFAULT_ZETA_MARGIN,
             zeta: float | None = None) -> AveragingBaseline:
    vf = network.viewing()
    if not vf:
        raise NoBaselineError("no viewing camera: the average target pose is undefined")
    g_wo = [network.targets[i].g_wo for i in vf]
    g_star = mean_pose(g_wo)
    g_star_i = tuple(c.g_wi.inverse() @ g_star for c in network.cameras)
    g_io = {i: network.target_in_camera(i) for i in vf}
    rho_p = float(sum(np.sum((g_io[i].p - g_star_i[i].p) ** 2) for i in vf))
    per_phi = [phi(g_star_i[i].R.T @ g_io[i].R) for i in vf]
    rho_R = float(sum(per_phi))
    phi_m = float(max(per_phi))
    if zeta is None:
        zeta = max(phi_m * (1.0 + zeta_margin), ZETA_FLOOR)
    elif not zeta > phi_m:
        raise ValueError(f"zeta must exceed phi_m = {phi_m}")
    beta = 1.0 - math.sqrt(2.0 * zeta)
    distinct = any(
        not np.allclose(a.p, b.p, atol=1e-12) and not np.allclose(a.R, b.R, atol=1e-12)
        for k, a in enumerate(g_wo) for b in g_wo[k + 1:]
    )
    positive = all(_min_sym_eig(g_star_i[i].R.T @ g_io[i].R) > 0 for i in vf)
    return AveragingBaseline(
        g_star=g_star, g_star_i=g_star_i, viewing=tuple(vf), n=network.n,
        rho_p=rho_p, rho_R=rho_R, phi_m=phi_m, zeta=float(zeta), beta=beta,
        distinct_pair=len(vf) >= 2 and distinct, targets_positive=positive,
    )


def _phis(R: np.ndarray, base: AveragingBaseline) -> np.ndarray:
    """phi(R*_i^T R_bar_i) for all cameras; R has shape (..., n, 3, 3)."""
    return 3.0 - np.einsum("nji,...nji->...n", base.R_star, R)


def position_errors(p: np.ndarray, base: AveragingBaseline) -> np.ndarray:
    return np.sum((p - base.p_star) ** 2, axis=-1)


def energy_p(state: ObserverState, base: AveragingBaseline) -> float:
    return 0.5 * float(np.sum(position_errors(state.p, base)))


def energy_R(state: ObserverState, base: AveragingBaseline) -> float:
    return float(np.sum(_phis(state.R, base)))


def energy_R_world(R_world: np.ndarray, base: AveragingBaseline) -> float:
    """U_R from world-frame estimates ``R_wi R_bar_i`` against the world average."""
    return float(np.sum(3.0 - np.einsum("ji,nji->n", base.g_star.R, R_world)))


def attained_epsilon(state: ObserverState, base: AveragingBaseline) -> tuple[float, float]:
    """Smallest epsilon (as an infimum) for membership in the two error sets.

    Membership ``(1/n) sum err_i < eps rho / |V_f|`` holds for every
    ``eps > |V_f| (1/n) sum err_i / rho``. With ``rho == 0`` no epsilon works.
    """
    nf = len(base.viewing)
    ep = float(np.sum(position_errors(state.p, base))) / base.n
    eR = float(np.sum(_phis(state.R, base))) / base.n
    a = nf * ep / base.rho_p if base.rho_p > 0 else math.inf
    b = nf * eR / base.rho_R if base.rho_R > 0 else math.inf
    return a, b


def omega_membership(state: ObserverState, base: AveragingBaseline,
                     epsilon: float) -> tuple[bool, bool]:
    nf = len(base.viewing)
    ep = float(np.sum(position_errors(state.p, base))) / base.n
    eR = float(np.sum(_phis(state.R, base))) / base.n
    return ep < epsilon * base.rho_p / nf, eR < epsilon * base.rho_R / nf


def _tail(traj: Trajectory, tail_fraction: float) -> slice:
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must be in (0, 1]")
    t0, t1 = traj.t[0], traj.t[-1]
    start = t1 - tail_fraction * (t1 - t0)
    k = int(np.searchsorted(traj.t, start - 1e-12 * max(1.0, abs(t1))))
    return slice(min(k, len(traj.t) - 1), None)


def tail_attained_epsilon(traj: Trajectory, base: AveragingBaseline,
                          tail_fraction: float = 0.2) -> tuple[float, float]:
    """Worst attained epsilon over the trailing window of the run."""
    sl = _tail(traj, tail_fraction)
    nf = len(base.viewing)
    ep = np.sum(position_errors(traj.p[sl], base), axis=-1) / base.n
    eR = np.sum(_phis(traj.R[sl], base), axis=-1) / base.n
    a = nf * float(ep.max()) / base.rho_p if base.rho_p > 0 else math.inf
    b = nf * float(eR.max()) / base.rho_R if base.rho_R > 0 else math.inf
    return a, b


def epsilon_level_achieved(traj: Trajectory, base: AveragingBaseline, epsilon: float,
                           tail_fraction: float = 0.2) -> tuple[bool, bool]:
    """Position and orientation verdicts: membership at every step in the tail window."""
    sl = _tail(traj, tail_fraction)
    pos = rot = True
    for k in range(len(traj.t))[sl]:
        a, b = omega_membership(traj.state(k), base, epsilon)
        pos &= a
        rot &= b
    return pos, rot


def set_S_membership(state: ObserverState, base: AveragingBaseline) -> tuple[np.ndarray, bool]:
    """Per camera: ``sym(R_bar_i^T R*_i)`` positive definite."""
    M = np.swapaxes(state.R, -1, -2) @ base.R_star
    per = _min_sym_eig(M) > 0
    return per, bool(np.all(per))


def s_zeta_membership(state: ObserverState, base: AveragingBaseline,
                      zeta: float | None = None) -> bool:
    """All cameras within ``phi <= zeta`` of the average orientation."""
    z = base.zeta if zeta is None else zeta
    return bool(np.all(_phis(state.R, base) <= z))


def max_phi(state: ObserverState, base: AveragingBaseline) -> float:
    return float(np.max(_phis(state.R, base)))


def sigma_i(state: ObserverState, base: AveragingBaseline, i: int) -> float:
    return float(_min_sym_eig(base.R_star[i].T @ state.R[i]))


def lambda_set(state: ObserverState, base: AveragingBaseline,
               zeta: float | None = None) -> frozenset:
    z = base.zeta if zeta is None else zeta
    return frozenset(int(i) for i in np.flatnonzero(_phis(state.R, base) >= z))


@dataclass(frozen=True)
class TheoryConstants:
    k: float
    epsilon: float
    epsilon_R: float  # nan when beta <= 0
    epsilon_R_prime: float  # nan when sqrt(k W) >= sqrt(beta) or beta <= 0
    alpha_R: float
    W: int
    diam: int
    applicable: bool


def theory_constants(base: AveragingBaseline, gains: Gains, W: int, diam: int,
                     epsilon: float) -> TheoryConstants:
    k = gains.k
    b = base.beta
    if b > 0:
        eps_R = 1.0 - (1.0 - epsilon) * b
        alpha = k * base.rho_R * diam / (2.0 * b)
        gap = math.sqrt(b) - math.sqrt(k * W)
        eps_Rp = 1.0 - (1.0 - epsilon) * gap**2 if gap > 0 else math.nan
    else:
        eps_R = eps_Rp = alpha = math.nan
    applicable = b > 0 and base.distinct_pair and base.targets_positive and 0 < epsilon < 1
    return TheoryConstants(k, epsilon, eps_R, eps_Rp, alpha, W, diam, applicable)


@dataclass(frozen=True, eq=False)
class PerformanceReport:
    t: np.ndarray
    U_p: np.ndarray
    U_R: np.ndarray
    max_phi: np.ndarray
    lambda_size: np.ndarray
    in_S: np.ndarray
    in_S_zeta: np.ndarray
    attained_epsilon_p: float
    attained_epsilon_R: float


def performance_report(traj: Trajectory, base: AveragingBaseline,
                       tail_fraction: float = 0.2) -> PerformanceReport:
    ph = _phis(traj.R, base)
    U_p = 0.5 * np.sum(position_errors(traj.p, base), axis=-1)
    U_R = np.sum(ph, axis=-1)
    M = np.swapaxes(traj.R, -1, -2) @ base.R_star
    in_S = np.all(_min_sym_eig(M) > 0, axis=-1)
    eps_p, eps_R = tail_attained_epsilon(traj, base, tail_fraction)
    return PerformanceReport(
        t=traj.t, U_p=U_p, U_R=U_R, max_phi=ph.max(axis=-1),
        lambda_size=np.sum(ph >= base.zeta, axis=-1), in_S=in_S,
        in_S_zeta=np.all(ph <= base.zeta, axis=-1),
        attained_epsilon_p=eps_p, attained_epsilon_R=eps_R,
    )


def tail_mean(values: np.ndarray, t: np.ndarray, tail_fraction: float = 0.2) -> float:
    t0, t1 = t[0], t[-1]
    mask = t >= t1 - tail_fraction * (t1 - t0) - 1e-12 * max(1.0, abs(t1))
    return float(np.mean(values[mask]))
