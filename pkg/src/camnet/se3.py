"""SO(3)/SE(3) primitives: hat/vee, exp/log, error maps, distances and the chordal mean.

Poses use the homogeneous convention

    g = [[R, p],
         [0, 1]]

so ``g1 @ g2`` composes transforms and ``g.inverse()`` is ``(R^T, -R^T p)``.
Rotation vectors are axis * angle in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AngleNearPiError, DegenerateMeanError, SymmetryError

ORTHO_TOL = 1e-12  # re-project rotations whose residual exceeds this
PI_GUARD = 1e-6  # log_so3 refuses angles within this of pi
SKEW_TOL = 1e-9
_SMALL_ANGLE = 1e-8


def hat(v) -> np.ndarray:
    """3-vector to the skew matrix with ``hat(v) @ w == cross(v, w)``."""
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    asym = np.linalg.norm(M + M.T)
    if asym >= SKEW_TOL:
        raise SymmetryError(f"matrix is not skew-symmetric (|M + M^T|_F = {asym:.3g})")
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def orthogonality_residual(R) -> float:
    R = np.asarray(R, dtype=float)
    return float(np.linalg.norm(R.T @ R - np.eye(3)))


def project_to_so3(M) -> np.ndarray:
    """Nearest rotation in Frobenius norm (polar factor with det +1)."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(U @ Vt)) or 1.0
    return U @ D @ Vt


def _clean(R: np.ndarray) -> np.ndarray:
    if orthogonality_residual(R) > ORTHO_TOL:
        return project_to_so3(R)
    return R


def exp_so3(w) -> np.ndarray:
    """Rodrigues formula for the rotation vector ``w``."""
    w = np.asarray(w, dtype=float).reshape(3)
    theta = math.sqrt(float(w @ w))
    K = hat(w)
    if theta < _SMALL_ANGLE:
        a = 1.0 - theta**2 / 6.0
        b = 0.5 - theta**2 / 24.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta**2
    return _clean(np.eye(3) + a * K + b * (K @ K))


def rotation_angle(R) -> float:
    R = np.asarray(R, dtype=float)
    s = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    c = 0.5 * (np.trace(R) - 1.0)
    return math.atan2(float(np.linalg.norm(s)), c)


def log_so3(R) -> np.ndarray:
    """Inverse of :func:`exp_so3` for angles in ``[0, pi - 1e-6)``.

    Near pi the rotation axis is only defined up to sign, so such input is
    rejected instead of silently picking one.
    """
    R = np.asarray(R, dtype=float)
    s = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    sin_t = float(np.linalg.norm(s))
    theta = math.atan2(sin_t, 0.5 * (np.trace(R) - 1.0))
    if theta > math.pi - PI_GUARD:
        raise AngleNearPiError(f"rotation angle {theta:.9f} is within {PI_GUARD} of pi")
    if theta < _SMALL_ANGLE:
        return s * (1.0 + theta**2 / 6.0)
    return s * (theta / sin_t)


def skew_part(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    return 0.5 * (R - R.T)


def sym_part(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def e_R(R) -> np.ndarray:
    """Rotation error vector ``sin(theta) * axis``."""
    R = np.asarray(R, dtype=float)
    return 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])


def phi(R) -> float:
    """``tr(I - R) = 2 (1 - cos theta)``, in ``[0, 4]``."""
    return float(3.0 - np.trace(np.asarray(R, dtype=float)))


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform (R, p). Treated as immutable."""

    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.R, dtype=float).reshape(3, 3)
        p = np.array(self.p, dtype=float).reshape(3)
        R.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "p", p)

    @classmethod
    def identity(cls) -> Pose:
        return cls()

    @classmethod
    def from_axis_angle(cls, position, rotvec) -> Pose:
        return cls(exp_so3(rotvec), position)

    @classmethod
    def from_matrix(cls, g) -> Pose:
        g = np.asarray(g, dtype=float)
        return cls(g[:3, :3], g[:3, 3])

    def matrix(self) -> np.ndarray:
        g = np.eye(4)
        g[:3, :3] = self.R
        g[:3, 3] = self.p
        return g

    def inverse(self) -> Pose:
        Rt = self.R.T
        return Pose(Rt, -Rt @ self.p)

    def __matmul__(self, other: Pose) -> Pose:
        return Pose(_clean(self.R @ other.R), self.R @ other.p + self.p)

    def act(self, points) -> np.ndarray:
        """Transform points given as (3,) or (m, 3)."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.R.T + self.p

    def rotvec(self) -> np.ndarray:
        return log_so3(self.R)

    def allclose(self, other: Pose, atol: float = 1e-9) -> bool:
        return bool(np.allclose(self.R, other.R, atol=atol, rtol=0)
                    and np.allclose(self.p, other.p, atol=atol, rtol=0))

    def __repr__(self) -> str:
        return f"Pose(p={self.p.tolist()}, R={self.R.tolist()})"


@dataclass(frozen=True)
class Twist:
    """Body velocity (v, w): linear m/s, angular rad/s."""

    linear: tuple[float, float, float] = (0.0, 0.0, 0.0)
    angular: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @classmethod
    def from_vector(cls, u) -> Twist:
        u = np.asarray(u, dtype=float).reshape(6)
        return cls(tuple(u[:3].tolist()), tuple(u[3:].tolist()))

    def vector(self) -> np.ndarray:
        return np.array(self.linear + self.angular, dtype=float)

    def hat(self) -> np.ndarray:
        X = np.zeros((4, 4))
        X[:3, :3] = hat(self.angular)
        X[:3, 3] = self.linear
        return X

    def is_zero(self) -> bool:
        return not any(self.linear) and not any(self.angular)


def exp_se3(u) -> Pose:
    """Group exponential of the twist ``u = (v, w)``."""
    v = np.asarray(u, dtype=float).reshape(6)[:3]
    w = np.asarray(u, dtype=float).reshape(6)[3:]
    theta = math.sqrt(float(w @ w))
    K = hat(w)
    K2 = K @ K
    if theta < _SMALL_ANGLE:
        a, b, c = 1.0, 0.5, 1.0 / 6.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta**2
        c = (theta - math.sin(theta)) / theta**3
    R = np.eye(3) + a * K + b * K2
    V = np.eye(3) + b * K + c * K2
    return Pose(_clean(R), V @ v)


def E_R(g: Pose) -> np.ndarray:
    """Stack position over ``e_R`` of the rotation."""
    return np.concatenate([g.p, e_R(g.R)])


def psi(g: Pose) -> float:
    """``0.5 |I4 - g|_F^2 = 0.5 |p|^2 + phi(R)``."""
    return 0.5 * float(g.p @ g.p) + phi(g.R)


def chordal_mean_rotation(rotations: Sequence[np.ndarray]) -> np.ndarray:
    M = np.mean(np.asarray(rotations, dtype=float), axis=0)
    U, s, Vt = np.linalg.svd(M)
    d = np.linalg.det(U @ Vt)
    if s[-1] <= 1e-10 * max(s[0], 1e-300):
        raise DegenerateMeanError(f"mean of rotations is rank deficient (singular values {s})")
    if d < 0 and s[1] - s[2] <= 1e-10 * s[0]:
        raise DegenerateMeanError("projection with det +1 is not unique")
    D = np.diag([1.0, 1.0, 1.0 if d > 0 else -1.0])
    return U @ D @ Vt


def mean_pose(poses: Sequence[Pose]) -> Pose:
    """Minimizer of ``sum_j psi(g^-1 g_j)`` over SE(3).

    The Frobenius cost splits into a position part, minimized by the
    arithmetic mean of positions, and ``sum_j tr(I - R^T R_j)``, maximized in
    ``tr(R^T M)`` by the polar factor of the mean rotation matrix ``M``.
    """
    if len(poses) == 0:
        raise ValueError("mean_pose needs at least one pose")
    if len(poses) == 1:
        return poses[0]
    p = np.mean([g.p for g in poses], axis=0)
    R = chordal_mean_rotation([g.R for g in poses])
    return Pose(R, p)


def verify_sym_inequality(R1, R2, R3) -> tuple[bool, float]:
    """Check the trace inequality on a triple of rotations.

    ``0.5 tr(R1^T R2 - R1^T R3 R2^T R3)
        >= phi(R1^T R3) - phi(R1^T R2) + lambda_min(sym(R1^T R3)) phi(R3^T R2)``

    Returns ``(holds, lhs - rhs)`` with a 1e-9 tolerance on ``holds``.
    """
    R1, R2, R3 = (np.asarray(R, dtype=float) for R in (R1, R2, R3))
    lhs = 0.5 * np.trace(R1.T @ R2 - R1.T @ R3 @ R2.T @ R3)
    lam = np.linalg.eigvalsh(sym_part(R1.T @ R3))[0]
    rhs = phi(R1.T @ R3) - phi(R1.T @ R2) + lam * phi(R3.T @ R2)
    slack = float(lhs - rhs)
    return slack >= -1e-9, slack


# Batched helpers over leading axes; used by the simulator hot loop.

def e_R_batch(R: np.ndarray) -> np.ndarray:
    return 0.5 * np.stack(
        [R[..., 2, 1] - R[..., 1, 2], R[..., 0, 2] - R[..., 2, 0], R[..., 1, 0] - R[..., 0, 1]],
        axis=-1,
    )


def hat_batch(w: np.ndarray) -> np.ndarray:
    K = np.zeros(w.shape[:-1] + (3, 3))
    K[..., 0, 1] = -w[..., 2]
    K[..., 0, 2] = w[..., 1]
    K[..., 1, 0] = w[..., 2]
    K[..., 1, 2] = -w[..., 0]
    K[..., 2, 0] = -w[..., 1]
    K[..., 2, 1] = w[..., 0]
    return K


def exp_se3_batch(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exponentials of twists ``u`` of shape (n, 6); returns (R, p) stacks."""
    v = u[:, :3]
    w = u[:, 3:]
    theta = np.sqrt(np.einsum("ni,ni->n", w, w))
    small = theta < _SMALL_ANGLE
    ts = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(ts) / ts)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(ts)) / ts**2)
    c = np.where(small, 1.0 / 6.0 - theta**2 / 120.0, (ts - np.sin(ts)) / ts**3)
    K = hat_batch(w)
    K2 = K @ K
    eye = np.eye(3)
    R = eye + a[:, None, None] * K + b[:, None, None] * K2
    V = eye + b[:, None, None] * K + c[:, None, None] * K2
    return R, np.einsum("nij,nj->ni", V, v)


def reorthonormalize_batch(R: np.ndarray) -> np.ndarray:
    res = np.linalg.norm(np.swapaxes(R, -1, -2) @ R - np.eye(3), axis=(-2, -1))
    bad = res > ORTHO_TOL
    if np.any(bad):
        R = R.copy()
        for k in np.flatnonzero(bad):
            R[k] = project_to_so3(R[k])
    return R
