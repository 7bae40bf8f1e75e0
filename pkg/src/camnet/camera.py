"""Pinhole measurement synthesis, image Jacobian and pose-error reconstruction.

Image coordinates are metric (meters on the sensor plane): a point
``(x, y, z)`` in the camera frame projects to ``(lam / z) * (x, y)``.

Error coordinates ``e = (e_p, e_w)`` follow ``E_R``: the perturbed pose is
``g_bar @ perturb(e)`` where ``perturb(e)`` has position ``e_p`` and a rotation
whose ``e_R`` equals ``e_w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BehindCameraError, DegenerateGeometryError
from .se3 import Pose, exp_so3, hat

DEFAULT_Z_MIN = 1e-6
RANK_RCOND = 1e-8


@dataclass(frozen=True)
class CameraIntrinsics:
    focal_length: float
    z_min: float = DEFAULT_Z_MIN

    def __post_init__(self):
        if not self.focal_length > 0:
            raise ValueError(f"focal length must be positive, got {self.focal_length}")


@dataclass(frozen=True, eq=False)
class FeatureModel:
    """Feature points in the object frame, shape (m, 3) with m >= 4."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"feature points must have shape (m, 3), got {pts.shape}")
        if pts.shape[0] < 4:
            raise ValueError(f"need at least 4 feature points, got {pts.shape[0]}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @classmethod
    def tetrahedron(cls, edge: float = 0.2) -> FeatureModel:
        """Regular tetrahedron centred at the object origin."""
        a = edge / (2.0 * math.sqrt(2.0))
        pts = a * np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
        return cls(pts)


def project(intrinsics: CameraIntrinsics, point) -> np.ndarray:
    x, y, z = np.asarray(point, dtype=float).reshape(3)
    if z <= intrinsics.z_min:
        raise BehindCameraError(z, intrinsics.z_min)
    return (intrinsics.focal_length / z) * np.array([x, y])


def measure(intrinsics: CameraIntrinsics, features: FeatureModel, g_io: Pose) -> np.ndarray:
    """Stacked image coordinates (2m,) of all features seen from relative pose ``g_io``."""
    pts = g_io.act(features.points)
    z = pts[:, 2]
    bad = np.flatnonzero(z <= intrinsics.z_min)
    if bad.size:
        k = int(bad[0])
        raise BehindCameraError(float(z[k]), intrinsics.z_min, feature=k)
    return (intrinsics.focal_length * pts[:, :2] / z[:, None]).reshape(-1)


def perturb(e) -> Pose:
    """Pose with ``E_R(perturb(e)) == e``; needs ``|e[3:]| <= 1``."""
    e = np.asarray(e, dtype=float).reshape(6)
    w = e[3:]
    s = float(np.linalg.norm(w))
    if s > 1.0:
        raise ValueError(f"rotation error norm {s} exceeds 1")
    scale = 1.0 if s < 1e-12 else math.asin(s) / s
    return Pose(exp_so3(scale * w), e[:3])


def image_jacobian(intrinsics: CameraIntrinsics, features: FeatureModel, g_bar: Pose) -> np.ndarray:
    """First-order sensitivity (2m, 6) of ``measure(g_bar @ perturb(e))`` to ``e`` at 0."""
    pts = g_bar.act(features.points)
    if np.any(pts[:, 2] <= intrinsics.z_min):
        k = int(np.flatnonzero(pts[:, 2] <= intrinsics.z_min)[0])
        raise BehindCameraError(float(pts[k, 2]), intrinsics.z_min, feature=k)
    lam = intrinsics.focal_length
    rows = []
    for q, (x, y, z) in zip(features.points, pts):
        dproj = (lam / z) * np.array([[1.0, 0.0, -x / z], [0.0, 1.0, -y / z]])
        # d(point)/de = R_bar [I, -hat(q)]
        dpt = g_bar.R @ np.hstack([np.eye(3), -hat(q)])
        rows.append(dproj @ dpt)
    return np.vstack(rows)


def reconstruct_error(
    intrinsics: CameraIntrinsics,
    features: FeatureModel,
    g_bar: Pose,
    f_measured,
    rcond: float = RANK_RCOND,
) -> np.ndarray:
    """Least-squares estimate of ``E_R(g_bar^-1 g_io)`` from the image error."""
    f_bar = measure(intrinsics, features, g_bar)
    J = image_jacobian(intrinsics, features, g_bar)
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    if s[-1] < rcond * s[0]:
        raise DegenerateGeometryError(
            f"image Jacobian rank < 6 (singular values {np.array2string(s, precision=3)})"
        )
    f_e = np.asarray(f_measured, dtype=float).reshape(-1) - f_bar
    return Vt.T @ ((U.T @ f_e) / s)


def _project_batch(lam: np.ndarray, pts: np.ndarray, z_min: np.ndarray) -> np.ndarray:
    z = pts[..., 2]
    bad = z <= z_min[:, None]
    if np.any(bad):
        k, l = np.argwhere(bad)[0]
        raise BehindCameraError(float(z[k, l]), float(z_min[k]), feature=int(l))
    return lam[:, None, None] * pts[..., :2] / z[..., None]


def reconstruct_error_batch(
    lam: np.ndarray,
    z_min: np.ndarray,
    q: np.ndarray,
    R_bar: np.ndarray,
    p_bar: np.ndarray,
    R_true: np.ndarray,
    p_true: np.ndarray,
    rcond: float = RANK_RCOND,
) -> np.ndarray:
    """Vectorized :func:`reconstruct_error` over k cameras sharing features ``q`` (m, 3).

    Raises the first camera error encountered; the caller maps the batch
    index back to a camera id via the ``batch_index`` attribute.
    """
    k = R_bar.shape[0]
    qT = q.T
    pts_true = np.einsum("kij,jm->kmi", R_true, qT) + p_true[:, None, :]
    pts_bar = np.einsum("kij,jm->kmi", R_bar, qT) + p_bar[:, None, :]
    try:
        f = _project_batch(lam, pts_true, z_min)
    except BehindCameraError as exc:
        exc.batch_index = int(np.argwhere(pts_true[..., 2] <= z_min[:, None])[0, 0])
        raise
    try:
        f_bar = _project_batch(lam, pts_bar, z_min)
    except BehindCameraError as exc:
        exc.batch_index = int(np.argwhere(pts_bar[..., 2] <= z_min[:, None])[0, 0])
        raise
    x, y, z = pts_bar[..., 0], pts_bar[..., 1], pts_bar[..., 2]
    m = q.shape[0]
    s_ = lam[:, None] / z
    dproj = np.zeros((k, m, 2, 3))
    dproj[..., 0, 0] = s_
    dproj[..., 1, 1] = s_
    dproj[..., 0, 2] = -s_ * x / z
    dproj[..., 1, 2] = -s_ * y / z
    qh = np.zeros((m, 3, 3))
    qh[:, 0, 1], qh[:, 0, 2], qh[:, 1, 2] = -q[:, 2], q[:, 1], -q[:, 0]
    qh[:, 1, 0], qh[:, 2, 0], qh[:, 2, 1] = q[:, 2], -q[:, 1], q[:, 0]
    dpt = np.empty((k, m, 3, 6))
    dpt[..., :3] = R_bar[:, None]
    dpt[..., 3:] = -np.einsum("kij,mjl->kmil", R_bar, qh)
    J = (dproj @ dpt).reshape(k, 2 * m, 6)
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    deg = s[:, -1] < rcond * s[:, 0]
    if np.any(deg):
        exc = DegenerateGeometryError("image Jacobian rank < 6")
        exc.batch_index = int(np.flatnonzero(deg)[0])
        raise exc
    f_e = (f - f_bar).reshape(k, 2 * m)
    coef = np.einsum("kji,kj->ki", U, f_e) / s
    return np.einsum("kji,kj->ki", Vt, coef)
