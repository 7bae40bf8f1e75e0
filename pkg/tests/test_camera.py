import numpy as np
import pytest

from camnet.camera import (
    CameraIntrinsics,
    FeatureModel,
    image_jacobian,
    measure,
    perturb,
    project,
    reconstruct_error,
    reconstruct_error_batch,
)
from camnet.errors import BehindCameraError, DegenerateGeometryError
from camnet.se3 import E_R, Pose, exp_so3
from camnet.verify import finite_difference_jacobian

TET = FeatureModel.tetrahedron()
CAM = CameraIntrinsics(0.03)


def random_view(rng):
    return Pose(exp_so3(rng.uniform(-0.5, 0.5, 3)), rng.uniform([-0.3, -0.3, 1.0], [0.3, 0.3, 3.0]))


def test_project_examples():
    assert np.array_equal(project(CAM, [0, 0, 2]), [0, 0])
    assert np.allclose(project(CAM, [1, 1, 2]), [0.015, 0.015])
    assert np.allclose(project(CameraIntrinsics(1.0), [2, 3, 4]), [0.5, 0.75])


def test_project_behind_camera():
    with pytest.raises(BehindCameraError):
        project(CAM, [0, 0, -1])
    with pytest.raises(BehindCameraError):
        project(CAM, [0, 0, 0])


def test_intrinsics_and_features_validation():
    with pytest.raises(ValueError):
        CameraIntrinsics(0.0)
    with pytest.raises(ValueError):
        FeatureModel(np.zeros((3, 3)))


def test_measure_square_translation():
    sq = FeatureModel(np.array([[0.1, 0.1, 0], [-0.1, 0.1, 0], [-0.1, -0.1, 0], [0.1, -0.1, 0]]))
    f = measure(CAM, sq, Pose(np.eye(3), [0, 0, 2]))
    assert np.allclose(f, (0.03 / 2) * sq.points[:, :2].reshape(-1))


def test_measure_single_feature_subvector():
    feats = FeatureModel(np.array([[0.1, 0, 0], [0, 0.1, 0], [0, 0, 0.1], [0, 0, 0]]))
    f = measure(CAM, feats, Pose(np.eye(3), [0, 0, 1]))
    assert np.allclose(f[:2], [0.003, 0])


def test_measure_identity_composition_bit_identical():
    g = random_view(np.random.default_rng(0))
    assert np.array_equal(measure(CAM, TET, g), measure(CAM, TET, g @ Pose()))


def test_measure_behind_camera_reports_feature():
    g = Pose(np.eye(3), [0, 0, 0.05])
    with pytest.raises(BehindCameraError) as exc:
        measure(CAM, TET, g)
    assert exc.value.feature is not None


def test_measure_depends_only_on_relative_pose():
    rng = np.random.default_rng(1)
    for _ in range(20):
        g_wi, g_io, h = random_view(rng), random_view(rng), random_view(rng)
        g_wo = g_wi @ g_io
        # re-express world frame by h: camera and target both move, relative pose fixed
        rel = (h @ g_wi).inverse() @ (h @ g_wo)
        assert np.allclose(measure(CAM, TET, rel), measure(CAM, TET, g_io), atol=1e-14)


def test_perturb_roundtrip():
    rng = np.random.default_rng(2)
    for _ in range(50):
        e = rng.normal(scale=0.3, size=6)
        e[3:] *= rng.uniform(0, 0.99) / np.linalg.norm(e[3:])
        assert np.allclose(E_R(perturb(e)), e, atol=1e-12)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(3)
    for _ in range(100):
        g = random_view(rng)
        J = image_jacobian(CAM, TET, g)
        Jfd = finite_difference_jacobian(CAM, TET, g, h=1e-6)
        assert np.linalg.norm(J - Jfd) <= 1e-5 * np.linalg.norm(J)


def test_jacobian_zero_perturbation():
    g = random_view(np.random.default_rng(4))
    assert np.array_equal(measure(CAM, TET, g @ perturb(np.zeros(6))) - measure(CAM, TET, g),
                          np.zeros(2 * TET.m))


def test_jacobian_depth_column_sign():
    feats = FeatureModel(np.array([[0.2, 0.1, 0], [0, 0.1, 0.1], [0.1, 0, 0.2], [0, 0, 0]]))
    g = Pose(np.eye(3), [0.0, 0.0, 2.0])
    J = image_jacobian(CAM, feats, g)
    x, _, z = g.act(feats.points[0])
    assert J[0, 2] == pytest.approx(-0.03 * x / z**2, rel=1e-12)
    assert J[0, 2] < 0


def test_reconstruct_exact_measurement_is_zero():
    g = random_view(np.random.default_rng(5))
    assert np.allclose(reconstruct_error(CAM, TET, g, measure(CAM, TET, g)), 0, atol=1e-15)


def test_reconstruct_small_perturbation():
    rng = np.random.default_rng(6)
    for _ in range(20):
        g = random_view(rng)
        e = rng.normal(size=6)
        e *= 1e-4 / np.linalg.norm(e)
        f = measure(CAM, TET, g @ perturb(e))
        assert np.linalg.norm(reconstruct_error(CAM, TET, g, f) - e) < 1e-6


def test_reconstruct_quadratic_convergence():
    rng = np.random.default_rng(7)
    g = random_view(rng)
    d = rng.normal(size=6)
    d /= np.linalg.norm(d)
    deltas = 1e-2 / 2.0 ** np.arange(8)
    errs = [np.linalg.norm(reconstruct_error(CAM, TET, g, measure(CAM, TET, g @ perturb(s * d))) - s * d)
            for s in deltas]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 3.2) & (ratios < 4.8))


def test_reconstruct_degenerate_collinear():
    feats = FeatureModel(np.array([[0, 0, 0], [0.1, 0, 0], [0.2, 0, 0], [0.1, 0, 0]]))
    g = Pose(np.eye(3), [0, 0, 2])
    with pytest.raises(DegenerateGeometryError):
        reconstruct_error(CAM, feats, g, measure(CAM, feats, g))


def test_batch_reconstruction_matches_scalar():
    rng = np.random.default_rng(8)
    bars = [random_view(rng) for _ in range(4)]
    trues = [b @ perturb(rng.normal(scale=0.05, size=6)) for b in bars]
    lam = np.array([0.03, 0.02, 0.05, 0.03])
    zmin = np.full(4, 1e-6)
    e = reconstruct_error_batch(lam, zmin, TET.points,
                                np.array([b.R for b in bars]), np.array([b.p for b in bars]),
                                np.array([t.R for t in trues]), np.array([t.p for t in trues]))
    for k in range(4):
        c = CameraIntrinsics(lam[k])
        ref = reconstruct_error(c, TET, bars[k], measure(c, TET, trues[k]))
        assert np.allclose(e[k], ref, atol=1e-12)
