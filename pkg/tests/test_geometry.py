import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from pointmem.autograd import Tensor, backward, ops
from pointmem.errors import ContractError, DegenerateInputError
from pointmem.geometry import (
    CameraPose,
    FrameKind,
    LossSpace,
    NormalizerMode,
    PointMap,
    Prediction,
    confidence_loss,
    confident_mask,
    estimate_focal,
    focal_from_fov,
    fov_from_focal,
    log_map,
    pixel_grid,
    recover_pose,
    regression_loss,
    umeyama,
    unproject_depth,
)


def random_pose(rng, scale=1.0):
    return CameraPose(Rotation.random(random_state=rng.integers(1 << 31)).as_quat(), rng.normal(size=3), scale)


class TestPose:
    def test_compose_inverse_is_identity(self):
        rng = np.random.default_rng(0)
        p = random_pose(rng, 1.7)
        e = p.compose(p.inverse())
        np.testing.assert_allclose(e.matrix(), np.eye(4), atol=1e-12)

    def test_canonical_quaternion_sign(self):
        p = CameraPose(np.array([0.0, 0.0, 0.0, -1.0]))
        assert p.rotation[3] == 1.0

    def test_apply_matches_matrix(self):
        rng = np.random.default_rng(1)
        p = random_pose(rng, 0.5)
        x = rng.normal(size=(5, 3))
        h = np.c_[x, np.ones(5)] @ p.matrix().T
        np.testing.assert_allclose(p.apply(x), h[:, :3], atol=1e-12)

    def test_invalid_scale(self):
        with pytest.raises(ContractError):
            CameraPose(scale=0.0)


class TestUmeyama:
    def test_noiseless_rigid_recovery(self):
        # Procrustes oracle tolerance
        rng = np.random.default_rng(2)
        for _ in range(20):
            gt = random_pose(rng)
            src = rng.normal(size=(50, 3))
            est = umeyama(src, gt.apply(src))
            assert np.abs(est.R - gt.R).max() < 1e-9
            assert np.abs(est.t - gt.t).max() < 1e-9

    def test_similarity_recovery(self):
        rng = np.random.default_rng(3)
        gt = random_pose(rng, 2.5)
        src = rng.normal(size=(30, 3))
        est = umeyama(src, gt.apply(src), with_scale=True)
        assert est.scale == pytest.approx(2.5, rel=1e-12)

    def test_reflection_is_rejected(self):
        # mirrored target: best proper rotation, det(R) = +1
        rng = np.random.default_rng(4)
        src = rng.normal(size=(20, 3))
        dst = src * np.array([1.0, 1.0, -1.0])
        est = umeyama(src, dst)
        assert np.linalg.det(est.R) == pytest.approx(1.0)

    def test_weights_ignore_outliers(self):
        rng = np.random.default_rng(5)
        gt = random_pose(rng)
        src = rng.normal(size=(40, 3))
        dst = gt.apply(src)
        dst[:5] += 10.0
        w = np.ones(40)
        w[:5] = 0.0
        est = umeyama(src, dst, w)
        assert np.abs(est.t - gt.t).max() < 1e-9

    def test_collinear_raises(self):
        src = np.outer(np.arange(5.0), [1.0, 2.0, 3.0])
        with pytest.raises(DegenerateInputError):
            umeyama(src, src)

    def test_too_few_points(self):
        with pytest.raises(DegenerateInputError):
            umeyama(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            umeyama(np.zeros((4, 3)), np.zeros((5, 3)))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_round_trip_property(self, seed):
        rng = np.random.default_rng(seed)
        gt = random_pose(rng, float(rng.uniform(0.2, 5.0)))
        src = rng.normal(size=(10, 3))
        est = umeyama(src, gt.apply(src), with_scale=True)
        np.testing.assert_allclose(est.apply(src), gt.apply(src), atol=1e-8)


def pinhole_pointmap(H, W, f, rng):
    depth = rng.uniform(1.0, 4.0, size=(H, W))
    return unproject_depth(depth, f)


class TestFocal:
    def test_pinhole_recovery(self):
        rng = np.random.default_rng(6)
        for f in (20.0, 55.4, 300.0):
            pts = pinhole_pointmap(48, 64, f, rng)
            assert estimate_focal(pts) == pytest.approx(f, rel=1e-4)

    def test_reprojection_hits_pixel_centres(self):
        pts = pinhole_pointmap(8, 10, 12.0, np.random.default_rng(7))
        u, v = pixel_grid(8, 10)
        np.testing.assert_allclose(12.0 * pts[..., 0] / pts[..., 2] + 5.0, u, atol=1e-12)
        np.testing.assert_allclose(12.0 * pts[..., 1] / pts[..., 2] + 4.0, v, atol=1e-12)

    def test_fov_round_trip(self):
        assert fov_from_focal(focal_from_fov(60.0, 64), 64) == pytest.approx(60.0, abs=1e-12)
        assert fov_from_focal(32.0, 64) == pytest.approx(90.0)

    def test_too_few_pixels(self):
        pts = np.zeros((4, 4, 3))
        with pytest.raises(DegenerateInputError):
            estimate_focal(pts)


class TestLogLoss:
    def test_log_map_analytic(self):
        x = np.array([math.e - 1.0, 0.0, 0.0])
        assert np.linalg.norm(log_map(x)) == pytest.approx(1.0, abs=1e-12)
        y = np.array([0.0, 3.0, 4.0]) / 5.0 * (math.e - 1.0)
        np.testing.assert_allclose(np.linalg.norm(log_map(y)), 1.0, atol=1e-12)

    def test_log_map_zero(self):
        assert not np.any(log_map(np.zeros(3)))

    def test_log_map_tensor_matches_numpy(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(7, 3)) * 3
        np.testing.assert_allclose(ops.log_map(Tensor(x, dtype=np.float64)).data, log_map(x), atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.01, 100.0), st.integers(0, 1000))
    def test_scale_invariant_loss_invariant_to_scaling(self, s, seed):
        rng = np.random.default_rng(seed)
        gt = PointMap(rng.normal(size=(4, 5, 3)) + np.array([0, 0, 3.0]))
        pred = rng.normal(size=(4, 5, 3)) + np.array([0, 0, 3.0])
        a = regression_loss(PointMap(pred), gt, NormalizerMode.SCALE_INVARIANT).data
        b = regression_loss(PointMap(pred * s), gt, NormalizerMode.SCALE_INVARIANT).data
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_metric_loss_zero_on_gt(self):
        rng = np.random.default_rng(9)
        g = rng.normal(size=(3, 3, 3))
        for space in LossSpace:
            assert regression_loss(PointMap(g.copy()), PointMap(g), NormalizerMode.METRIC, space).data.max() < 1e-12

    def test_metric_loss_sees_scale(self):
        g = np.random.default_rng(10).normal(size=(3, 3, 3))
        assert regression_loss(PointMap(2 * g), PointMap(g), NormalizerMode.METRIC).data.max() > 0

    def test_confidence_loss_value(self):
        loss = Tensor(np.array([0.5, 1.0]))
        conf = Tensor(np.array([2.0, 3.0]))
        out = float(confidence_loss(loss, conf, alpha=0.2).data)
        ref = ((2 * 0.5 - 0.2 * math.log(2)) + (3 * 1.0 - 0.2 * math.log(3))) / 2
        assert out == pytest.approx(ref, rel=1e-6)

    def test_confidence_gradient_flows(self):
        loss = Tensor(np.array([0.5, 1.0]), requires_grad=True)
        conf = Tensor(np.array([2.0, 3.0]), requires_grad=True)
        backward(confidence_loss(loss, conf, alpha=0.2))
        np.testing.assert_allclose(conf.grad, (np.array([0.5, 1.0]) - 0.2 / np.array([2.0, 3.0])) / 2, rtol=1e-6)


def oracle_prediction(H=16, W=20, f=18.0, seed=11, scale=1.0):
    rng = np.random.default_rng(seed)
    local = pinhole_pointmap(H, W, f, rng)
    pose = random_pose(rng)
    glob = pose.apply(local.reshape(-1, 3)).reshape(H, W, 3)
    conf = 1.0 + rng.random((H, W))
    pred = Prediction(PointMap(glob, frame=FrameKind.GLOBAL_FRAME1), PointMap(local, frame=FrameKind.LOCAL_CAMERA), conf)
    return pred, pose, f


class TestRecoverPose:
    def test_noiseless(self):
        pred, pose, f = oracle_prediction()
        est, focal = recover_pose(pred)
        assert np.abs(est.matrix() - pose.matrix()).max() < 1e-6
        assert focal == pytest.approx(f, rel=1e-4)

    def test_threshold_selection(self):
        pred, pose, _ = oracle_prediction()
        est, _ = recover_pose(pred, conf_thresh=1.5)
        assert np.abs(est.t - pose.t).max() < 1e-6

    def test_empty_selection_raises(self):
        pred, _, _ = oracle_prediction()
        pred.global_pts.valid[:] = False
        with pytest.raises(DegenerateInputError):
            recover_pose(pred)

    def test_confident_mask_fraction(self):
        conf = np.arange(10.0)
        valid = np.ones(10, dtype=bool)
        m = confident_mask(conf, valid, 0.7)
        assert m.sum() == 7 and not m[:3].any()
