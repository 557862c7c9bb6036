import numpy as np
import pytest

from fsg.core import EulerPose, Image, Landmark3DSet, LandmarkSet, rotation_matrix
from fsg.errors import PipelineError, ValidationError
from fsg.generators import CountingGenerator, IdentityGenerator, LandmarkFaceGenerator
from fsg.reenact import auto_step_count, plan_steps, reenact_sequence, transfer_expression
from fsg import synthetic


def random_shape(rng, n=12):
    return Landmark3DSet(rng.normal(scale=10.0, size=(n, 3)) + [40.0, 40.0, 0.0])


def test_plan_yaw_interpolation(rng):
    v = random_shape(rng)
    plan = plan_steps(v, EulerPose(0, 0, 0), v, EulerPose(30, 0, 0), n=3)
    assert [p.yaw for p in plan.poses] == [10.0, 20.0, 30.0]
    assert plan.ts == (pytest.approx(1 / 3), pytest.approx(2 / 3), 1.0)


def test_plan_identity_is_source_projection(rng):
    v = random_shape(rng)
    pose = EulerPose(12.0, -7.0, 3.0)
    plan = plan_steps(v, pose, v, pose, n=1)
    assert np.allclose(plan.steps[0].points, v.points[:, :2], atol=1e-9)


def test_auto_step_count_rule():
    assert auto_step_count(EulerPose(0, 0, 0), EulerPose(40, 0, 0)) == 3
    assert auto_step_count(EulerPose(0, 0, 0), EulerPose(24, 32, 0)) == 3
    assert auto_step_count(EulerPose(0, 0, 0), EulerPose(0, 0, 90)) == 1
    assert auto_step_count(EulerPose(0, 0, 0), EulerPose(15, 0, 0)) == 1
    assert auto_step_count(EulerPose(0, 0, 0), EulerPose(15.01, 0, 0)) == 2
    plan_n = plan_steps(
        synthetic.template_landmarks_3d(),
        EulerPose(0, 0, 0),
        synthetic.template_landmarks_3d(),
        EulerPose(40, 0, 0),
    ).n
    assert plan_n == 3


def test_plan_rejects_mismatched_counts(rng):
    a = random_shape(rng, 10)
    b = random_shape(rng, 11)
    with pytest.raises(ValidationError):
        plan_steps(a, EulerPose(0, 0, 0), b, EulerPose(10, 0, 0), n=2)


def test_endpoint_reproduces_target_pose_and_centroid(rng):
    for _ in range(10):
        v_s = random_shape(rng)
        v_t = random_shape(rng)
        e_s = EulerPose(*rng.uniform(-40, 40, 3))
        e_t = EulerPose(*rng.uniform(-40, 40, 3))
        plan = plan_steps(v_s, e_s, v_t, e_t, n=4)
        # Independent endpoint oracle: re-pose the source shape at the target.
        shape = (v_s.points - v_s.centroid()) @ rotation_matrix(e_s)
        expected = shape @ rotation_matrix(e_t).T + v_t.centroid()
        assert np.abs(plan.steps[-1].points - expected[:, :2]).max() < 1e-9
        centroid_2d = plan.steps[-1].points.mean(axis=0)
        assert np.abs(centroid_2d - v_t.centroid()[:2]).max() < 1e-9


def test_pose_distance_strictly_decreases(rng):
    v = random_shape(rng)
    e_s, e_t = EulerPose(-30, 12, 5), EulerPose(35, -20, -10)
    plan = plan_steps(v, e_s, v, e_t, n=5)
    dists = [np.linalg.norm(p.as_array() - e_t.as_array()) for p in plan.poses]
    assert all(d1 < d0 for d0, d1 in zip(dists, dists[1:]))
    assert dists[-1] == 0.0


def test_final_landmark_substitution(rng):
    v = random_shape(rng)
    override = LandmarkSet(rng.normal(size=(12, 2)))
    plan = plan_steps(
        v, EulerPose(0, 0, 0), v, EulerPose(20, 0, 0), n=2, final_landmarks=override
    )
    assert np.array_equal(plan.steps[-1].points, override.points)


def test_reenact_sequence_identity_mock(synthetic_scene):
    views, target = synthetic_scene
    source = views[0]
    plan = plan_steps(
        synthetic.pose_landmarks(source.pose, (36, 36, 0), 40)[0],
        source.pose,
        synthetic.pose_landmarks(target.pose, (36, 36, 0), 40)[0],
        target.pose,
        n=1,
    )
    out, mask = reenact_sequence(source.image, plan, IdentityGenerator())
    assert np.array_equal(out.data, source.image.data)
    assert (mask.labels == 1).all()


def test_reenact_sequence_invokes_generator_n_times(rng):
    v = random_shape(rng)
    plan = plan_steps(v, EulerPose(0, 0, 0), v, EulerPose(30, 0, 0), n=3)
    gen = CountingGenerator(delta=0.1)
    img = Image(np.full((16, 16, 3), 0.2, dtype=np.float32))
    out, _ = reenact_sequence(img, plan, gen)
    assert gen.calls == 3
    assert out.data.mean() == pytest.approx(0.5, abs=1e-6)


def test_reenact_sequence_names_failing_step(rng):
    v = random_shape(rng)
    plan = plan_steps(v, EulerPose(0, 0, 0), v, EulerPose(30, 0, 0), n=3)

    class FailsSecond(IdentityGenerator):
        calls = 0

        def generate(self, image, heatmap=None):
            self.calls += 1
            if self.calls == 2:
                raise RuntimeError("boom")
            return super().generate(image, heatmap)

    with pytest.raises(PipelineError) as err:
        reenact_sequence(Image(np.zeros((8, 8, 3), np.float32)), plan, FailsSecond())
    assert "step 2/3" in str(err.value)


def test_warp_mock_moves_landmarks_to_plan_target():
    size, scale = 96, 44.0
    e_s, e_t = EulerPose(0, 0, 0), EulerPose(24, 10, 0)
    v_s, p_s = synthetic.pose_landmarks(e_s, (size / 2, size / 2, 0), scale)
    v_t, _ = synthetic.pose_landmarks(e_t, (size / 2 + 2, size / 2 - 1, 0), scale)
    source_img = synthetic.render_face(p_s, size, size)

    for n in (1, 2):
        plan = plan_steps(v_s, e_s, v_t, e_t, n=n)
        gen = LandmarkFaceGenerator()
        reenact_sequence(source_img, plan, gen)
        applied = gen.applied_landmarks[-1].points
        # The mock is an exact landmark mover; the oracle is the plan itself.
        assert np.abs(applied - plan.steps[-1].points).max() < 0.5


def test_transfer_expression_identity():
    _, lm = synthetic.pose_landmarks(EulerPose(0, 0, 0), (32, 32, 0), 30)
    out = transfer_expression(lm, lm)
    assert np.array_equal(out.points, lm.points)


def test_transfer_expression_preserves_non_mouth(rng):
    _, target = synthetic.pose_landmarks(EulerPose(5, -3, 0), (32, 32, 0), 30)
    _, source = synthetic.pose_landmarks(EulerPose(-10, 4, 2), (40, 30, 0), 35)
    out = transfer_expression(target, source)
    outside = [i for i in range(70) if i not in range(48, 68)]
    assert np.array_equal(out.points[outside], target.points[outside])
    inside = list(range(48, 68))
    assert not np.array_equal(out.points[inside], target.points[inside])


def test_transfer_expression_scales_aperture(rng):
    base = synthetic.template_landmarks_3d(30.0).points[:, :2] + 50.0
    target = base.copy()
    source = base.copy() * 1.7 + rng.normal(scale=0.0, size=base.shape) + [5.0, -3.0]
    # Open the source mouth: spread the inner-lip ring vertically.
    source[60:68, 1] += np.array([0, -2, -4, -2, 0, 2, 4, 2]) * 1.7
    t_lm = LandmarkSet(target)
    s_lm = LandmarkSet(source)
    out = transfer_expression(t_lm, s_lm)

    # Independent similarity oracle on the mouth-corner anchors.
    s_c = source[48] + 1j * 0
    a1 = complex(*source[48])
    a2 = complex(*source[54])
    b1 = complex(*target[48])
    b2 = complex(*target[54])
    ratio = (b2 - b1) / (a2 - a1)
    src_gap = np.abs(
        complex(*source[66]) - complex(*source[62])
    )  # inner-lip vertical pair
    out_gap = np.abs(
        complex(*out.points[66]) - complex(*out.points[62])
    )
    assert out_gap == pytest.approx(abs(ratio) * src_gap, abs=1e-6)


def test_transfer_expression_idempotent(rng):
    _, target = synthetic.pose_landmarks(EulerPose(5, -3, 0), (32, 32, 0), 30)
    _, source = synthetic.pose_landmarks(EulerPose(-10, 4, 2), (40, 30, 0), 35)
    once = transfer_expression(target, source)
    twice = transfer_expression(once, source)
    assert np.array_equal(once.points, twice.points)


def test_transfer_expression_bad_range(rng):
    _, lm = synthetic.pose_landmarks(EulerPose(0, 0, 0), (32, 32, 0), 30)
    with pytest.raises(ValidationError):
        transfer_expression(lm, lm, mouth_range=range(60, 60))
    with pytest.raises(ValidationError):
        transfer_expression(lm, lm, mouth_range=range(60, 80))
    with pytest.raises(ValidationError):
        transfer_expression(lm, lm, mouth_range=range(0, 10), anchors=(48, 54))
