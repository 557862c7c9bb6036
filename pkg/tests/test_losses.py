import numpy as np
import pytest

from fsg.core import SegMask
from fsg.errors import ValidationError
from fsg.losses import (
    LossWeights,
    blending_objective,
    gan_loss,
    grad_gan_loss_fake,
    grad_perceptual_loss,
    grad_pixel_loss,
    inpainting_objective,
    perceptual_loss,
    pixel_loss,
    reconstruction_loss,
    reenactment_objective,
    segmentation_objective,
    segmentation_pixel_term,
)

from oracles import central_difference_gradient


def feature_stack(rng, dims=((2, 3, 4), (1, 5, 5))):
    return [rng.normal(size=d) for d in dims]


class TestPerceptual:
    def test_zero_on_identical(self, rng):
        fx = feature_stack(rng)
        assert perceptual_loss(fx, [a.copy() for a in fx]) == 0.0

    def test_single_element_by_hand(self):
        assert perceptual_loss([np.array([[[3.0]]])], [np.array([[[1.0]]])]) == 2.0

    def test_matches_elementwise_oracle(self, rng):
        fx, fy = feature_stack(rng), feature_stack(rng)
        expected = 0.0
        for a, b in zip(fx, fy):
            expected += np.abs(a - b).sum() / a.size
        assert perceptual_loss(fx, fy) == pytest.approx(expected, rel=1e-12)

    def test_dim_mismatch(self, rng):
        with pytest.raises(ValidationError):
            perceptual_loss([rng.normal(size=(2, 2, 2))], [rng.normal(size=(2, 2, 3))])

    def test_homogeneity(self, rng):
        fx, fy = feature_stack(rng), feature_stack(rng)
        base = perceptual_loss(fx, fy)
        for alpha in (0.5, 2.0):
            scaled = [b + alpha * (a - b) for a, b in zip(fx, fy)]
            assert perceptual_loss(scaled, fy) == pytest.approx(alpha * base, rel=1e-9)


class TestPixel:
    def test_zero_on_identical(self, rng):
        x = rng.random((4, 4, 3))
        assert pixel_loss(x, x.copy()) == 0.0

    def test_two_pixel_example(self):
        assert pixel_loss(np.array([0.0, 1.0]), np.array([1.0, 1.0])) == 1.0

    def test_matches_oracle_and_mean_toggle(self, rng):
        x, y = rng.random((5, 4)), rng.random((5, 4))
        assert pixel_loss(x, y) == pytest.approx(np.abs(x - y).sum(), rel=1e-12)
        assert pixel_loss(x, y, reduction="mean") == pytest.approx(
            np.abs(x - y).mean(), rel=1e-12
        )

    def test_homogeneity(self, rng):
        x, y = rng.random((5, 4)), rng.random((5, 4))
        base = pixel_loss(x, y)
        for alpha in (0.5, 2.0):
            assert pixel_loss(y + alpha * (x - y), y) == pytest.approx(
                alpha * base, rel=1e-9
            )


class TestReconstruction:
    def test_default_weights(self, rng):
        x, y = rng.random((4, 4, 3)), rng.random((4, 4, 3))
        fx, fy = feature_stack(rng), feature_stack(rng)
        total = reconstruction_loss(x, y, fx, fy)
        assert total == pytest.approx(
            perceptual_loss(fx, fy) + 0.1 * pixel_loss(x, y), rel=1e-12
        )

    def test_zero_weights(self, rng):
        x, y = rng.random((4, 4)), rng.random((4, 4))
        fx, fy = feature_stack(rng), feature_stack(rng)
        weights = LossWeights(perc=0.0, pixel=0.0)
        assert reconstruction_loss(x, y, fx, fy, weights) == 0.0

    def test_random_weighted_sum(self, rng):
        x, y = rng.random((4, 4)), rng.random((4, 4))
        fx, fy = feature_stack(rng), feature_stack(rng)
        w = LossWeights(perc=0.7, pixel=0.25)
        expected = 0.7 * perceptual_loss(fx, fy) + 0.25 * pixel_loss(x, y)
        assert reconstruction_loss(x, y, fx, fy, w) == pytest.approx(expected, rel=1e-12)


class TestGan:
    def test_half_scores_closed_form(self):
        maps = [np.full((3, 3), 0.5)]
        value = gan_loss(maps, maps, side="discriminator")
        assert value == pytest.approx(2.0 * np.log(0.5), rel=1e-12)

    def test_two_scales_double_single(self, rng):
        r = [rng.uniform(0.2, 0.8, (4, 4))]
        f = [rng.uniform(0.2, 0.8, (4, 4))]
        single = gan_loss(r, f, side="discriminator")
        double = gan_loss(r * 2, f * 2, side="discriminator")
        assert double == pytest.approx(2.0 * single, rel=1e-12)

    def test_matches_log_mean_oracle(self, rng):
        r = [rng.uniform(0.05, 0.95, (3, 5)), rng.uniform(0.05, 0.95, (2, 2))]
        f = [rng.uniform(0.05, 0.95, (3, 5)), rng.uniform(0.05, 0.95, (2, 2))]
        expected = sum(
            np.log(a).mean() + np.log(1.0 - b).mean() for a, b in zip(r, f)
        )
        assert gan_loss(r, f, side="discriminator") == pytest.approx(expected, rel=1e-12)
        gen = sum(-np.log(b).mean() for b in f)
        assert gan_loss([], f, side="generator") == pytest.approx(gen, rel=1e-12)
        sat = sum(np.log(1.0 - b).mean() for b in f)
        assert gan_loss([], f, side="generator", saturating=True) == pytest.approx(
            sat, rel=1e-12
        )

    def test_rejects_out_of_range_scores(self):
        with pytest.raises(ValidationError):
            gan_loss([np.array([[0.5]])], [np.array([[1.5]])], side="discriminator")
        with pytest.raises(ValidationError):
            gan_loss([np.array([[-0.1]])], [np.array([[0.5]])], side="discriminator")

    def test_boundary_scores_survive_clamping(self):
        value = gan_loss([np.array([[1.0]])], [np.array([[0.0]])], side="discriminator")
        assert np.isfinite(value)


class TestObjectives:
    def test_reenactment_default_weights_forced_arithmetic(self):
        assert reenactment_objective(1.0, 1.0, 1.0, 1.0) == pytest.approx(
            2.101, abs=1e-12
        )

    def test_reenactment_zero_terms(self):
        assert reenactment_objective(0.0, 0.0, 0.0, 0.0) == 0.0

    def test_reenactment_weighted_sum_oracle(self, rng):
        terms = rng.random(4)
        w = LossWeights(stepwise=0.3, rec=1.2, adv=0.01, seg=0.5)
        expected = 0.3 * terms[0] + 1.2 * terms[1] + 0.01 * terms[2] + 0.5 * terms[3]
        assert reenactment_objective(*terms, weights=w) == pytest.approx(
            expected, rel=1e-12
        )

    def test_reenactment_missing_term(self):
        with pytest.raises(ValidationError):
            reenactment_objective(None, 1.0, 1.0, 1.0)

    def test_segmentation_objective(self, rng):
        a = SegMask(rng.integers(0, 3, (6, 6)).astype(np.uint8))
        b = SegMask(rng.integers(0, 3, (6, 6)).astype(np.uint8))
        assert segmentation_objective(0.7, a, b, 0.0) == 0.7
        assert segmentation_objective(0.7, a, a, 0.5) == 0.7
        lam = 0.25
        expected = 0.7 + lam * segmentation_pixel_term(a, b)
        assert segmentation_objective(0.7, a, b, lam) == pytest.approx(expected, rel=1e-12)
        # One-hot L1 counts two units per differing pixel.
        differing = (a.labels != b.labels).sum()
        assert segmentation_pixel_term(a, b) == 2.0 * differing

    def test_inpainting_objective(self, rng):
        rec, adv = float(rng.random()), float(rng.random())
        assert inpainting_objective(rec, adv) == pytest.approx(
            rec + 0.001 * adv, rel=1e-12
        )
        with pytest.raises(ValidationError):
            inpainting_objective(None, adv)

    def test_blending_objective_requires_target(self, rng):
        x = rng.random((4, 4, 3))
        fx, fy = feature_stack(rng), feature_stack(rng)
        with pytest.raises(ValidationError):
            blending_objective(x, None, fx, fy, 0.0)

    def test_blending_objective_zero_when_output_is_target(self, rng):
        x = rng.random((4, 4, 3))
        fx = feature_stack(rng)
        value = blending_objective(x, x.copy(), fx, [a.copy() for a in fx], 0.0)
        assert value == 0.0

    def test_blending_objective_weighted_oracle(self, rng):
        x, p = rng.random((4, 4, 3)), rng.random((4, 4, 3))
        fx, fy = feature_stack(rng), feature_stack(rng)
        adv = 0.3
        w = LossWeights()
        expected = w.rec * reconstruction_loss(x, p, fx, fy, w) + w.adv * adv
        assert blending_objective(x, p, fx, fy, adv, w) == pytest.approx(
            expected, rel=1e-12
        )


class TestGradients:
    def test_pixel_gradient_matches_fd(self, rng):
        x = rng.uniform(0.1, 0.9, (3, 3))
        y = x + rng.choice([-1.0, 1.0], size=(3, 3)) * rng.uniform(0.05, 0.2, (3, 3))
        analytic = grad_pixel_loss(x, y)
        numeric = central_difference_gradient(lambda v: pixel_loss(v, y), x)
        assert np.abs(analytic - numeric).max() / np.abs(numeric).max() < 1e-4

    def test_perceptual_gradient_matches_fd(self, rng):
        fx = [rng.uniform(0.1, 0.9, (2, 3, 3))]
        fy = [fx[0] + rng.choice([-1.0, 1.0], size=(2, 3, 3)) * 0.1]
        analytic = grad_perceptual_loss(fx, fy)[0]
        numeric = central_difference_gradient(
            lambda v: perceptual_loss([v], fy), fx[0]
        )
        assert np.abs(analytic - numeric).max() / np.abs(numeric).max() < 1e-4

    @pytest.mark.parametrize("side,saturating", [
        ("generator", False),
        ("generator", True),
        ("discriminator", False),
    ])
    def test_gan_gradient_matches_fd(self, rng, side, saturating):
        fake = [rng.uniform(0.2, 0.8, (3, 3))]
        analytic = grad_gan_loss_fake(fake, side=side, saturating=saturating)[0]

        def f(v):
            if side == "discriminator":
                return gan_loss([np.full((3, 3), 0.5)], [v], side=side)
            return gan_loss([], [v], side=side, saturating=saturating)

        numeric = central_difference_gradient(f, fake[0])
        rel = np.abs(analytic - numeric).max() / np.abs(numeric).max()
        assert rel < 1e-4


def test_loss_weights_reject_negative():
    with pytest.raises(ValidationError):
        LossWeights(perc=-1.0)
