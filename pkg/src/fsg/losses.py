"""Training-loss formulas as pure numerical functions.

No autodiff and no networks here: callers supply images, feature maps
(``(C, H, W)`` arrays, one per backbone layer) and discriminator score maps
(probability rasters per scale).  Each differentiable loss has a companion
``grad_*`` returning the analytic (sub)gradient so external training code can
be validated against central finite differences.

Reduction conventions: the perceptual loss normalizes each layer by
``C*H*W``; the pixel L1 loss uses SUM reduction by default with a ``"mean"``
toggle, because downstream weight magnitudes depend on the choice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Image, SegMask, one_hot
from .errors import ValidationError

SCORE_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    """Per-term weights; defaults follow the reference training recipe."""

    perc: float = 1.0
    pixel: float = 0.1
    adv: float = 0.001
    seg: float = 0.1
    rec: float = 1.0
    stepwise: float = 1.0
    reenactment: float = 0.0

    def __post_init__(self):
        for name in ("perc", "pixel", "adv", "seg", "rec", "stepwise", "reenactment"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValidationError(f"loss weight {name} must be finite and >= 0")


def _as_array(x) -> np.ndarray:
    if isinstance(x, Image):
        return x.data.astype(np.float64)
    arr = np.asarray(x, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ValidationError("loss inputs must be finite")
    return arr


def _check_pairs(fx: Sequence, fy: Sequence, what: str):
    if len(fx) != len(fy):
        raise ValidationError(f"{what}: layer counts differ ({len(fx)} vs {len(fy)})")
    pairs = []
    for i, (a, b) in enumerate(zip(fx, fy)):
        a, b = _as_array(a), _as_array(b)
        if a.shape != b.shape:
            raise ValidationError(f"{what}: layer {i} shapes differ ({a.shape} vs {b.shape})")
        pairs.append((a, b))
    return pairs


def perceptual_loss(fx: Sequence, fy: Sequence) -> float:
    """Sum over layers of the size-normalized L1 feature distance."""
    total = 0.0
    for a, b in _check_pairs(fx, fy, "perceptual loss"):
        total += float(np.abs(a - b).sum()) / a.size
    return total


def grad_perceptual_loss(fx: Sequence, fy: Sequence) -> list[np.ndarray]:
    grads = []
    for a, b in _check_pairs(fx, fy, "perceptual loss"):
        grads.append(np.sign(a - b) / a.size)
    return grads


def pixel_loss(x, y, reduction: str = "sum") -> float:
    """Pixelwise L1 distance."""
    a, b = _as_array(x), _as_array(y)
    if a.shape != b.shape:
        raise ValidationError(f"pixel loss: shapes differ ({a.shape} vs {b.shape})")
    total = float(np.abs(a - b).sum())
    if reduction == "sum":
        return total
    if reduction == "mean":
        return total / a.size
    raise ValidationError(f"unknown reduction {reduction!r}")


def grad_pixel_loss(x, y, reduction: str = "sum") -> np.ndarray:
    a, b = _as_array(x), _as_array(y)
    g = np.sign(a - b)
    if reduction == "mean":
        g = g / a.size
    elif reduction != "sum":
        raise ValidationError(f"unknown reduction {reduction!r}")
    return g


def reconstruction_loss(x, y, fx: Sequence, fy: Sequence, weights: LossWeights = LossWeights()) -> float:
    """Weighted perceptual + pixel reconstruction objective."""
    return weights.perc * perceptual_loss(fx, fy) + weights.pixel * pixel_loss(x, y)


def _check_scores(scores: Sequence, what: str) -> list[np.ndarray]:
    out = []
    for i, s in enumerate(scores):
        arr = _as_array(s)
        if arr.size == 0:
            raise ValidationError(f"{what}: scale {i} is empty")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValidationError(f"{what}: scale {i} has scores outside [0, 1]")
        out.append(np.clip(arr, SCORE_EPS, 1.0 - SCORE_EPS))
    return out


def gan_loss(
    real_scores: Sequence,
    fake_scores: Sequence,
    side: str = "discriminator",
    saturating: bool = False,
) -> float:
    """Multi-scale adversarial objective over probability score maps.

    ``side="discriminator"`` returns the value the discriminators maximize,
    ``sum_i E[log D_i(real)] + E[log(1 - D_i(fake))]``.  ``side="generator"``
    returns the term the generator minimizes: the non-saturating reading
    ``-E[log D_i(fake)]`` by default, or ``E[log(1 - D_i(fake))]`` when
    ``saturating`` is set.  Expectations are raster means.
    """
    fake = _check_scores(fake_scores, "gan loss (fake)")
    if side == "generator":
        if saturating:
            return float(sum(np.log1p(-f).mean() for f in fake))
        return float(sum(-np.log(f).mean() for f in fake))
    if side != "discriminator":
        raise ValidationError(f"unknown gan side {side!r}")
    real = _check_scores(real_scores, "gan loss (real)")
    if len(real) != len(fake):
        raise ValidationError("gan loss: scale counts differ between real and fake")
    total = 0.0
    for r, f in zip(real, fake):
        total += float(np.log(r).mean() + np.log1p(-f).mean())
    return total


def grad_gan_loss_fake(
    fake_scores: Sequence,
    side: str = "generator",
    saturating: bool = False,
) -> list[np.ndarray]:
    """d(loss)/d(fake score map) per scale; zero where clamping saturates."""
    grads = []
    for s in fake_scores:
        arr = _as_array(s)
        live = (arr > SCORE_EPS) & (arr < 1.0 - SCORE_EPS)
        clipped = np.clip(arr, SCORE_EPS, 1.0 - SCORE_EPS)
        if side == "generator" and not saturating:
            g = -1.0 / (clipped * arr.size)
        elif side == "generator":
            g = -1.0 / ((1.0 - clipped) * arr.size)
        elif side == "discriminator":
            g = -1.0 / ((1.0 - clipped) * arr.size)
        else:
            raise ValidationError(f"unknown gan side {side!r}")
        grads.append(np.where(live, g, 0.0))
    return grads


def reenactment_objective(
    stepwise_rec: float,
    rec: float,
    adv: float,
    seg_pixel: float,
    weights: LossWeights = LossWeights(),
) -> float:
    """Full reenactment-generator objective from its four sub-terms."""
    terms = {"stepwise_rec": stepwise_rec, "rec": rec, "adv": adv, "seg_pixel": seg_pixel}
    for name, value in terms.items():
        if value is None:
            raise ValidationError(f"reenactment objective missing term {name!r}")
    return (
        weights.stepwise * stepwise_rec
        + weights.rec * rec
        + weights.adv * adv
        + weights.seg * seg_pixel
    )


def segmentation_pixel_term(a: SegMask, b: SegMask) -> float:
    """Pixelwise L1 between one-hot encodings of two label masks."""
    if a.labels.shape != b.labels.shape:
        raise ValidationError("segmentation masks must share dimensions")
    return pixel_loss(one_hot(a), one_hot(b))


def segmentation_objective(
    cross_entropy: float,
    target_mask: SegMask,
    reenacted_mask: SegMask,
    reenactment_weight: float = 0.0,
) -> float:
    """Cross-entropy plus reenactment-guided mask agreement."""
    if cross_entropy is None:
        raise ValidationError("segmentation objective missing the cross-entropy term")
    return cross_entropy + reenactment_weight * segmentation_pixel_term(
        target_mask, reenacted_mask
    )


def inpainting_objective(rec: float, adv: float, weights: LossWeights = LossWeights()) -> float:
    if rec is None or adv is None:
        raise ValidationError("inpainting objective needs rec and adv terms")
    return weights.rec * rec + weights.adv * adv


def blending_objective(
    output,
    poisson_target,
    fx: Sequence,
    fy: Sequence,
    adv: float,
    weights: LossWeights = LossWeights(),
) -> float:
    """Blending-generator objective: reconstruction against the Poisson
    solution plus the adversarial term."""
    if poisson_target is None:
        raise ValidationError("blending objective requires the Poisson blending target")
    rec = reconstruction_loss(output, poisson_target, fx, fy, weights)
    return weights.rec * rec + weights.adv * adv
