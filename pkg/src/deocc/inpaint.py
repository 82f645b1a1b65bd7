"""Optimization-based inpainting: assembles the generator inputs (noised
image, rendered face, occlusion mask) and minimizes the composite objective
directly over pixel values with Adam, standing in for a trained generator
network.

This is a deliberate method substitution: it exercises every loss and every
analytic gradient of the composite objective with zero training data. It is
not a learned inpainter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import maskops
from .blend import BLEND_TOL_DEFAULT, poisson_blend
from .errors import ContractError, NumericalError
from .imagecore import (ImageF, MaskF, NOISE_MEAN_DEFAULT, NOISE_STDDEV_DEFAULT,
                        erode, gaussian_noise_fill, require_binary, require_same_shape)
from .losses import (EmbeddingProvider, DiscriminatorProvider, GeneratorWeights,
                     LossReport, OHEM_FRACTION_DEFAULT, adversarial_g_loss,
                     background_loss, generator_objective, pixel_l1_face,
                     ssim_map, ssim_ohem_loss, tv_loss)

ADAM_BETA1 = 0.5
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
STEP_SIZE_DEFAULT = 0.01
PSNR_CAP_DB = 99.0


@dataclass(frozen=True)
class OptimizerParams:
    step_size: float = STEP_SIZE_DEFAULT
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    iterations: int = 500
    seed: int = 0
    ohem_fraction: float = OHEM_FRACTION_DEFAULT


@dataclass(frozen=True)
class InpaintProblem:
    """Inputs plus every derived quantity the objective needs."""

    image: ImageF
    m_f: MaskF
    i_m: ImageF
    m_m: MaskF
    m_o: MaskF          # occlusion mask (derived)
    i_n: ImageF         # image with noised occlusion (derived)
    i_p: ImageF         # Poisson blend target (derived)
    m_sup: MaskF        # face supervision overlap
    m_m_eroded: MaskF
    m_bg_eroded: MaskF
    i_f: ImageF         # image restricted to the face mask
    weights: GeneratorWeights
    opt: OptimizerParams


@dataclass
class SolveTrace:
    """Per-iteration objective and component values."""

    columns: tuple = ("total", "pix", "sm", "bg", "id", "tv", "adv")
    rows: list = field(default_factory=list)

    def append(self, *values: float) -> None:
        self.rows.append(tuple(float(v) for v in values))

    @property
    def totals(self) -> list[float]:
        return [r[0] for r in self.rows]


def prepare(image: ImageF, m_f: MaskF, i_m: ImageF, m_m: MaskF,
            noise_mean: float = NOISE_MEAN_DEFAULT,
            noise_stddev: float = NOISE_STDDEV_DEFAULT,
            noise_seed: int = 0,
            erosion_radius: float = maskops.EDGE_EROSION_RADIUS_DEFAULT,
            blend_tol: float = BLEND_TOL_DEFAULT,
            blend_max_iter: int | None = None,
            weights: GeneratorWeights = GeneratorWeights(),
            opt: OptimizerParams = OptimizerParams()) -> InpaintProblem:
    """Derive the occlusion mask, noised input, blend target, and eroded masks."""
    require_binary(m_f, "m_f")
    require_binary(m_m, "m_m")
    require_same_shape(image, m_f, "image and m_f")
    require_same_shape(image, m_m, "image and m_m")
    require_same_shape(image, i_m, "image and i_m")
    if not m_m.data.any():
        raise ContractError("render mask is empty: no face prior to inpaint against")

    m_o = maskops.occlusion_mask(m_m, m_f)
    i_n = gaussian_noise_fill(image, m_o, noise_mean, noise_stddev, noise_seed)
    i_p = poisson_blend(image, m_f, i_m, m_m, blend_tol, blend_max_iter)
    m_sup = maskops.supervision_mask(m_m, m_f)
    m_m_eroded = erode(m_m, erosion_radius)
    m_bg_eroded = maskops.background_mask(m_m, erosion_radius)
    i_f = ImageF(image.data * m_f.data[:, :, np.newaxis])
    return InpaintProblem(image, m_f, i_m, m_m, m_o, i_n, i_p, m_sup,
                          m_m_eroded, m_bg_eroded, i_f, weights, opt)


def objective(problem: InpaintProblem, i_hat: ImageF, embed: EmbeddingProvider,
              disc: DiscriminatorProvider, reference: np.ndarray | None = None
              ) -> tuple[LossReport, tuple]:
    """Evaluate the composite objective at i_hat; gradient lives in image
    space (the adversarial term is chained through the discriminator)."""
    if reference is None:
        reference = embed.embed(problem.i_f)
    pix = pixel_l1_face(i_hat, problem.image, problem.m_sup)
    sm = ssim_ohem_loss(i_hat, problem.i_p, problem.m_m_eroded, problem.opt.ohem_fraction)
    bg = background_loss(i_hat, problem.image, problem.m_bg_eroded)
    cos, grad_cos = embed.cosine_with_grad(i_hat, reference)
    ident = LossReport(1.0 - cos, -grad_cos)
    tv = tv_loss(i_hat)
    prob, dprob = disc.evaluate_with_grad(i_hat)
    adv_scalar = adversarial_g_loss(np.array([prob]))
    adv = LossReport(adv_scalar.value, float(adv_scalar.gradient[0]) * dprob)
    total = generator_objective(pix, sm, bg, ident, tv, adv, problem.weights)
    components = (pix.value, sm.value, bg.value, ident.value, tv.value, adv.value)
    return total, components


def solve(problem: InpaintProblem, embed: EmbeddingProvider,
          disc: DiscriminatorProvider) -> tuple[ImageF, SolveTrace]:
    """Adam descent on the composite objective over pixel values.

    Starts from the noised input with the render pasted into the hole, clamps
    to [0,1] after every step, and returns the best-objective iterate plus the
    full per-iteration trace. Deterministic for a fixed problem."""
    opt = problem.opt
    hole = problem.m_o.data[:, :, np.newaxis]
    x = problem.i_n.data * (1.0 - hole) + problem.i_m.data * hole
    x = np.clip(x, 0.0, 1.0)

    reference = embed.embed(problem.i_f)
    trace = SolveTrace()
    m1 = np.zeros_like(x)
    m2 = np.zeros_like(x)
    best_x = x.copy()
    best_val = math.inf

    for step in range(1, opt.iterations + 1):
        report, components = objective(problem, ImageF(x), embed, disc, reference)
        if not math.isfinite(report.value):
            raise NumericalError(f"objective became non-finite at iteration {step}")
        trace.append(report.value, *components)
        if report.value < best_val:
            best_val = report.value
            best_x = x.copy()
        g = report.gradient
        m1 = opt.beta1 * m1 + (1.0 - opt.beta1) * g
        m2 = opt.beta2 * m2 + (1.0 - opt.beta2) * (g * g)
        m1_hat = m1 / (1.0 - opt.beta1 ** step)
        m2_hat = m2 / (1.0 - opt.beta2 ** step)
        x = np.clip(x - opt.step_size * m1_hat / (np.sqrt(m2_hat) + ADAM_EPS), 0.0, 1.0)

    if opt.iterations == 0:
        return ImageF(x), trace
    return ImageF(best_x), trace


def region_metrics(i_hat: ImageF, i_gt: ImageF, region: MaskF,
                   embed: EmbeddingProvider) -> dict:
    """L1 / SSIM / PSNR restricted to the region, plus full-image identity
    cosine. PSNR is capped at 99 dB for identical inputs."""
    require_binary(region, "region")
    require_same_shape(i_hat, i_gt, "images")
    require_same_shape(i_hat, region, "image and region")
    total = float(region.data.sum())
    if total == 0.0:
        raise ContractError("metrics region is empty")
    diff = i_hat.data - i_gt.data
    sel = region.data[:, :, np.newaxis]
    n_vals = total * i_hat.channels
    l1 = float((sel * np.abs(diff)).sum()) / n_vals
    mse = float((sel * diff * diff).sum()) / n_vals
    psnr = PSNR_CAP_DB if mse == 0.0 else min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / mse))
    smap = ssim_map(i_hat, i_gt)
    ssim = float((region.data * smap).sum()) / total
    ident = float(embed.embed(i_hat) @ embed.embed(i_gt))
    return {"l1": l1, "ssim": ssim, "psnr": psnr, "id": ident}
