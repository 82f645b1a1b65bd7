"""Every training loss of the pipeline as a pure function returning value plus
analytic gradient with respect to its primary input.

Image losses differentiate with respect to the first image argument. The
composite objectives combine component reports linearly; the generator
objective requires all component gradients to live in image space (the
adversarial term is chained through the discriminator by the caller).
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .imagecore import ImageF, MaskF, erode, require_binary, require_same_shape
from .morphable import CoeffVector

PROB_EPS = 1e-7
OHEM_FRACTION_DEFAULT = 0.25

SSIM_WINDOW_SIZE = 11
SSIM_WINDOW_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2

# reconstruction objective weights
RECON_PIX_WEIGHT = 1.92
RECON_ID_WEIGHT = 0.2
RECON_LDMK_WEIGHT = 1.6e-3


@dataclass(frozen=True)
class LossReport:
    """Scalar loss plus the gradient w.r.t. the differentiated input.

    gradient is an array matching that input, or a dict of named arrays for
    objectives whose components differentiate different inputs."""

    value: float
    gradient: np.ndarray | dict | None = None
    aux: np.ndarray | None = None

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ContractError("loss value must be finite")


@dataclass(frozen=True)
class GeneratorWeights:
    """Weights of the composite generator objective."""

    pix: float = 10.0
    sm: float = 5.0
    bg: float = 5.0
    ident: float = 0.2
    tv: float = 0.1
    adv: float = 0.01


# ---------------------------------------------------------------------------
# Pluggable providers

class EmbeddingProvider(abc.ABC):
    """Maps an image to a unit-norm feature vector, with a cosine gradient."""

    dim: int

    @abc.abstractmethod
    def embed(self, image: ImageF) -> np.ndarray:
        """Unit-norm feature vector of length dim."""

    @abc.abstractmethod
    def cosine_with_grad(self, image: ImageF, reference: np.ndarray) -> tuple[float, np.ndarray]:
        """cos(F(image), reference) and its gradient w.r.t. the image data."""


class GrayProjectionEmbedding(EmbeddingProvider):
    """Seeded random linear projection of the 32×32 block-averaged gray image,
    normalized to the unit sphere. Stands in for a trained face-recognition
    embedder."""

    def __init__(self, seed: int = 0, dim: int = 128, grid: int = 32):
        self.dim = dim
        self.grid = grid
        rng = np.random.default_rng(seed)
        self.projection = rng.standard_normal((dim, grid * grid))

    def _pooled(self, image: ImageF) -> np.ndarray:
        if image.height < self.grid or image.width < self.grid:
            raise ContractError(f"embedder needs images at least {self.grid}px on a side")
        gray = image.data.mean(axis=2)
        h, w, g = image.height, image.width, self.grid
        if h % g == 0 and w % g == 0:
            return gray.reshape(g, h // g, g, w // g).mean(axis=(1, 3))
        row_chunks = np.array_split(np.arange(h), g)
        col_chunks = np.array_split(np.arange(w), g)
        pooled = np.empty((g, g))
        for i, rc in enumerate(row_chunks):
            block = gray[rc]
            for j, cc in enumerate(col_chunks):
                pooled[i, j] = block[:, cc].mean()
        return pooled

    def _raw(self, image: ImageF) -> np.ndarray:
        return self.projection @ self._pooled(image).ravel()

    def embed(self, image: ImageF) -> np.ndarray:
        r = self._raw(image)
        norm = np.linalg.norm(r)
        if norm < 1e-12:
            raise ContractError("embedding collapsed to zero norm")
        return r / norm

    def cosine_with_grad(self, image: ImageF, reference: np.ndarray) -> tuple[float, np.ndarray]:
        r = self._raw(image)
        norm = np.linalg.norm(r)
        if norm < 1e-12:
            raise ContractError("embedding collapsed to zero norm")
        u = r / norm
        cos = float(u @ reference)
        d_r = (reference - cos * u) / norm
        d_pooled = (self.projection.T @ d_r).reshape(self.grid, self.grid)
        h, w, g = image.height, image.width, self.grid
        if h % g == 0 and w % g == 0:
            bh, bw = h // g, w // g
            grad_gray = np.repeat(np.repeat(d_pooled, bh, axis=0), bw, axis=1) / (bh * bw)
        else:
            grad_gray = np.zeros((h, w))
            row_chunks = np.array_split(np.arange(h), g)
            col_chunks = np.array_split(np.arange(w), g)
            for i, rc in enumerate(row_chunks):
                for j, cc in enumerate(col_chunks):
                    grad_gray[np.ix_(rc, cc)] = d_pooled[i, j] / (rc.size * cc.size)
        grad = np.repeat(grad_gray[:, :, np.newaxis], image.channels, axis=2) / image.channels
        return cos, grad


class DiscriminatorProvider(abc.ABC):
    """Maps an image to a realness probability, with an image-space gradient."""

    @abc.abstractmethod
    def evaluate(self, image: ImageF) -> float:
        """Probability in (eps, 1-eps)."""

    @abc.abstractmethod
    def evaluate_with_grad(self, image: ImageF) -> tuple[float, np.ndarray]:
        """Probability plus d(prob)/d(image data)."""


class NullDiscriminator(DiscriminatorProvider):
    """Always undecided: probability 0.5 with zero gradient. Keeps the
    adversarial path wired without a trained network."""

    def evaluate(self, image: ImageF) -> float:
        return 0.5

    def evaluate_with_grad(self, image: ImageF) -> tuple[float, np.ndarray]:
        return 0.5, np.zeros_like(image.data)


# ---------------------------------------------------------------------------
# Segmentation losses

def dice_loss(pred: MaskF, gt: MaskF) -> LossReport:
    """1 - 2*sum(pred*gt)/(sum(pred)+sum(gt)), gradient w.r.t. pred."""
    require_binary(gt, "gt")
    require_same_shape(pred, gt, "pred and gt")
    p, g = pred.data, gt.data
    denom = float(p.sum() + g.sum())
    if denom == 0.0:
        raise ContractError("dice loss undefined when both masks are empty")
    inter = float((p * g).sum())
    value = 1.0 - 2.0 * inter / denom
    grad = -2.0 * (g * denom - inter) / (denom * denom)
    return LossReport(value, grad)


def bce_ohem_loss(pred: MaskF, gt: MaskF, ohem_fraction: float = OHEM_FRACTION_DEFAULT) -> LossReport:
    """Per-pixel binary cross entropy, averaged over the hardest
    ceil(fraction*N) pixels (ties resolved toward lower pixel index).
    Gradient is zero outside the selected set."""
    require_binary(gt, "gt")
    require_same_shape(pred, gt, "pred and gt")
    if not 0.0 < ohem_fraction <= 1.0:
        raise ContractError("ohem_fraction must be in (0, 1]")
    p = np.clip(pred.data, PROB_EPS, 1.0 - PROB_EPS)
    g = gt.data
    per_pixel = -(g * np.log(p) + (1.0 - g) * np.log(1.0 - p))
    n = per_pixel.size
    k = max(1, math.ceil(ohem_fraction * n))
    flat = per_pixel.ravel()
    # stable sort on descending loss keeps lower indices first among ties
    selected = np.argsort(-flat, kind="stable")[:k]
    value = float(flat[selected].mean())
    grad = np.zeros(n)
    d = (-g / p + (1.0 - g) / (1.0 - p)).ravel()
    grad[selected] = d[selected] / k
    return LossReport(value, grad.reshape(per_pixel.shape), aux=per_pixel)


# ---------------------------------------------------------------------------
# Reconstruction losses

def coef_loss(c_hat: CoeffVector, c_gt: CoeffVector) -> LossReport:
    """Mean absolute difference over all 239 coefficients."""
    diff = c_hat.data - c_gt.data
    n = diff.size
    return LossReport(float(np.abs(diff).mean()), np.sign(diff) / n)


def masked_pixel_l2(i_hat: ImageF, i_f: ImageF, m: MaskF) -> LossReport:
    """Mean per-pixel Euclidean (across channels) distance over the mask."""
    require_binary(m, "m")
    require_same_shape(i_hat, i_f, "images")
    require_same_shape(i_hat, m, "image and mask")
    total = float(m.data.sum())
    if total == 0.0:
        raise ContractError("mask is empty")
    diff = i_hat.data - i_f.data
    norms = np.sqrt((diff * diff).sum(axis=2))
    value = float((m.data * norms).sum()) / total
    safe = np.where(norms > 0.0, norms, 1.0)
    grad = diff * (m.data / safe / total)[:, :, np.newaxis]
    return LossReport(value, grad)


def identity_loss(i_hat: ImageF, i_f: ImageF, embed: EmbeddingProvider) -> LossReport:
    """1 - cos(F(i_hat), F(i_f)), gradient w.r.t. i_hat."""
    reference = embed.embed(i_f)
    cos, grad_cos = embed.cosine_with_grad(i_hat, reference)
    return LossReport(1.0 - cos, -grad_cos)


def landmark_loss(q_hat: np.ndarray, q: np.ndarray, weights: np.ndarray) -> LossReport:
    """Weighted mean squared landmark distance; gradient w.r.t. q_hat."""
    q_hat = np.asarray(q_hat, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if q_hat.shape != q.shape or q_hat.shape[0] != weights.shape[0]:
        raise ContractError("landmark arrays have mismatched dims")
    n = q_hat.shape[0]
    diff = q_hat - q
    value = float((weights * (diff * diff).sum(axis=1)).sum()) / n
    grad = 2.0 * weights[:, np.newaxis] * diff / n
    return LossReport(value, grad)


def reconstruction_objective(coef: LossReport, pix: LossReport, ident: LossReport,
                             ldmk: LossReport, pix_weight: float = RECON_PIX_WEIGHT,
                             id_weight: float = RECON_ID_WEIGHT,
                             ldmk_weight: float = RECON_LDMK_WEIGHT) -> LossReport:
    """coef + w_pix*pix + w_id*id + w_ldmk*ldmk. Components differentiate
    different inputs, so the gradient is a dict keyed by component."""
    value = coef.value + pix_weight * pix.value + id_weight * ident.value + ldmk_weight * ldmk.value
    grads = {
        "coef": coef.gradient,
        "pix": None if pix.gradient is None else pix_weight * pix.gradient,
        "ident": None if ident.gradient is None else id_weight * ident.gradient,
        "ldmk": None if ldmk.gradient is None else ldmk_weight * ldmk.gradient,
    }
    return LossReport(value, grads)


# ---------------------------------------------------------------------------
# Inpainting losses

def pixel_l1_face(i_hat: ImageF, i_f: ImageF, m: MaskF) -> LossReport:
    """Mean absolute difference over mask pixels, channels summed."""
    require_binary(m, "m")
    require_same_shape(i_hat, i_f, "images")
    require_same_shape(i_hat, m, "image and mask")
    total = float(m.data.sum())
    if total == 0.0:
        raise ContractError("mask is empty")
    diff = i_hat.data - i_f.data
    value = float((m.data[:, :, np.newaxis] * np.abs(diff)).sum()) / total
    grad = m.data[:, :, np.newaxis] * np.sign(diff) / total
    return LossReport(value, grad)


def background_loss(i_hat: ImageF, i: ImageF, m_bg_eroded: MaskF) -> LossReport:
    """Mean absolute deviation from the input over the eroded background."""
    return pixel_l1_face(i_hat, i, m_bg_eroded)


def tv_loss(i_hat: ImageF) -> LossReport:
    """Total variation: mean squared forward differences, last row/col zero."""
    if i_hat.height < 2 and i_hat.width < 2:
        raise ContractError("total variation needs at least a 1×2 or 2×1 image")
    x = i_hat.data
    n = x.size
    dx = x[:, 1:, :] - x[:, :-1, :]
    dy = x[1:, :, :] - x[:-1, :, :]
    value = (float((dx * dx).sum()) + float((dy * dy).sum())) / n
    grad = np.zeros_like(x)
    grad[:, 1:, :] += 2.0 * dx / n
    grad[:, :-1, :] -= 2.0 * dx / n
    grad[1:, :, :] += 2.0 * dy / n
    grad[:-1, :, :] -= 2.0 * dy / n
    return LossReport(value, grad)


def adversarial_g_loss(d_out: np.ndarray) -> LossReport:
    """-mean(log d) over discriminator outputs; the generator's term."""
    d = np.clip(np.asarray(d_out, dtype=np.float64).ravel(), PROB_EPS, 1.0 - PROB_EPS)
    value = float(-np.log(d).mean())
    grad = -1.0 / (d.size * d)
    return LossReport(value, grad)


def adversarial_d_loss(d_real: np.ndarray, d_fake: np.ndarray) -> LossReport:
    """BCE the discriminator minimizes: -(mean log d_real + mean log(1-d_fake)).
    Gradient is a dict for both inputs."""
    dr = np.clip(np.asarray(d_real, dtype=np.float64).ravel(), PROB_EPS, 1.0 - PROB_EPS)
    df = np.clip(np.asarray(d_fake, dtype=np.float64).ravel(), PROB_EPS, 1.0 - PROB_EPS)
    value = float(-(np.log(dr).mean() + np.log(1.0 - df).mean()))
    grads = {"real": -1.0 / (dr.size * dr), "fake": 1.0 / (df.size * (1.0 - df))}
    return LossReport(value, grads)


def generator_objective(pix: LossReport, sm: LossReport, bg: LossReport,
                        ident: LossReport, tv: LossReport, adv: LossReport,
                        weights: GeneratorWeights = GeneratorWeights()) -> LossReport:
    """Weighted sum of the six generator terms; all gradients must already be
    in image space (shape of the optimized image)."""
    parts = [(weights.pix, pix), (weights.sm, sm), (weights.bg, bg),
             (weights.ident, ident), (weights.tv, tv), (weights.adv, adv)]
    value = 0.0
    grad = None
    for w, report in parts:
        value += w * report.value
        if report.gradient is None:
            raise ContractError("generator objective needs image-space gradients for every term")
        g = w * np.asarray(report.gradient)
        grad = g if grad is None else grad + g
        if grad.shape != g.shape:
            raise ContractError("component gradients have mismatched shapes")
    return LossReport(value, grad)


# ---------------------------------------------------------------------------
# SSIM machinery (Gaussian window, symmetric-reflection padding) with an
# exact adjoint so the OHEM'd SSIM loss has an analytic image gradient.

def _gaussian_kernel(size: int = SSIM_WINDOW_SIZE, sigma: float = SSIM_WINDOW_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return k / k.sum()


def _sym_indices(n: int, pad: int) -> np.ndarray:
    idx = np.arange(-pad, n + pad)
    idx = np.where(idx < 0, -1 - idx, idx)
    return np.where(idx >= n, 2 * n - 1 - idx, idx)


class _WindowOp:
    """Normalized Gaussian windowed mean with symmetric padding, plus its
    exact adjoint (used by the analytic SSIM gradient)."""

    def __init__(self, height: int, width: int,
                 size: int = SSIM_WINDOW_SIZE, sigma: float = SSIM_WINDOW_SIGMA):
        self.kernel = _gaussian_kernel(size, sigma)
        self.pad = size // 2
        if min(height, width) < self.pad + 1:
            raise ContractError(f"image too small for a {size}-tap window")
        self.rows = _sym_indices(height, self.pad)
        self.cols = _sym_indices(width, self.pad)
        self.height, self.width = height, width

    def apply(self, x: np.ndarray) -> np.ndarray:
        xp = x[self.rows][:, self.cols]
        tmp = np.zeros((self.height, xp.shape[1]))
        for t, kt in enumerate(self.kernel):
            tmp += kt * xp[t:t + self.height, :]
        out = np.zeros((self.height, self.width))
        for t, kt in enumerate(self.kernel):
            out += kt * tmp[:, t:t + self.width]
        return out

    def adjoint(self, g: np.ndarray) -> np.ndarray:
        tmp = np.zeros((self.height, self.width + 2 * self.pad))
        for t, kt in enumerate(self.kernel):
            tmp[:, t:t + self.width] += kt * g
        gp = np.zeros((self.height + 2 * self.pad, self.width + 2 * self.pad))
        for t, kt in enumerate(self.kernel):
            gp[t:t + self.height, :] += kt * tmp
        folded_rows = np.zeros((self.height, gp.shape[1]))
        np.add.at(folded_rows, self.rows, gp)
        out = np.zeros((self.height, self.width))
        np.add.at(out.T, self.cols, folded_rows.T)
        return out


def _ssim_channel(win: _WindowOp, x: np.ndarray, y: np.ndarray) -> dict:
    mx, my = win.apply(x), win.apply(y)
    sxx, syy, sxy = win.apply(x * x), win.apply(y * y), win.apply(x * y)
    a1 = 2.0 * mx * my + SSIM_C1
    a2 = 2.0 * (sxy - mx * my) + SSIM_C2
    b1 = mx * mx + my * my + SSIM_C1
    b2 = (sxx - mx * mx) + (syy - my * my) + SSIM_C2
    return {"mx": mx, "my": my, "a1": a1, "a2": a2, "b1": b1, "b2": b2,
            "map": (a1 * a2) / (b1 * b2)}


def _ssim_channel_grad(win: _WindowOp, stats: dict, x: np.ndarray, y: np.ndarray,
                       upstream: np.ndarray) -> np.ndarray:
    """d(sum(upstream * map))/dx via the window adjoint."""
    mx, my = stats["mx"], stats["my"]
    a1, a2, b1, b2 = stats["a1"], stats["a2"], stats["b1"], stats["b2"]
    m = stats["map"]
    denom = b1 * b2
    d_mx = (2.0 * my * (a2 - a1) - 2.0 * mx * m * (b2 - b1)) / denom
    d_sxx = -m / b2
    d_sxy = 2.0 * a1 / denom
    grad = win.adjoint(upstream * d_mx)
    grad += 2.0 * x * win.adjoint(upstream * d_sxx)
    grad += y * win.adjoint(upstream * d_sxy)
    return grad


def ssim_map(x: ImageF, y: ImageF, window_sigma: float = SSIM_WINDOW_SIGMA,
             window_size: int = SSIM_WINDOW_SIZE) -> np.ndarray:
    """Per-pixel structural similarity, averaged over channels."""
    require_same_shape(x, y, "x and y")
    if x.channels != y.channels:
        raise ContractError("x and y must have the same channel count")
    win = _WindowOp(x.height, x.width, window_size, window_sigma)
    acc = np.zeros((x.height, x.width))
    for ch in range(x.channels):
        acc += _ssim_channel(win, x.data[:, :, ch], y.data[:, :, ch])["map"]
    return acc / x.channels


def ssim_ohem_loss(i_hat: ImageF, i_p: ImageF, m_m_eroded: MaskF,
                   ohem_fraction: float = OHEM_FRACTION_DEFAULT) -> LossReport:
    """Negated mean SSIM over the hardest (lowest-similarity) fraction of the
    eroded-mask pixels; gradient w.r.t. i_hat through the SSIM map."""
    require_binary(m_m_eroded, "m_m_eroded")
    require_same_shape(i_hat, i_p, "images")
    require_same_shape(i_hat, m_m_eroded, "image and mask")
    if not 0.0 < ohem_fraction <= 1.0:
        raise ContractError("ohem_fraction must be in (0, 1]")
    masked = np.flatnonzero(m_m_eroded.data.ravel() == 1.0)
    if masked.size == 0:
        raise ContractError("eroded mask is empty")

    win = _WindowOp(i_hat.height, i_hat.width)
    stats = [_ssim_channel(win, i_hat.data[:, :, ch], i_p.data[:, :, ch])
             for ch in range(i_hat.channels)]
    full_map = sum(s["map"] for s in stats) / i_hat.channels

    vals = full_map.ravel()[masked]
    k = max(1, math.ceil(ohem_fraction * masked.size))
    order = np.lexsort((masked, vals))  # ascending similarity, then pixel index
    selected = masked[order[:k]]
    value = -float(vals[order[:k]].mean())

    upstream = np.zeros(i_hat.height * i_hat.width)
    upstream[selected] = -1.0 / (k * i_hat.channels)
    upstream = upstream.reshape(i_hat.height, i_hat.width)
    grad = np.empty_like(i_hat.data)
    for ch in range(i_hat.channels):
        grad[:, :, ch] = _ssim_channel_grad(win, stats[ch], i_hat.data[:, :, ch],
                                            i_p.data[:, :, ch], upstream)
    return LossReport(value, grad, aux=full_map)


# ---------------------------------------------------------------------------
# Finite-difference gradient checking

@dataclass
class GradCheckResult:
    name: str
    max_rel_err: float
    probes: int
    skipped: int
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = self.max_rel_err < 1e-4


def finite_difference_check(fn, x0: np.ndarray, name: str, probes: int = 200,
                            h: float = 1e-4, seed: int = 0,
                            skip_probe=None) -> GradCheckResult:
    """Compare fn(x).gradient against central differences at random
    coordinates. fn maps a raw array to a LossReport; skip_probe(flat_index)
    may exclude subgradient kinks."""
    rng = np.random.default_rng(seed)
    x0 = np.asarray(x0, dtype=np.float64)
    analytic = np.asarray(fn(x0).gradient)
    coords = rng.permutation(x0.size)[:probes]
    max_rel = 0.0
    skipped = 0
    flat = x0.ravel()
    for i in coords:
        if skip_probe is not None and skip_probe(int(i)):
            skipped += 1
            continue
        e = np.zeros_like(flat)
        e[i] = h
        f_plus = fn((flat + e).reshape(x0.shape)).value
        f_minus = fn((flat - e).reshape(x0.shape)).value
        fd = (f_plus - f_minus) / (2.0 * h)
        a = analytic.ravel()[i]
        scale = max(abs(a), abs(fd))
        if scale < 1e-7:
            continue  # both effectively zero; relative error unresolvable
        max_rel = max(max_rel, abs(a - fd) / scale)
    return GradCheckResult(name, max_rel, len(coords), skipped)


def standard_gradient_checks(size: int = 32, probes: int = 200, h: float = 1e-4,
                             seed: int = 0) -> list[GradCheckResult]:
    """Finite-difference validation of every differentiable loss on seeded
    random inputs. Probes at L1 subgradient kinks (|input - target| < 1e-6)
    are excluded."""
    if size < 32:
        raise ContractError("gradient-check scenes need size >= 32 (embedder grid)")
    rng = np.random.default_rng(seed)
    results = []

    def rand_img():
        return rng.uniform(0.2, 0.8, size=(size, size, 3))

    gt_mask = MaskF((rng.uniform(size=(size, size)) < 0.5).astype(np.float64))
    pred0 = rng.uniform(0.1, 0.9, size=(size, size))
    results.append(finite_difference_check(
        lambda a: dice_loss(MaskF(a), gt_mask), pred0, "dice", probes, h, seed))
    for frac, tag in ((1.0, "bce_ohem_f1.00"), (OHEM_FRACTION_DEFAULT, "bce_ohem_f0.25")):
        results.append(finite_difference_check(
            lambda a, f=frac: bce_ohem_loss(MaskF(a), gt_mask, f), pred0, tag, probes, h, seed))

    target = ImageF(rand_img())
    m = MaskF((rng.uniform(size=(size, size)) < 0.6).astype(np.float64))
    x0 = rand_img()

    def l2_skip(i):
        p = i // 3
        d = x0.reshape(-1, 3)[p] - target.data.reshape(-1, 3)[p]
        return float(np.linalg.norm(d)) < 1e-6
    results.append(finite_difference_check(
        lambda a: masked_pixel_l2(ImageF(a), target, m), x0, "masked_pixel_l2",
        probes, h, seed, skip_probe=l2_skip))

    embed = GrayProjectionEmbedding(seed=seed)
    results.append(finite_difference_check(
        lambda a: identity_loss(ImageF(a), target, embed), x0, "identity", probes, h, seed))

    q = rng.standard_normal((68, 3))
    w68 = np.ones(68)
    w68[30:40] = 20.0
    results.append(finite_difference_check(
        lambda a: landmark_loss(a, q, w68), rng.standard_normal((68, 3)),
        "landmark", probes, h, seed))

    def l1_skip(i):
        return abs(x0.ravel()[i] - target.data.ravel()[i]) < 1e-6
    results.append(finite_difference_check(
        lambda a: pixel_l1_face(ImageF(a), target, m), x0, "pixel_l1_face",
        probes, h, seed, skip_probe=l1_skip))

    box = np.zeros((size, size))
    box[6:size - 6, 6:size - 6] = 1.0
    m_m = MaskF(box)
    m_bar = erode(m_m, 2)
    results.append(finite_difference_check(
        lambda a: ssim_ohem_loss(ImageF(a), target, m_bar, OHEM_FRACTION_DEFAULT),
        x0, "ssim_ohem", probes, h, seed))

    m_bg = erode(MaskF(1.0 - box), 2)
    results.append(finite_difference_check(
        lambda a: background_loss(ImageF(a), target, m_bg), x0, "background",
        probes, h, seed, skip_probe=l1_skip))

    results.append(finite_difference_check(
        lambda a: tv_loss(ImageF(a)), x0, "tv", probes, h, seed))

    d0 = rng.uniform(0.1, 0.9, size=64)
    results.append(finite_difference_check(
        adversarial_g_loss, d0, "adversarial_g", probes, h, seed))

    hole = np.zeros((size, size))
    hole[12:20, 12:20] = 1.0
    m_f = MaskF(box * (1.0 - hole))
    m_sup = MaskF(m_m.data * m_f.data)
    i_p = ImageF(rand_img())
    disc = NullDiscriminator()
    ref = embed.embed(target)

    def gen_obj(a: np.ndarray) -> LossReport:
        img = ImageF(a)
        pix = pixel_l1_face(img, target, m_sup)
        sm = ssim_ohem_loss(img, i_p, m_bar, OHEM_FRACTION_DEFAULT)
        bg = background_loss(img, target, m_bg)
        cos, gcos = embed.cosine_with_grad(img, ref)
        ident = LossReport(1.0 - cos, -gcos)
        tv = tv_loss(img)
        prob, dprob = disc.evaluate_with_grad(img)
        adv_s = adversarial_g_loss(np.array([prob]))
        adv = LossReport(adv_s.value, float(adv_s.gradient[0]) * dprob)
        return generator_objective(pix, sm, bg, ident, tv, adv)

    results.append(finite_difference_check(
        gen_obj, x0, "generator_objective", probes, h, seed, skip_probe=l1_skip))
    return results
