"""Occlusion-synthesis data engine: composites occlusion patches onto face
images under a seeded similarity transform and emits (occluded image,
ground-truth face mask, occlusion mask) triples with a reproducible manifest.

Asset layout, for faces and occlusions alike: `<name>.png` (RGB) paired with
`<name>.mask.png` (8-bit gray; >=128 means face / opaque). Swatches are plain
RGB PNGs. The manifest is JSON-lines, one record per sample.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, PlacementError
from .imagecore import (ImageF, MaskF, load_mask_png, load_png, require_binary,
                        require_same_shape, save_mask_png, save_png, write_tensor)

SCALE_MIN, SCALE_MAX = 0.05, 4.0
SWATCH_PROB_DEFAULT = 0.5
MIN_ON_IMAGE_ALPHA = 0.25


@dataclass(frozen=True)
class OcclusionPatch:
    texture: ImageF
    alpha: MaskF
    name: str

    def __post_init__(self):
        if self.texture.channels != 3:
            raise ContractError("patch texture must be RGB")
        require_binary(self.alpha, "patch alpha")
        require_same_shape(self.texture, self.alpha, "patch texture and alpha")
        if not self.alpha.data.any():
            raise ContractError("patch alpha has no opaque pixels")


@dataclass(frozen=True)
class PlacementParams:
    scale: float
    rotation: float      # radians
    dx: float            # pixels, offset of patch center from face center
    dy: float
    seed: int = 0

    def __post_init__(self):
        if not SCALE_MIN <= self.scale <= SCALE_MAX:
            raise ContractError(f"scale must be in [{SCALE_MIN}, {SCALE_MAX}]")


def _warp_patch(patch: OcclusionPatch, placement: PlacementParams,
                height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-map the patch into the face frame: nearest-neighbor alpha,
    bilinear texture (clamp-to-edge). Returns (alpha bool, texture)."""
    ph, pw = patch.alpha.height, patch.alpha.width
    cy_f, cx_f = (height - 1) / 2.0 + placement.dy, (width - 1) / 2.0 + placement.dx
    cy_p, cx_p = (ph - 1) / 2.0, (pw - 1) / 2.0
    cos_t, sin_t = math.cos(placement.rotation), math.sin(placement.rotation)
    inv_s = 1.0 / placement.scale

    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    rel_x, rel_y = xx - cx_f, yy - cy_f
    # inverse rotation then inverse scale
    src_x = inv_s * (cos_t * rel_x + sin_t * rel_y) + cx_p
    src_y = inv_s * (-sin_t * rel_x + cos_t * rel_y) + cy_p

    nx = np.floor(src_x + 0.5).astype(np.int64)
    ny = np.floor(src_y + 0.5).astype(np.int64)
    in_patch = (nx >= 0) & (nx < pw) & (ny >= 0) & (ny < ph)
    alpha = np.zeros((height, width), dtype=bool)
    alpha[in_patch] = patch.alpha.data[ny[in_patch], nx[in_patch]] >= 0.5

    x0 = np.clip(np.floor(src_x).astype(np.int64), 0, pw - 1)
    y0 = np.clip(np.floor(src_y).astype(np.int64), 0, ph - 1)
    x1 = np.minimum(x0 + 1, pw - 1)
    y1 = np.minimum(y0 + 1, ph - 1)
    fx = np.clip(src_x - x0, 0.0, 1.0)[:, :, np.newaxis]
    fy = np.clip(src_y - y0, 0.0, 1.0)[:, :, np.newaxis]
    tex = patch.texture.data
    texture = ((tex[y0, x0] * (1 - fx) + tex[y0, x1] * fx) * (1 - fy)
               + (tex[y1, x0] * (1 - fx) + tex[y1, x1] * fx) * fy)
    return alpha, texture


def composite(face: ImageF, m_f: MaskF, patch: OcclusionPatch,
              placement: PlacementParams) -> tuple[ImageF, MaskF]:
    """Paste the transformed patch: I = face*(1-M_o) + patch*M_o, and the
    surviving face mask M_gt = m_f*(1-M_o). Raises if the placement leaves
    no patch pixel on the image."""
    if face.channels != 3:
        raise ContractError("face image must be RGB")
    require_binary(m_f, "m_f")
    require_same_shape(face, m_f, "face and m_f")
    alpha, texture = _warp_patch(patch, placement, face.height, face.width)
    if not alpha.any():
        raise PlacementError(f"placement leaves patch {patch.name!r} fully off-image")
    m_o = alpha.astype(np.float64)
    out = np.where(alpha[:, :, np.newaxis], texture, face.data)
    m_gt = MaskF(m_f.data * (1.0 - m_o))
    return ImageF(np.clip(out, 0.0, 1.0)), m_gt


def occlusion_mask_of(face: ImageF, patch: OcclusionPatch,
                      placement: PlacementParams) -> MaskF:
    """The transformed patch alpha in the face frame."""
    alpha, _ = _warp_patch(patch, placement, face.height, face.width)
    return MaskF(alpha.astype(np.float64))


def substitute_texture(patch: OcclusionPatch, texture_swatch: ImageF, seed: int = 0) -> OcclusionPatch:
    """Replace the patch texture with the swatch tiled from a seeded offset;
    the alpha is untouched."""
    if texture_swatch.channels != 3:
        raise ContractError("swatch must be RGB")
    if texture_swatch.height == 0 or texture_swatch.width == 0:
        raise ContractError("swatch is empty")
    rng = np.random.default_rng(seed)
    oy = int(rng.integers(0, texture_swatch.height))
    ox = int(rng.integers(0, texture_swatch.width))
    rows = (np.arange(patch.texture.height) + oy) % texture_swatch.height
    cols = (np.arange(patch.texture.width) + ox) % texture_swatch.width
    tiled = texture_swatch.data[np.ix_(rows, cols)]
    return OcclusionPatch(ImageF(tiled), patch.alpha, patch.name)


# ---------------------------------------------------------------------------
# Batch generation

def _paired_assets(directory: Path) -> list[tuple[Path, Path]]:
    pairs = []
    for img in sorted(directory.glob("*.png")):
        if img.name.endswith(".mask.png"):
            continue
        mask = img.with_name(img.stem + ".mask.png")
        if mask.is_file():
            pairs.append((img, mask))
    return pairs


def load_patch(texture_path: str | Path, mask_path: str | Path) -> OcclusionPatch:
    texture = load_png(texture_path)
    alpha = load_mask_png(mask_path).threshold(0.5)  # byte >= 128 is opaque
    return OcclusionPatch(texture, alpha, Path(texture_path).stem)


def sample_placement(rng: np.random.Generator, face_w: int, face_h: int,
                     patch_w: int, probe) -> PlacementParams:
    """Draw scale U[0.3,1.2]·face_w/patch_w, rotation U[-30°,30°], and a
    translation keeping at least 25% of the alpha on-image (rejection
    sampled through `probe`, which maps a placement to its approximate
    on-image alpha fraction)."""
    placement = PlacementParams(1.0, 0.0, 0.0, 0.0)
    for _ in range(64):
        rel = rng.uniform(0.3, 1.2)
        scale = min(max(rel * face_w / patch_w, SCALE_MIN), SCALE_MAX)
        rotation = rng.uniform(-math.pi / 6.0, math.pi / 6.0)
        dx = rng.uniform(-face_w / 2.0, face_w / 2.0)
        dy = rng.uniform(-face_h / 2.0, face_h / 2.0)
        placement = PlacementParams(scale, rotation, dx, dy)
        if probe(placement) >= MIN_ON_IMAGE_ALPHA:
            return placement
    # center the last draw as a deterministic fallback for pathological assets
    return PlacementParams(placement.scale, placement.rotation, 0.0, 0.0)


def _generate_one(index: int, seed: int, face_paths, occ_paths, swatch_paths,
                  swatch_prob: float) -> tuple[dict, ImageF, MaskF, MaskF]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    face_path, face_mask_path = face_paths[int(rng.integers(len(face_paths)))]
    occ_path, occ_mask_path = occ_paths[int(rng.integers(len(occ_paths)))]
    face = load_png(face_path)
    m_f = load_mask_png(face_mask_path).threshold(0.5)
    patch = load_patch(occ_path, occ_mask_path)

    swatch_path = None
    if swatch_paths and rng.uniform() < swatch_prob:
        swatch_path = swatch_paths[int(rng.integers(len(swatch_paths)))]
        patch = substitute_texture(patch, load_png(swatch_path),
                                   seed=int(rng.integers(2**31)))

    alpha_area = float(patch.alpha.data.sum())

    def probe(placement: PlacementParams) -> float:
        visible = occlusion_mask_of(face, patch, placement).data.sum()
        expected = alpha_area * placement.scale ** 2
        return float(visible) / max(expected, 1.0)

    placement = sample_placement(rng, face.width, face.height,
                                 patch.alpha.width, probe)
    image, m_gt = composite(face, m_f, patch, placement)
    m_o = occlusion_mask_of(face, patch, placement)
    record = {
        "index": index,
        "face": face_path.name,
        "occlusion": occ_path.name,
        "swatch": swatch_path.name if swatch_path else None,
        "scale": placement.scale,
        "rotation": placement.rotation,
        "dx": placement.dx,
        "dy": placement.dy,
        "seed": seed,
    }
    return record, image, m_gt, m_o


def generate_pairs(faces_dir: str | Path, occlusions_dir: str | Path,
                   swatches_dir: str | Path | None, out_dir: str | Path,
                   count: int, seed: int = 0, swatch_prob: float = SWATCH_PROB_DEFAULT,
                   workers: int = 1) -> Path:
    """Emit `count` (I, M_gt, M_o) triples as PNG+DTN1 plus manifest.jsonl.

    Each sample derives its own stream from SeedSequence([seed, index]), so
    serial and parallel runs produce byte-identical outputs. Returns the
    manifest path."""
    faces_dir, occlusions_dir = Path(faces_dir), Path(occlusions_dir)
    out_dir = Path(out_dir)
    face_paths = _paired_assets(faces_dir)
    occ_paths = _paired_assets(occlusions_dir)
    if not face_paths:
        raise ContractError(f"no face assets (<name>.png + <name>.mask.png) in {faces_dir}")
    if not occ_paths:
        raise ContractError(f"no occlusion assets in {occlusions_dir}")
    swatch_paths = sorted(Path(swatches_dir).glob("*.png")) if swatches_dir else []
    out_dir.mkdir(parents=True, exist_ok=True)

    def build(index: int):
        return _generate_one(index, seed, face_paths, occ_paths, swatch_paths, swatch_prob)

    if workers > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(build, range(count)))
    else:
        results = [build(i) for i in range(count)]

    manifest_path = out_dir / "manifest.jsonl"
    with manifest_path.open("w") as fh:
        for record, image, m_gt, m_o in results:
            stem = out_dir / f"{record['index']:06d}"
            save_png(image, stem.with_suffix(".I.png"))
            write_tensor(image, stem.with_suffix(".I.dtn"))
            save_mask_png(m_gt, stem.with_suffix(".Mgt.png"))
            write_tensor(m_gt, stem.with_suffix(".Mgt.dtn"))
            save_mask_png(m_o, stem.with_suffix(".Mo.png"))
            write_tensor(m_o, stem.with_suffix(".Mo.dtn"))
            fh.write(json.dumps(record) + "\n")
    return manifest_path
