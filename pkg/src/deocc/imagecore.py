"""Dense image/mask containers, 8-bit PNG conversion, the DTN1 tensor format,
and the elementary morphology every other stage builds on.

Internals are float64 throughout; 32-bit precision appears only at the DTN1
file boundary.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import ContractError, FormatError

DTN1_MAGIC = b"DTN1"
_DTN1_HEADER = struct.Struct("<4s4x3Q")

NOISE_MEAN_DEFAULT = 0.5
NOISE_STDDEV_DEFAULT = 0.2


def _as_float(data: np.ndarray) -> np.ndarray:
    a = np.array(data, dtype=np.float64, order="C", copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ImageF:
    """H×W×C image of float64 in [0, 1]; C is 1 or 3. Immutable."""

    data: np.ndarray

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if a.ndim == 2:
            a = a[:, :, np.newaxis]
        if a.ndim != 3:
            raise ContractError(f"image must be H×W×C, got shape {a.shape}")
        if a.shape[2] not in (1, 3):
            raise ContractError(f"image must have 1 or 3 channels, got {a.shape[2]}")
        if not np.all(np.isfinite(a)):
            raise ContractError("image contains non-finite values")
        if a.size and (a.min() < 0.0 or a.max() > 1.0):
            raise ContractError("image values must lie in [0, 1]")
        a.flags.writeable = False
        object.__setattr__(self, "data", a)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def zeros(cls, height: int, width: int, channels: int = 3) -> "ImageF":
        return cls(np.zeros((height, width, channels)))

    @classmethod
    def full(cls, height: int, width: int, value, channels: int = 3) -> "ImageF":
        return cls(np.broadcast_to(np.asarray(value, np.float64), (height, width, channels)))


@dataclass(frozen=True)
class MaskF:
    """H×W float64 map in [0, 1]. `binary` is derived at construction and is
    true iff every element is exactly 0 or 1."""

    data: np.ndarray
    binary: bool = field(init=False)

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if a.ndim == 3 and a.shape[2] == 1:
            a = a[:, :, 0]
        if a.ndim != 2:
            raise ContractError(f"mask must be H×W, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ContractError("mask contains non-finite values")
        if a.size and (a.min() < 0.0 or a.max() > 1.0):
            raise ContractError("mask values must lie in [0, 1]")
        a.flags.writeable = False
        object.__setattr__(self, "data", a)
        object.__setattr__(self, "binary", bool(np.all((a == 0.0) | (a == 1.0))))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def threshold(self, level: float = 0.5) -> "MaskF":
        """Binarize: values >= level become 1, the rest 0."""
        return MaskF((self.data >= level).astype(np.float64))

    @classmethod
    def zeros(cls, height: int, width: int) -> "MaskF":
        return cls(np.zeros((height, width)))

    @classmethod
    def ones(cls, height: int, width: int) -> "MaskF":
        return cls(np.ones((height, width)))


def require_binary(mask: MaskF, name: str = "mask") -> None:
    if not mask.binary:
        raise ContractError(f"{name} must be binary (elements exactly 0 or 1)")


def require_same_shape(a, b, what: str = "inputs") -> None:
    if a.data.shape[:2] != b.data.shape[:2]:
        raise ContractError(f"{what} have mismatched dims: {a.data.shape[:2]} vs {b.data.shape[:2]}")


# ---------------------------------------------------------------------------
# PNG interchange (8-bit gray or RGB only)

def load_png(path: str | Path) -> ImageF:
    """Load an 8-bit gray or RGB PNG; each byte v maps to v/255 exactly."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        img = Image.open(path)
        img.load()
    except UnidentifiedImageError as exc:
        raise FormatError(f"{path}: not a readable image: {exc}") from exc
    if img.format != "PNG":
        raise FormatError(f"{path}: expected PNG, got {img.format}")
    if img.mode not in ("L", "RGB"):
        raise FormatError(f"{path}: unsupported PNG mode {img.mode!r} (need 8-bit L or RGB)")
    arr = np.asarray(img, dtype=np.float64) / 255.0
    return ImageF(arr)


def save_png(image: ImageF, path: str | Path) -> None:
    """Write as 8-bit PNG; each float v becomes round(clamp(v,0,1)*255), half up."""
    a = to_bytes_u8(image.data)
    mode = "L" if image.channels == 1 else "RGB"
    pil = Image.fromarray(a[:, :, 0] if mode == "L" else a, mode=mode)
    pil.save(Path(path), format="PNG")


def to_bytes_u8(data: np.ndarray) -> np.ndarray:
    """Float → uint8 with clamp-then-round-half-up semantics."""
    return np.floor(np.clip(data, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def load_mask_png(path: str | Path) -> MaskF:
    """Load a single-channel PNG as a mask (values byte/255)."""
    img = load_png(path)
    if img.channels != 1:
        raise FormatError(f"{path}: mask PNG must be single-channel gray")
    return MaskF(img.data[:, :, 0])


def save_mask_png(mask: MaskF, path: str | Path) -> None:
    save_png(ImageF(mask.data[:, :, np.newaxis]), path)


# ---------------------------------------------------------------------------
# DTN1 binary tensor format
#
# bytes 0-3   magic "DTN1"
# bytes 4-7   reserved, zero
# bytes 8-31  three unsigned 64-bit little-endian dims (H, W, C)
# then        H*W*C little-endian float32, row-major channel-interleaved
#
# Values are stored as 32-bit floats, so write→read is the identity exactly
# for float32-representable inputs.

def write_tensor(tensor: np.ndarray | ImageF | MaskF, path: str | Path) -> None:
    if isinstance(tensor, ImageF):
        a = tensor.data
    elif isinstance(tensor, MaskF):
        a = tensor.data[:, :, np.newaxis]
    else:
        a = np.asarray(tensor, dtype=np.float64)
        if a.ndim == 2:
            a = a[:, :, np.newaxis]
    if a.ndim != 3:
        raise ContractError(f"tensor must be H×W×C, got shape {a.shape}")
    h, w, c = a.shape
    header = _DTN1_HEADER.pack(DTN1_MAGIC, h, w, c)
    Path(path).write_bytes(header + a.astype("<f4").tobytes(order="C"))


def read_tensor(path: str | Path) -> np.ndarray:
    """Read a DTN1 file into an H×W×C float64 array."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    blob = path.read_bytes()
    if len(blob) < _DTN1_HEADER.size:
        raise FormatError(f"{path}: truncated DTN1 header")
    magic, h, w, c = _DTN1_HEADER.unpack_from(blob)
    if magic != DTN1_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    count = h * w * c
    if count > (1 << 40):
        raise FormatError(f"{path}: implausible dims {h}×{w}×{c}")
    expected = _DTN1_HEADER.size + 4 * count
    if len(blob) != expected:
        raise FormatError(f"{path}: payload is {len(blob) - _DTN1_HEADER.size} bytes, expected {4 * count}")
    flat = np.frombuffer(blob, dtype="<f4", offset=_DTN1_HEADER.size)
    return flat.astype(np.float64).reshape(h, w, c)


# ---------------------------------------------------------------------------
# Morphology and noise

def disk_element(radius: float) -> np.ndarray:
    """Boolean disk {(dy,dx): dy²+dx² <= radius²} used as structuring element."""
    r = int(math.floor(radius))
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return (yy * yy + xx * xx) <= radius * radius


def erode(mask: MaskF, radius: float) -> MaskF:
    """Binary erosion by a disk; pixels whose neighborhood leaves the image
    are eroded (border counts as 0)."""
    require_binary(mask)
    if radius < 0:
        raise ContractError("erosion radius must be >= 0")
    if radius == 0:
        return mask
    out = ndimage.binary_erosion(mask.data.astype(bool), structure=disk_element(radius), border_value=0)
    return MaskF(out.astype(np.float64))


def gaussian_noise_fill(
    image: ImageF,
    region: MaskF,
    mean: float = NOISE_MEAN_DEFAULT,
    stddev: float = NOISE_STDDEV_DEFAULT,
    seed: int = 0,
) -> ImageF:
    """Replace pixels where region=1 with N(mean, stddev²) samples clamped to
    [0,1]; the complement is returned bit-identical. Samples are drawn as
    normal(mean, stddev, (n_region_pixels, channels)) from PCG64(seed), in
    row-major region order."""
    require_binary(region, "region")
    require_same_shape(image, region, "image and region")
    if stddev < 0:
        raise ContractError("stddev must be >= 0")
    sel = region.data == 1.0
    out = np.array(image.data, copy=True)
    n = int(sel.sum())
    if n:
        rng = np.random.default_rng(seed)
        samples = rng.normal(mean, stddev, size=(n, image.channels))
        out[sel] = np.clip(samples, 0.0, 1.0)
    return ImageF(out)
