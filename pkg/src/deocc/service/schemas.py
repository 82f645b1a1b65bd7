"""Pydantic request/response models for the HTTP service.

Images, masks, and raw tensors travel as base64-encoded DTN1 blobs (the same
binary format the CLI writes), so the wire representation is lossless at
float32 and identical across clients.
"""

from __future__ import annotations

import base64
import struct

import numpy as np
from pydantic import BaseModel, Field

from ..imagecore import DTN1_MAGIC, ImageF, MaskF
from ..errors import FormatError

_HEADER = struct.Struct("<4s4x3Q")


def encode_tensor(a: np.ndarray) -> str:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, np.newaxis]
    h, w, c = a.shape
    blob = _HEADER.pack(DTN1_MAGIC, h, w, c) + a.astype("<f4").tobytes(order="C")
    return base64.b64encode(blob).decode("ascii")


def decode_tensor(payload: str) -> np.ndarray:
    blob = base64.b64decode(payload)
    if len(blob) < _HEADER.size:
        raise FormatError("truncated DTN1 payload")
    magic, h, w, c = _HEADER.unpack_from(blob)
    if magic != DTN1_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if len(blob) != _HEADER.size + 4 * h * w * c:
        raise FormatError("DTN1 payload size mismatch")
    return np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).astype(np.float64).reshape(h, w, c)


def decode_image(payload: str) -> ImageF:
    return ImageF(decode_tensor(payload))


def decode_mask(payload: str) -> MaskF:
    a = decode_tensor(payload)
    if a.shape[2] != 1:
        raise FormatError("mask payload must be single-channel")
    return MaskF(a[:, :, 0])


class MaskPairRequest(BaseModel):
    render_mask: str = Field(description="binary mask, base64 DTN1")
    face_mask: str = Field(description="binary mask, base64 DTN1")


class MaskResponse(BaseModel):
    mask: str


class BackgroundMaskRequest(BaseModel):
    render_mask: str
    erosion_radius: float = 3.0


class OverlapResponse(BaseModel):
    rate: float


class NoiseRequest(BaseModel):
    image: str
    region: str
    mean: float = 0.5
    stddev: float = 0.2
    seed: int = 0


class ImageResponse(BaseModel):
    image: str


class BlendRequest(BaseModel):
    image: str
    face_mask: str
    render: str
    render_mask: str
    tol: float = 1e-8
    max_iter: int | None = None


class ToyModelRequest(BaseModel):
    rings: int = 16
    seed: int = 0


class ToyModelResponse(BaseModel):
    model: str = Field(description="base64 DMM1 blob")
    vertex_count: int
    triangle_count: int


class RenderRequest(BaseModel):
    model: str = Field(description="base64 DMM1 blob")
    coeffs: list[float] = Field(description="239 reconstruction coefficients")
    width: int = 256
    height: int = 256
    focal: float = 1100.0
    z_near: float = 0.1


class RenderResponse(BaseModel):
    image: str
    mask: str
    depth: str
    landmarks: list[list[float]]


class LossRequest(BaseModel):
    name: str
    image: str | None = None
    target: str | None = None
    mask: str | None = None
    pred: str | None = None
    gt: str | None = None
    coeff_pred: list[float] | None = None
    coeff_gt: list[float] | None = None
    landmarks_pred: list[list[float]] | None = None
    landmarks_gt: list[list[float]] | None = None
    landmark_weights: list[float] | None = None
    probs: list[float] | None = None
    real: list[float] | None = None
    fake: list[float] | None = None
    fraction: float = 0.25
    embed_seed: int = 0
    want_gradient: bool = False


class LossResponse(BaseModel):
    value: float
    gradient: str | None = None


class InpaintRequest(BaseModel):
    image: str
    face_mask: str
    render: str
    render_mask: str
    iterations: int = 500
    step_size: float = 0.01
    seed: int = 0
    ohem_fraction: float = 0.25
    erosion_radius: float = 3.0
    embed_seed: int = 0
    lambda_pix: float = 10.0
    lambda_sm: float = 5.0
    lambda_bg: float = 5.0
    lambda_id: float = 0.2
    lambda_tv: float = 0.1
    lambda_adv: float = 0.01


class InpaintResponse(BaseModel):
    image: str
    occlusion_mask: str
    noised_input: str
    blend_target: str
    trace: list[float]


class CompositeRequest(BaseModel):
    face: str
    face_mask: str
    patch_texture: str
    patch_alpha: str
    scale: float = 1.0
    rotation: float = 0.0
    dx: float = 0.0
    dy: float = 0.0


class CompositeResponse(BaseModel):
    image: str
    face_mask: str = Field(description="face mask minus the occlusion")
    occlusion_mask: str


class MetricsRequest(BaseModel):
    image: str
    reference: str
    region: str
    embed_seed: int = 0


class MetricsResponse(BaseModel):
    l1: float
    ssim: float
    psnr: float
    id: float


class HealthResponse(BaseModel):
    status: str
    version: str
