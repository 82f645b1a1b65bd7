"""Linear morphable face model: a 239-dim coefficient vector drives a posed,
colored triangle mesh with 3D landmarks.

Coefficient layout (frozen, also used by the DMM1 file format):
indices 0:3 rotation (Euler angles, radians), 3:6 translation, 6:150 shape
weights, 150:230 texture weights, 230:239 spherical-harmonics illumination.
Rotation composes as R = Rz @ Ry @ Rx applied to column vectors.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, FormatError

N_ROT = 3
N_TRANS = 3
N_SHAPE = 144
N_TEX = 80
N_ILLUM = 9
COEFF_DIM = N_ROT + N_TRANS + N_SHAPE + N_TEX + N_ILLUM  # 239

DMM1_MAGIC = b"DMM1"
_DMM1_HEADER = struct.Struct("<4s5Q")


def _frozen(a: np.ndarray, dtype=np.float64) -> np.ndarray:
    a = np.array(a, dtype=dtype, order="C", copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CoeffVector:
    """The 239 reconstruction parameters, stored as one flat float64 vector."""

    data: np.ndarray

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64, copy=True).reshape(-1)
        if a.shape[0] != COEFF_DIM:
            raise ContractError(f"coefficient vector must have length {COEFF_DIM}, got {a.shape[0]}")
        if not np.all(np.isfinite(a)):
            raise ContractError("coefficient vector contains non-finite values")
        a.flags.writeable = False
        object.__setattr__(self, "data", a)

    @property
    def rotation(self) -> np.ndarray:
        return self.data[0:3]

    @property
    def translation(self) -> np.ndarray:
        return self.data[3:6]

    @property
    def shape(self) -> np.ndarray:
        return self.data[6:6 + N_SHAPE]

    @property
    def texture(self) -> np.ndarray:
        return self.data[6 + N_SHAPE:6 + N_SHAPE + N_TEX]

    @property
    def illumination(self) -> np.ndarray:
        return self.data[6 + N_SHAPE + N_TEX:]

    @classmethod
    def zeros(cls) -> "CoeffVector":
        return cls(np.zeros(COEFF_DIM))

    @classmethod
    def build(cls, rotation=(0, 0, 0), translation=(0, 0, 0), shape=None,
              texture=None, illumination=None) -> "CoeffVector":
        c = np.zeros(COEFF_DIM)
        c[0:3] = rotation
        c[3:6] = translation
        if shape is not None:
            c[6:6 + N_SHAPE] = shape
        if texture is not None:
            c[6 + N_SHAPE:6 + N_SHAPE + N_TEX] = texture
        if illumination is not None:
            c[6 + N_SHAPE + N_TEX:] = illumination
        return cls(c)


@dataclass(frozen=True)
class MorphableModel:
    """Mean shape/albedo, linear bases, triangles, and weighted landmarks."""

    mean_shape: np.ndarray      # (V, 3)
    shape_basis: np.ndarray     # (3V, 144)
    mean_albedo: np.ndarray     # (V, 3) in [0, 1]
    albedo_basis: np.ndarray    # (3V, 80)
    triangles: np.ndarray       # (T, 3) vertex indices
    landmark_indices: np.ndarray  # (n_pt,)
    landmark_weights: np.ndarray  # (n_pt,)

    def __post_init__(self):
        ms = _frozen(self.mean_shape)
        if ms.ndim != 2 or ms.shape[1] != 3:
            raise ContractError("mean_shape must be (V, 3)")
        v = ms.shape[0]
        sb = _frozen(self.shape_basis)
        if sb.shape != (3 * v, N_SHAPE):
            raise ContractError(f"shape_basis must be (3V, {N_SHAPE})")
        ma = _frozen(self.mean_albedo)
        if ma.shape != (v, 3):
            raise ContractError("mean_albedo must be (V, 3)")
        if ma.size and (ma.min() < 0.0 or ma.max() > 1.0):
            raise ContractError("mean_albedo must lie in [0, 1]")
        ab = _frozen(self.albedo_basis)
        if ab.shape != (3 * v, N_TEX):
            raise ContractError(f"albedo_basis must be (3V, {N_TEX})")
        tr = _frozen(self.triangles, np.int64)
        if tr.ndim != 2 or tr.shape[1] != 3:
            raise ContractError("triangles must be (T, 3)")
        if tr.size and (tr.min() < 0 or tr.max() >= v):
            raise ContractError("triangle indices out of range")
        li = _frozen(self.landmark_indices, np.int64)
        if li.ndim != 1 or li.size == 0:
            raise ContractError("landmark_indices must be a nonempty vector")
        if li.min() < 0 or li.max() >= v:
            raise ContractError("landmark indices out of range")
        lw = _frozen(self.landmark_weights)
        if lw.shape != li.shape or lw.size and lw.min() <= 0:
            raise ContractError("landmark_weights must be positive, one per landmark")
        for name, val in (("mean_shape", ms), ("shape_basis", sb), ("mean_albedo", ma),
                          ("albedo_basis", ab), ("triangles", tr),
                          ("landmark_indices", li), ("landmark_weights", lw)):
            object.__setattr__(self, name, val)

    @property
    def vertex_count(self) -> int:
        return self.mean_shape.shape[0]

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]

    @property
    def landmark_count(self) -> int:
        return self.landmark_indices.shape[0]


@dataclass(frozen=True)
class PosedMesh:
    """Camera-space positions, albedo, and unit normals, ready to rasterize."""

    positions: np.ndarray  # (V, 3)
    albedo: np.ndarray     # (V, 3)
    normals: np.ndarray    # (V, 3), unit length (fallback (0,0,1))
    triangles: np.ndarray  # (T, 3)

    def __post_init__(self):
        for name in ("positions", "albedo", "normals"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "triangles", _frozen(self.triangles, np.int64))


def rotation_matrix(angles: np.ndarray) -> np.ndarray:
    """R = Rz @ Ry @ Rx for Euler angles (rx, ry, rz) in radians."""
    rx, ry, rz = float(angles[0]), float(angles[1]), float(angles[2])
    cx, sx = math.cos(rx), math.sin(rx)
    cy, sy = math.cos(ry), math.sin(ry)
    cz, sz = math.cos(rz), math.sin(rz)
    r_x = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    r_y = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    r_z = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return r_z @ r_y @ r_x


def vertex_normals(positions: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Area-weighted average of incident triangle normals, normalized.
    Vertices with no incident area get (0, 0, 1)."""
    normals = np.zeros_like(positions)
    p0 = positions[triangles[:, 0]]
    p1 = positions[triangles[:, 1]]
    p2 = positions[triangles[:, 2]]
    face_n = np.cross(p1 - p0, p2 - p0)  # magnitude = 2*area
    for k in range(3):
        np.add.at(normals, triangles[:, k], face_n)
    norms = np.linalg.norm(normals, axis=1)
    degenerate = norms < 1e-300
    norms[degenerate] = 1.0
    normals = normals / norms[:, np.newaxis]
    normals[degenerate] = (0.0, 0.0, 1.0)
    return normals


def synthesize(model: MorphableModel, c: CoeffVector) -> PosedMesh:
    """positions = R(rotation)·(mean + shape_basis·shape) + translation;
    albedo = clamp(mean + albedo_basis·texture, 0, 1); normals recomputed
    after posing."""
    v = model.vertex_count
    shaped = model.mean_shape + (model.shape_basis @ c.shape).reshape(v, 3)
    r = rotation_matrix(c.rotation)
    positions = shaped @ r.T + c.translation
    albedo = np.clip(model.mean_albedo + (model.albedo_basis @ c.texture).reshape(v, 3), 0.0, 1.0)
    normals = vertex_normals(positions, model.triangles)
    return PosedMesh(positions, albedo, normals, model.triangles)


def landmarks3d(mesh: PosedMesh, model: MorphableModel) -> tuple[np.ndarray, np.ndarray]:
    """Camera-space landmark positions (n_pt, 3) with their weights."""
    if mesh.positions.shape[0] != model.vertex_count:
        raise ContractError("mesh and model vertex counts differ")
    return mesh.positions[model.landmark_indices], np.array(model.landmark_weights)


# ---------------------------------------------------------------------------
# Deterministic toy model (test/demo fixture; no licensed scan data involved)

def _orthogonalize(mat: np.ndarray) -> np.ndarray:
    """Two-pass modified Gram-Schmidt; platform-stable unlike LAPACK QR."""
    q = np.array(mat, dtype=np.float64)
    for _ in range(2):
        for j in range(q.shape[1]):
            col = q[:, j]
            if j:
                col = col - q[:, :j] @ (q[:, :j].T @ col)
            q[:, j] = col / np.linalg.norm(col)
    return q


def toy_model(vertex_ring_count: int = 16, seed: int = 0) -> MorphableModel:
    """UV-sphere-derived ellipsoid "face" with seeded orthogonal bases.

    Centered at the origin; by convention demos translate it to z≈10 in front
    of the default camera. Unit basis weights displace vertices by at most 5%
    of the bounding-box diagonal. 68 landmarks sit on the front (-z)
    hemisphere; the 10 front-most carry weight 20, the rest weight 1.
    """
    if vertex_ring_count < 4:
        raise ContractError("vertex_ring_count must be >= 4")
    rings = int(vertex_ring_count)
    segments = 2 * rings
    ax, ay, az = 0.75, 1.0, 0.85  # wide × tall × deep ellipsoid radii

    verts = [(0.0, ay, 0.0)]  # top pole
    for i in range(1, rings + 1):
        theta = math.pi * i / (rings + 1)
        for j in range(segments):
            phi = 2.0 * math.pi * j / segments
            verts.append((ax * math.sin(theta) * math.cos(phi),
                          ay * math.cos(theta),
                          az * math.sin(theta) * math.sin(phi)))
    verts.append((0.0, -ay, 0.0))  # bottom pole
    mean_shape = np.array(verts)
    v = mean_shape.shape[0]

    tris = []
    def ring_idx(i, j):  # ring i in [0, rings), wrapped segment j
        return 1 + i * segments + (j % segments)
    for j in range(segments):  # top fan
        tris.append((0, ring_idx(0, j + 1), ring_idx(0, j)))
    for i in range(rings - 1):  # quad strips
        for j in range(segments):
            a, b = ring_idx(i, j), ring_idx(i, j + 1)
            c, d = ring_idx(i + 1, j), ring_idx(i + 1, j + 1)
            tris.append((a, b, d))
            tris.append((a, d, c))
    bottom = v - 1
    for j in range(segments):  # bottom fan
        tris.append((bottom, ring_idx(rings - 1, j), ring_idx(rings - 1, j + 1)))
    triangles = np.array(tris, dtype=np.int64)

    rng = np.random.default_rng(seed)
    diag = float(np.linalg.norm(mean_shape.max(axis=0) - mean_shape.min(axis=0)))

    def scaled_basis(n_cols: int) -> np.ndarray:
        q = _orthogonalize(rng.standard_normal((3 * v, n_cols)))
        per_vertex = np.linalg.norm(q.reshape(v, 3, n_cols), axis=1)
        return q * (0.05 * diag / per_vertex.max())

    shape_basis = scaled_basis(N_SHAPE)
    albedo_basis = scaled_basis(N_TEX)

    # smooth skin-like mean albedo, strictly inside [0, 1]
    lat = mean_shape[:, 1] / ay
    mean_albedo = np.stack([
        0.72 + 0.06 * lat,
        0.55 + 0.05 * lat,
        0.45 + 0.04 * lat,
    ], axis=1)

    front = np.flatnonzero(mean_shape[:, 2] < -0.25 * az)
    # small models repeat indices rather than come up short of 68 landmarks
    pick = np.round(np.linspace(0, front.size - 1, 68)).astype(np.int64)
    landmark_indices = front[pick]
    weights = np.ones(68)
    frontmost = np.argsort(mean_shape[landmark_indices, 2], kind="stable")[:10]
    weights[frontmost] = 20.0

    return MorphableModel(mean_shape, shape_basis, mean_albedo, albedo_basis,
                          triangles, landmark_indices, weights)


# ---------------------------------------------------------------------------
# DMM1 model file
#
# magic "DMM1"; u64 V, T, n_shape, n_tex, n_pt; then little-endian arrays:
# mean_shape f32 (3V), shape_basis f32 column-major (3V×n_shape), mean_albedo
# f32 (3V), albedo_basis f32 column-major (3V×n_tex), triangles u32 (3T),
# landmark indices u32 (n_pt), landmark weights f32 (n_pt).

def model_to_bytes(model: MorphableModel) -> bytes:
    v, t, n_pt = model.vertex_count, model.triangle_count, model.landmark_count
    parts = [
        _DMM1_HEADER.pack(DMM1_MAGIC, v, t, N_SHAPE, N_TEX, n_pt),
        model.mean_shape.astype("<f4").tobytes(),
        model.shape_basis.astype("<f4").tobytes(order="F"),
        model.mean_albedo.astype("<f4").tobytes(),
        model.albedo_basis.astype("<f4").tobytes(order="F"),
        model.triangles.astype("<u4").tobytes(),
        model.landmark_indices.astype("<u4").tobytes(),
        model.landmark_weights.astype("<f4").tobytes(),
    ]
    return b"".join(parts)


def write_model(model: MorphableModel, path: str | Path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def model_from_bytes(blob: bytes, origin: str = "<bytes>") -> MorphableModel:
    if len(blob) < _DMM1_HEADER.size:
        raise FormatError(f"{origin}: truncated DMM1 header")
    magic, v, t, n_shape, n_tex, n_pt = _DMM1_HEADER.unpack_from(blob)
    if magic != DMM1_MAGIC:
        raise FormatError(f"{origin}: bad magic {magic!r}")
    if n_shape != N_SHAPE or n_tex != N_TEX:
        raise FormatError(f"{origin}: basis sizes {n_shape}/{n_tex} unsupported (need {N_SHAPE}/{N_TEX})")
    if max(v, t, n_pt) > (1 << 32):
        raise FormatError(f"{origin}: implausible header counts")
    counts = [(3 * v, "<f4"), (3 * v * n_shape, "<f4"), (3 * v, "<f4"),
              (3 * v * n_tex, "<f4"), (3 * t, "<u4"), (n_pt, "<u4"), (n_pt, "<f4")]
    expected = _DMM1_HEADER.size + sum(4 * n for n, _ in counts)
    if len(blob) != expected:
        raise FormatError(f"{origin}: size {len(blob)} != expected {expected}")
    offset = _DMM1_HEADER.size
    arrays = []
    for n, dt in counts:
        arrays.append(np.frombuffer(blob, dtype=dt, count=n, offset=offset))
        offset += 4 * n
    mean_shape = arrays[0].astype(np.float64).reshape(v, 3)
    shape_basis = arrays[1].astype(np.float64).reshape(3 * v, n_shape, order="F")
    mean_albedo = np.clip(arrays[2].astype(np.float64).reshape(v, 3), 0.0, 1.0)
    albedo_basis = arrays[3].astype(np.float64).reshape(3 * v, n_tex, order="F")
    triangles = arrays[4].astype(np.int64).reshape(t, 3)
    landmark_indices = arrays[5].astype(np.int64)
    landmark_weights = arrays[6].astype(np.float64)
    return MorphableModel(mean_shape, shape_basis, mean_albedo, albedo_basis,
                          triangles, landmark_indices, landmark_weights)


def read_model(path: str | Path) -> MorphableModel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return model_from_bytes(path.read_bytes(), origin=str(path))
