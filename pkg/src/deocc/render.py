"""Software z-buffer rasterizer with 9-coefficient spherical-harmonics
shading, producing the rendered face image and its coverage mask.

Conventions: pinhole projection u = focal*x/z + cx, v = focal*y/z + cy with v
growing downward; pixel (row, col) samples at (col+0.5, row+0.5); top-left
fill rule on edge functions; perspective-correct interpolation; nearest depth
wins, exact ties go to the lower triangle index. The nine SH coefficients are
shared across RGB (a single gray light), so shading is a scalar per pixel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .imagecore import ImageF, MaskF
from .morphable import CoeffVector, MorphableModel, PosedMesh, landmarks3d, synthesize

# real SH basis constants for bands 0-2
SH_C0 = 0.5 / math.sqrt(math.pi)                  # Y0
SH_C1 = math.sqrt(3.0) / (2.0 * math.sqrt(math.pi))   # Y1..Y3
SH_C2 = math.sqrt(15.0) / (2.0 * math.sqrt(math.pi))  # Y4, Y5, Y7
SH_C2_ZZ = math.sqrt(5.0) / (4.0 * math.sqrt(math.pi))  # Y6
SH_C2_XY = math.sqrt(15.0) / (4.0 * math.sqrt(math.pi))  # Y8

FOCAL_DEFAULT = 1100.0


@dataclass(frozen=True)
class Camera:
    focal: float
    cx: float
    cy: float
    width: int
    height: int
    z_near: float = 0.1

    def __post_init__(self):
        if self.focal <= 0:
            raise ContractError("focal must be > 0")
        if self.z_near <= 0:
            raise ContractError("z_near must be > 0")
        if self.width < 1 or self.height < 1:
            raise ContractError("image size must be positive")

    @classmethod
    def centered(cls, width: int, height: int, focal: float = FOCAL_DEFAULT,
                 z_near: float = 0.1) -> "Camera":
        return cls(focal, width / 2.0, height / 2.0, width, height, z_near)


@dataclass(frozen=True)
class SHCoeffs:
    data: np.ndarray  # (9,)

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64, copy=True).reshape(-1)
        if a.shape[0] != 9:
            raise ContractError(f"SH needs 9 coefficients, got {a.shape[0]}")
        if not np.all(np.isfinite(a)):
            raise ContractError("SH coefficients must be finite")
        a.flags.writeable = False
        object.__setattr__(self, "data", a)

    @classmethod
    def ambient(cls) -> "SHCoeffs":
        """Band-0-only light whose shading is identically 1."""
        c = np.zeros(9)
        c[0] = 1.0 / SH_C0
        return cls(c)


def sh_basis(normal: np.ndarray) -> np.ndarray:
    """Evaluate the 9 real SH basis functions at a unit normal."""
    n = np.asarray(normal, dtype=np.float64)
    if n.shape != (3,):
        raise ContractError("normal must be a 3-vector")
    if abs(np.linalg.norm(n) - 1.0) > 1e-6:
        raise ContractError("normal must be unit length within 1e-6")
    return _sh_basis_rows(n[np.newaxis, :])[0]


def _sh_basis_rows(n: np.ndarray) -> np.ndarray:
    """Vectorized SH basis for (N, 3) unit normals -> (N, 9)."""
    x, y, z = n[:, 0], n[:, 1], n[:, 2]
    out = np.empty((n.shape[0], 9))
    out[:, 0] = SH_C0
    out[:, 1] = SH_C1 * y
    out[:, 2] = SH_C1 * z
    out[:, 3] = SH_C1 * x
    out[:, 4] = SH_C2 * x * y
    out[:, 5] = SH_C2 * y * z
    out[:, 6] = SH_C2_ZZ * (3.0 * z * z - 1.0)
    out[:, 7] = SH_C2 * x * z
    out[:, 8] = SH_C2_XY * (x * x - y * y)
    return out


def _is_top_left(ax, ay, bx, by) -> bool:
    """Top-left classification of edge a->b in y-down screen coords, for
    triangles wound with positive orient2d."""
    dy = by - ay
    if dy == 0.0:
        return bx - ax > 0.0  # top edge (inside below)
    return dy < 0.0  # left edge (goes up)


def render(mesh: PosedMesh, camera: Camera, sh: SHCoeffs) -> tuple[ImageF, MaskF, np.ndarray]:
    """Rasterize a posed mesh.

    Returns (image, coverage mask, depth). Depth is +inf exactly where the
    mask is 0. Triangles with any vertex at z <= z_near are skipped.
    """
    w, h = camera.width, camera.height
    img = np.zeros((h, w, 3))
    zbuf = np.full((h, w), np.inf)
    widx = np.full((h, w), -1, dtype=np.int64)  # winning triangle per pixel

    pos = mesh.positions
    zs = pos[:, 2]
    su = camera.focal * pos[:, 0] / zs + camera.cx
    sv = camera.focal * pos[:, 1] / zs + camera.cy

    # pixel sample coordinates
    col_u = np.arange(w) + 0.5
    row_v = np.arange(h) + 0.5

    for t, tri in enumerate(mesh.triangles):
        i0, i1, i2 = int(tri[0]), int(tri[1]), int(tri[2])
        if zs[i0] <= camera.z_near or zs[i1] <= camera.z_near or zs[i2] <= camera.z_near:
            continue
        order = (i0, i1, i2)
        x0, y0 = su[i0], sv[i0]
        x1, y1 = su[i1], sv[i1]
        x2, y2 = su[i2], sv[i2]
        area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area2 == 0.0:
            continue
        if area2 < 0.0:  # rewind to positive orientation
            order = (i0, i2, i1)
            x1, y1, x2, y2 = x2, y2, x1, y1
            area2 = -area2

        lo_c = max(int(math.floor(min(x0, x1, x2) - 0.5)), 0)
        hi_c = min(int(math.ceil(max(x0, x1, x2) - 0.5)), w - 1)
        lo_r = max(int(math.floor(min(y0, y1, y2) - 0.5)), 0)
        hi_r = min(int(math.ceil(max(y0, y1, y2) - 0.5)), h - 1)
        if lo_c > hi_c or lo_r > hi_r:
            continue

        px = col_u[lo_c:hi_c + 1][np.newaxis, :]
        py = row_v[lo_r:hi_r + 1][:, np.newaxis]
        # edge k is opposite vertex k
        w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
        w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
        inside = (
            ((w0 > 0.0) | ((w0 == 0.0) & _is_top_left(x1, y1, x2, y2)))
            & ((w1 > 0.0) | ((w1 == 0.0) & _is_top_left(x2, y2, x0, y0)))
            & ((w2 > 0.0) | ((w2 == 0.0) & _is_top_left(x0, y0, x1, y1)))
        )
        if not inside.any():
            continue

        l0, l1, l2 = w0 / area2, w1 / area2, w2 / area2
        z0, z1, z2 = zs[order[0]], zs[order[1]], zs[order[2]]
        inv_z = l0 / z0 + l1 / z1 + l2 / z2
        depth = 1.0 / inv_z

        zb = zbuf[lo_r:hi_r + 1, lo_c:hi_c + 1]
        write = inside & (depth < zb)  # exact ties keep the earlier (lower) index
        if not write.any():
            continue

        b0, b1, b2 = l0[write] / z0, l1[write] / z1, l2[write] / z2
        dpx = depth[write]
        b0, b1, b2 = b0 * dpx, b1 * dpx, b2 * dpx

        alb = (b0[:, np.newaxis] * mesh.albedo[order[0]]
               + b1[:, np.newaxis] * mesh.albedo[order[1]]
               + b2[:, np.newaxis] * mesh.albedo[order[2]])
        nrm = (b0[:, np.newaxis] * mesh.normals[order[0]]
               + b1[:, np.newaxis] * mesh.normals[order[1]]
               + b2[:, np.newaxis] * mesh.normals[order[2]])
        nlen = np.linalg.norm(nrm, axis=1)
        bad = nlen < 1e-300
        nlen[bad] = 1.0
        nrm = nrm / nlen[:, np.newaxis]
        nrm[bad] = (0.0, 0.0, 1.0)

        shade = _sh_basis_rows(nrm) @ sh.data
        color = np.clip(alb * shade[:, np.newaxis], 0.0, 1.0)

        rows, cols = np.nonzero(write)
        img[lo_r + rows, lo_c + cols] = color
        zbuf[lo_r + rows, lo_c + cols] = dpx
        widx[lo_r + rows, lo_c + cols] = t

    mask = MaskF((widx >= 0).astype(np.float64))
    return ImageF(img), mask, zbuf


def render_from_coeffs(model: MorphableModel, c: CoeffVector, camera: Camera
                       ) -> tuple[ImageF, MaskF, np.ndarray, np.ndarray]:
    """synthesize + render + landmark extraction in one call.

    Returns (image, mask, depth, landmarks (n_pt, 3))."""
    mesh = synthesize(model, c)
    img, mask, depth = render(mesh, camera, SHCoeffs(c.illumination))
    marks, _ = landmarks3d(mesh, model)
    return img, mask, depth, marks
