"""Poisson blending of visible face texture with the rendered face, via a
conjugate-gradient solve of the 5-point Laplacian over the occluded region.

The guidance field is the gradient of the rendered image; Dirichlet boundary
values come from the visible face where it exists and from the render
elsewhere. Solves run per channel in unconstrained reals; the output is
clamped to [0, 1] at the very end.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ContractError, ConvergenceError
from .imagecore import ImageF, MaskF, require_binary, require_same_shape

BLEND_TOL_DEFAULT = 1e-8


def cg_solve(apply_a: Callable[[np.ndarray], np.ndarray], b: np.ndarray,
             tol: float, max_iter: int) -> np.ndarray:
    """Plain conjugate gradients for SPD apply_a, from x0 = 0, stopping at
    ||Ax - b|| / ||b|| <= tol (verified on the true residual). Deterministic:
    fixed iteration order, no reordering."""
    if tol <= 0:
        raise ContractError("tol must be > 0")
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return x
    r = b.copy()
    p = r.copy()
    rr = float(r @ r)
    target = tol * b_norm
    for _ in range(max_iter):
        ap = apply_a(p)
        alpha = rr / float(p @ ap)
        x = x + alpha * p
        r = r - alpha * ap
        rr_new = float(r @ r)
        if rr_new**0.5 <= target:
            true_r = b - apply_a(x)
            if float(np.linalg.norm(true_r)) <= target:
                return x
            r = true_r  # recursion drifted; restart from the true residual
            rr_new = float(r @ r)
            p = r.copy()
            rr = rr_new
            continue
        beta = rr_new / rr
        p = r + beta * p
        rr = rr_new
    raise ConvergenceError(
        f"CG did not reach tol {tol} in {max_iter} iterations",
        residual=rr**0.5 / b_norm,
    )


def solve_poisson_interior(omega: np.ndarray, boundary: np.ndarray,
                           guidance: np.ndarray, tol: float,
                           max_iter: int) -> np.ndarray:
    """Solve the discrete Poisson equation for one channel.

    omega: 2-d bool, unknown pixels, all strictly inside the border.
    boundary: 2-d values used for 4-neighbors outside omega.
    guidance: 2-d field g whose Laplacian the solution matches.
    Returns the full field: boundary outside omega, the solution inside.
    """
    h, w = omega.shape
    if omega[0, :].any() or omega[-1, :].any() or omega[:, 0].any() or omega[:, -1].any():
        raise ContractError("unknown region must keep a 1-px margin from the border")
    idx = np.flatnonzero(omega.ravel())
    n = idx.size
    out = np.array(boundary, dtype=np.float64, copy=True)
    if n == 0:
        return out

    pos = np.full(h * w, -1, dtype=np.int64)
    pos[idx] = np.arange(n)
    offsets = (-w, w, -1, 1)
    nbr_pos = np.stack([pos[idx + off] for off in offsets])      # (4, n), -1 if outside omega
    nbr_flat = np.stack([idx + off for off in offsets])

    g = guidance.ravel()
    f_bnd = boundary.ravel()
    b = 4.0 * g[idx] - g[nbr_flat].sum(axis=0)
    for k in range(4):
        outside = nbr_pos[k] < 0
        b[outside] += f_bnd[nbr_flat[k][outside]]

    inside_mask = nbr_pos >= 0
    nbr_safe = np.where(inside_mask, nbr_pos, 0)

    def apply_a(x: np.ndarray) -> np.ndarray:
        acc = 4.0 * x
        for k in range(4):
            acc -= np.where(inside_mask[k], x[nbr_safe[k]], 0.0)
        return acc

    x = cg_solve(apply_a, b, tol, max_iter)
    out.ravel()[idx] = x
    return out


def poisson_blend(i_f: ImageF, m_f: MaskF, i_m: ImageF, m_m: MaskF,
                  tol: float = BLEND_TOL_DEFAULT, max_iter: int | None = None) -> ImageF:
    """Merge the visible face into the rendered face without visible seams.

    The unknown region is m_m AND NOT m_f (clipped to the 1-px interior);
    there the solution matches the render's gradients with boundary values
    taken from i_f where m_f=1 and from i_m elsewhere. Outside it the output
    is i_f where m_f=1, i_m on the render-only region, and i_f as the
    fallback elsewhere.
    """
    require_binary(m_f, "m_f")
    require_binary(m_m, "m_m")
    require_same_shape(i_f, i_m, "i_f and i_m")
    require_same_shape(i_f, m_f, "i_f and m_f")
    require_same_shape(i_f, m_m, "i_f and m_m")
    if i_f.channels != i_m.channels:
        raise ContractError("i_f and i_m must have the same channel count")

    face = m_f.data == 1.0
    rendered = m_m.data == 1.0
    hole = rendered & ~face
    omega = hole.copy()
    omega[0, :] = omega[-1, :] = False
    omega[:, 0] = omega[:, -1] = False

    out = np.array(i_f.data, copy=True)
    out[hole] = i_m.data[hole]
    if not omega.any():
        return ImageF(np.clip(out, 0.0, 1.0))

    if max_iter is None:
        max_iter = 10 * int(omega.sum())
    boundary2d = np.where(face[:, :, np.newaxis], i_f.data, i_m.data)
    for ch in range(i_f.channels):
        out[:, :, ch] = np.where(
            omega,
            solve_poisson_interior(omega, boundary2d[:, :, ch], i_m.data[:, :, ch], tol, max_iter),
            out[:, :, ch],
        )
    return ImageF(np.clip(out, 0.0, 1.0))
