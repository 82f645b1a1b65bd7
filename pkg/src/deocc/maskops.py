"""Mask algebra turning a rendered-face mask and a visible-face mask into the
occlusion mask, plus the derived masks the losses consume.

All inputs must already be binary; thresholding soft masks (at 0.5) is the
caller's explicit step.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .imagecore import MaskF, erode, require_binary, require_same_shape

EDGE_EROSION_RADIUS_DEFAULT = 3


def occlusion_mask(m_m: MaskF, m_f: MaskF) -> MaskF:
    """Pixels of the rendered face not covered by the visible face:
    m_m - m_m*m_f, i.e. m_m AND NOT m_f."""
    require_binary(m_m, "m_m")
    require_binary(m_f, "m_f")
    require_same_shape(m_m, m_f, "m_m and m_f")
    return MaskF(m_m.data - m_m.data * m_f.data)


def supervision_mask(m_m: MaskF, m_f: MaskF) -> MaskF:
    """Overlap m_m*m_f, restricting pixel losses to the visible face region."""
    require_binary(m_m, "m_m")
    require_binary(m_f, "m_f")
    require_same_shape(m_m, m_f, "m_m and m_f")
    return MaskF(m_m.data * m_f.data)


def background_mask(m_m: MaskF, erosion_radius: float = EDGE_EROSION_RADIUS_DEFAULT) -> MaskF:
    """Complement of the rendered face, eroded to drop rasterization edges."""
    require_binary(m_m, "m_m")
    return erode(MaskF(1.0 - m_m.data), erosion_radius)


def overlap_rate(m_m: MaskF, m_f: MaskF) -> float:
    """Fraction of the rendered face covered by the visible face:
    sum(m_m*m_f)/sum(m_m). Thresholding is left to the caller."""
    require_binary(m_m, "m_m")
    require_binary(m_f, "m_f")
    require_same_shape(m_m, m_f, "m_m and m_f")
    total = float(np.sum(m_m.data))
    if total == 0.0:
        raise ContractError("overlap_rate undefined for an empty render mask")
    return float(np.sum(m_m.data * m_f.data)) / total
