"""Face de-occlusion pipeline core.

Mask algebra, occlusion synthesis, morphable-model rendering with spherical-
harmonics shading, Poisson blending, the full loss suite with analytic
gradients, and an optimization-based inpainter exercising the composite
objective. Exposed as a library, a CLI (`deocc`), and an HTTP service
(`deocc.service`).
"""

from .errors import (ContractError, ConvergenceError, DeoccError, FormatError,
                     NumericalError, PlacementError)
from .imagecore import ImageF, MaskF

__all__ = [
    "ContractError",
    "ConvergenceError",
    "DeoccError",
    "FormatError",
    "ImageF",
    "MaskF",
    "NumericalError",
    "PlacementError",
]

__version__ = "0.1.0"
