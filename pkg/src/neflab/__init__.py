"""neflab: natural exponential families, the simple cubic construction, and its characterizations."""

from .catalog import build, load_family, parse_descriptor, serialize_descriptor
from .core import CumulantFamily, FamilyDescriptor, VarianceModel, affine_image, jorgensen_power
from .cubic import CubicConstructionParams, forward_variance, inverse_variance, transform_family
from .verifier import ClassifyConfig, classify

__version__ = "0.1.0"

__all__ = [
    "ClassifyConfig",
    "CubicConstructionParams",
    "CumulantFamily",
    "FamilyDescriptor",
    "VarianceModel",
    "affine_image",
    "build",
    "classify",
    "forward_variance",
    "inverse_variance",
    "jorgensen_power",
    "load_family",
    "parse_descriptor",
    "serialize_descriptor",
    "transform_family",
]
