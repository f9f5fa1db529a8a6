"""Front propagation lab for stratified media.

Two models of the same invasion front: a diffuse-interface reaction-
diffusion equation on a cylinder and a sharp-interface forced
mean-curvature graph flow on its cross-section.  Both select a critical
wave speed variationally (exponentially weighted energies), both measure
it dynamically, and the harness cross-validates the two descriptions as
the interface width shrinks.
"""

__version__ = "0.1.0"

from .errors import (BlowUpError, BracketError, ConfigError, ModelError,
                     NonConvergenceError, NumericalError, StratFrontError,
                     WindowTooSmallError)
from .model import (CrossSection, CylinderGrid, DoubleWell, Field, Forcing,
                    Profile, SpeedResult, check_well_constants,
                    constant_profile, cosine_forcing, cubic_bistable_well,
                    product_forcing, quartic_double_well, tabulated_forcing,
                    zero_forcing)

__all__ = [
    "BlowUpError", "BracketError", "ConfigError", "CrossSection",
    "CylinderGrid", "DoubleWell", "Field", "Forcing", "ModelError",
    "NonConvergenceError", "NumericalError", "Profile", "SpeedResult",
    "StratFrontError", "WindowTooSmallError", "check_well_constants",
    "constant_profile", "cosine_forcing", "cubic_bistable_well",
    "product_forcing", "quartic_double_well", "tabulated_forcing",
    "zero_forcing", "__version__",
]
