"""Storm-surge infrastructure closures and spatial accessibility to care.

The package chains five stages: evaluate surge exposure at bridges and
roads, turn exposure into deterministic inundation closures and
probabilistic deck-uplift failures, sample failure outcomes, score
accessibility on each surviving network with a two-step floating
catchment, and aggregate scores over samples and population groups.
"""

__version__ = "0.1.0"

from .errors import (
    InvalidInputError,
    InvalidSpecError,
    SurgeAccessError,
    UndefinedGroupError,
    UnsupportedBridgeError,
    ValidationError,
)

__all__ = [
    "__version__",
    "SurgeAccessError",
    "InvalidInputError",
    "InvalidSpecError",
    "UndefinedGroupError",
    "UnsupportedBridgeError",
    "ValidationError",
]
