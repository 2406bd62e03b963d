"""Fine-grained classification of small localized cues.

A convolutional backbone feeds per-block pixel selectors; the most confident
points of every block are projected to a common width, fused by one graph
convolution over a complete graph and pooled into a single prediction.
Three variants (SGD, LION, LION with a narrower projection) vote.
"""

from .ensemble import MajorityVoteEnsemble, Variant, variant_estimator, vote
from .estimators import PluginClassifier
from .exceptions import ConfigurationError, ContractError, DimensionError, FormatError

__all__ = [
    "ConfigurationError",
    "ContractError",
    "DimensionError",
    "FormatError",
    "MajorityVoteEnsemble",
    "PluginClassifier",
    "Variant",
    "variant_estimator",
    "vote",
]

__version__ = "0.1.0"
