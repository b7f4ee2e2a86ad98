"""Ring toss code: rejection-sampling channel simulation with an index code
whose rate is governed by the functional information."""

from .codec import Bitstring, decode, encode, measure_rate
from .estimator import RingTossCode
from .exceptions import (DimensionMismatch, Exhausted, MalformedCodeword, NotAbsolutelyContinuous,
                         NotSingular, NotStochastic, QuadratureFailure, RingTossError, TooLarge,
                         UnboundedRatio, UnsupportedSymbol, ZeroProbabilityIndex)
from .probcore import (build_joint, detect_singular, kl_divergence, mutual_information,
                       preset_joint)
from .sampler import CommonRandomness, RingTossDist, rejection_index, singular_index
from .widthfn import (cross_entropy_oracle, csd, functional_information, width_given_y,
                      width_of_pair)

__version__ = "0.1.0"

__all__ = [
    "Bitstring", "CommonRandomness", "RingTossCode", "RingTossDist", "build_joint",
    "cross_entropy_oracle", "csd", "decode", "detect_singular", "encode",
    "functional_information", "kl_divergence", "measure_rate", "mutual_information",
    "preset_joint", "rejection_index", "singular_index", "width_given_y", "width_of_pair",
    "DimensionMismatch", "Exhausted", "MalformedCodeword", "NotAbsolutelyContinuous",
    "NotSingular", "NotStochastic", "QuadratureFailure", "RingTossError", "TooLarge",
    "UnboundedRatio", "UnsupportedSymbol", "ZeroProbabilityIndex",
]
