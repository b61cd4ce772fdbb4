"""Two-scale effective dimension (2sED) of stochastic feed-forward models.

Monte Carlo estimation of block-diagonal Fisher information, the 2sED and
its layerwise lower bound, plus brute-force checks of the supporting theory.
"""

__version__ = "0.1.0"

from .effdim import EffDimCurve, SpectrumEnsemble, lower_two_sed, rank_estimate, sweep, two_sed
from .fisher import BlockFisher, FisherEnsemble, block_fim, estimate_spectra, normalize_ensemble
from .netmodel import ModelSpec, ParamVector, parse_model_string, param_count, sample_params

__all__ = [
    "BlockFisher",
    "EffDimCurve",
    "FisherEnsemble",
    "ModelSpec",
    "ParamVector",
    "SpectrumEnsemble",
    "block_fim",
    "estimate_spectra",
    "lower_two_sed",
    "normalize_ensemble",
    "param_count",
    "parse_model_string",
    "rank_estimate",
    "sample_params",
    "sweep",
    "two_sed",
]
