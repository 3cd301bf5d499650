"""Sparse identification of distributed-delay dynamics via the linear chain trick.

Erlang-kernel delays are rebuilt from data as the terminal state of a chain of
linear ODEs, added to a candidate library, and selected over a grid of mean
delays and chain orders by trajectory BIC or validation derivative error.
"""

__version__ = "0.1.0"

from .features import HillSpec, LagSpec, LibrarySpec, build_library, normalize_columns
from .lct import ErlangKernel, convolution_oracle, integrate_chain, kernel_eval
from .preprocess import SmootherConfig, build_interpolant, preprocess, savitzky_golay
from .regression import SparseModel, STRidgeConfig, stlsq, stridge
from .selection import (
    Candidate,
    CandidateGrid,
    IdentifyConfig,
    IdentifiedModel,
    bic,
    derivative_error_select,
    identify,
    identify_discrete_baseline,
    robustness_study,
    score_candidate,
    simulate_identified,
)
from .signals import NoiseSpec, SplitSpec, TimeSeries, add_noise, read_csv, split, write_csv
from .simulate import (
    Hes1Params,
    IkedaParams,
    LogisticParams,
    simulate_hes1,
    simulate_ikeda,
    simulate_logistic,
)

__all__ = [
    "Candidate",
    "CandidateGrid",
    "ErlangKernel",
    "Hes1Params",
    "HillSpec",
    "IdentifiedModel",
    "IdentifyConfig",
    "IkedaParams",
    "LagSpec",
    "LibrarySpec",
    "LogisticParams",
    "NoiseSpec",
    "STRidgeConfig",
    "SmootherConfig",
    "SparseModel",
    "SplitSpec",
    "TimeSeries",
    "add_noise",
    "bic",
    "build_interpolant",
    "build_library",
    "convolution_oracle",
    "derivative_error_select",
    "identify",
    "identify_discrete_baseline",
    "integrate_chain",
    "kernel_eval",
    "normalize_columns",
    "preprocess",
    "read_csv",
    "robustness_study",
    "savitzky_golay",
    "score_candidate",
    "simulate_hes1",
    "simulate_identified",
    "simulate_ikeda",
    "simulate_logistic",
    "split",
    "stlsq",
    "stridge",
    "write_csv",
]
