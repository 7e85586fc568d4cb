"""Interactive differentially private query answering.

Mechanisms and adversaries paired under offline, online, and adaptive
query models, plus a statistical verification harness.
"""

from .core import (
    BitString,
    ConfigError,
    Dataset,
    DatasetFormatError,
    ParameterError,
    PrivacyParams,
    PrivacyWarning,
    ProtocolError,
    RandomSource,
    UniverseTag,
    adjacent,
    laplace_sample,
    load_dataset,
    neighbor_of,
    save_dataset,
)
from .protocol import (
    Adversary,
    CommittedAdversary,
    FixedQueryAdversary,
    InteractionModel,
    Mechanism,
    Symbol,
    Transcript,
    max_loss,
    run_adaptive,
    run_offline,
    run_online,
)
from .queries import (
    CorrelatedVectorQuery,
    PrefixQuery,
    StatisticalQuery,
    ThresholdQuery,
    correlated_loss,
    eval_prefix,
    eval_statistical,
    is_prefix,
    restrict_universe,
)

__version__ = "0.1.0"

__all__ = [
    "Adversary",
    "BitString",
    "CommittedAdversary",
    "ConfigError",
    "CorrelatedVectorQuery",
    "Dataset",
    "DatasetFormatError",
    "FixedQueryAdversary",
    "InteractionModel",
    "Mechanism",
    "ParameterError",
    "PrefixQuery",
    "PrivacyParams",
    "PrivacyWarning",
    "ProtocolError",
    "RandomSource",
    "StatisticalQuery",
    "Symbol",
    "ThresholdQuery",
    "Transcript",
    "UniverseTag",
    "adjacent",
    "correlated_loss",
    "eval_prefix",
    "eval_statistical",
    "is_prefix",
    "laplace_sample",
    "load_dataset",
    "max_loss",
    "neighbor_of",
    "restrict_universe",
    "run_adaptive",
    "run_offline",
    "run_online",
    "save_dataset",
]
