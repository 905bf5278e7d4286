"""Citation-impact prediction: will a paper reach its primary author's h-index?"""

from .corpus import Corpus, IngestReport, Paper, load_arnetminer, parse_corpus
from .errors import ConfigurationError, ContractError, DataError, ImpactLabError, UnknownIdError
from .features import FACTORS, GROUPS, parse_mask
from .pipeline import Experiment, ExperimentConfig, run_experiment

__version__ = "0.1.0"

__all__ = [
    "Corpus", "IngestReport", "Paper", "load_arnetminer", "parse_corpus",
    "ConfigurationError", "ContractError", "DataError", "ImpactLabError", "UnknownIdError",
    "FACTORS", "GROUPS", "parse_mask", "Experiment", "ExperimentConfig", "run_experiment",
]
