"""Adaptive sticky Metropolis samplers with piecewise self-tuning proposals."""

from .adaptation import UpdateRule, mtm_update_probabilities
from .proposal import PiecewiseProposal, build_proposal
from .rng import RandomStream, derive_run_seed
from .samplers import ChainTrace, KernelSpec, run_chain
from .support import SupportSet, new_support_set
from .targets import TargetModel, get_target

__all__ = [
    "ChainTrace",
    "KernelSpec",
    "PiecewiseProposal",
    "RandomStream",
    "SupportSet",
    "TargetModel",
    "UpdateRule",
    "build_proposal",
    "derive_run_seed",
    "get_target",
    "mtm_update_probabilities",
    "new_support_set",
    "run_chain",
]

__version__ = "0.1.0"
