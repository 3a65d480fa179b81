"""Composable Metropolis-within-Gibbs MCMC kernels."""

__version__ = "0.1.0"

from mwgkernels.compose import SamplingAlgorithm, log_transform, multi_scan, mwg_step, then
from mwgkernels.driver import McmcRun, acceptance_rate, mcmc, summarize, summarize_chains
from mwgkernels.kernels import adaptive_rwmh, metropolis, rwmh
from mwgkernels.prng import RngKey, fold_in, key_from_seed, split
from mwgkernels.state import ChainAndKernelState, ChainState, Position
from mwgkernels.target import TargetLogDensity, condition, make_target

__all__ = [
    "ChainAndKernelState",
    "ChainState",
    "McmcRun",
    "Position",
    "RngKey",
    "SamplingAlgorithm",
    "TargetLogDensity",
    "acceptance_rate",
    "adaptive_rwmh",
    "condition",
    "fold_in",
    "key_from_seed",
    "log_transform",
    "make_target",
    "mcmc",
    "metropolis",
    "multi_scan",
    "mwg_step",
    "rwmh",
    "split",
    "summarize",
    "summarize_chains",
    "then",
]
