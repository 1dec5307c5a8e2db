"""Generalized negative binomial processes: distributions, partition laws and samplers."""
from ._backend import BACKEND
from .dist import (
    ModelParams,
    Parameterization,
    ProbabilityClampWarning,
    gnb_log_pmf,
    gnb_sample,
    levy_mass,
    tnb_log_pmf,
    tnb_sample,
)
from .eppf import Partition, enumerate_partitions, log_ecpf, log_eppf, prediction_weights
from .gibbs import ChainConfig, MixtureState, Trace, Variant, run_chain, run_prior_chain
from .io import Dataset, Summary, load_dataset, load_galaxy, summarize
from .process import cluster_number_pmf, simulate_prior, solve_prob
from .special import StirlingTriangle, build_stirling

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ChainConfig",
    "Dataset",
    "MixtureState",
    "ModelParams",
    "Parameterization",
    "Partition",
    "ProbabilityClampWarning",
    "StirlingTriangle",
    "Summary",
    "Trace",
    "Variant",
    "build_stirling",
    "cluster_number_pmf",
    "enumerate_partitions",
    "gnb_log_pmf",
    "gnb_sample",
    "levy_mass",
    "load_dataset",
    "load_galaxy",
    "log_ecpf",
    "log_eppf",
    "prediction_weights",
    "run_chain",
    "run_prior_chain",
    "simulate_prior",
    "solve_prob",
    "summarize",
    "tnb_log_pmf",
    "tnb_sample",
]
