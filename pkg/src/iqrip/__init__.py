"""Interquartile-range inverse-probability (IQR-IP) sampling with a
diagnostic suite and a small n-gram model to run it on."""

from .bounds import BoundReport, corollary_bound, kl_divergence, tv_distance
from .dist import Distribution, RngState, entropy, normalize, quantile, sample_token
from .errors import (
    ConsistencyError,
    CorpusError,
    DistributionError,
    InfiniteDivergenceError,
    InfinitePerplexityError,
    IqripError,
    ParameterError,
    UndefinedFitError,
)
from .experiment import Cell, CellResult, run_experiment, sweep_grid
from .filters import CandidateSet, dynamic_prune, joint_filter, top1ctrl_set, top_k_set, top_p_set
from .iqr_ip import Band, IqrPartition, Method, SamplerConfig, inverse_permute, iqr_ip_step, iqr_partition
from .metrics import (
    MetricsReport,
    Sample,
    analyze,
    detect_loops,
    extract_trajectories,
    h_rep,
    perplexity,
    sample_h_rep,
    self_bleu,
    zipf_coefficient,
)
from .toy_lm import GenerationRecord, ToyModel, default_model, default_prompt, generate, train_ngram

__all__ = [name for name in dir() if not name.startswith("_")]
