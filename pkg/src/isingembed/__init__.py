"""Boltzmann sampling of chain-embedded Ising models.

A simulation laboratory for studying what minor embedding does to thermal
sampling: build chain embeddings, compute exact and Monte Carlo thermal
distributions, project samples back to the logical space (majority vote or
restricted resampling), and compare the bias against annealed-approximation
predictions.
"""

from .embedding import (
    BrokenChainError,
    ChainClassification,
    ChainEmbedding,
    build_embedding,
    classify,
    embed_config,
    energy_shift,
    project_logical,
    read_embedding,
    write_embedding,
)
from .exact import (
    BrokenChainProfile,
    DistributionTable,
    all_energies,
    boltzmann_distribution,
    broken_chain_profile,
    exact_ring_partition_ratio,
    fit_inverse_temperature,
    kl_divergence,
    level_probabilities,
    log_partition_function,
    logical_subspace_distribution,
    optimal_beta,
)
from .model import (
    EnergyLevelHistogram,
    IsingModel,
    SizeCapError,
    as_spin_config,
    config_from_index,
    config_index,
    energy,
    energy_histogram,
    model_hash,
    read_instance,
    write_instance,
)
from .projection import (
    ProjectionReport,
    exact_projected_distribution,
    exact_projected_distributions,
    majority_vote,
    project_batch_mv,
    project_batch_rrs,
    rrs,
)
from .rng import SplitMix64
from .sampler import (
    SampleBatch,
    SamplerConfig,
    boltzmann_sample_over_subset,
    metropolis_sample,
    write_samples,
)
from .theory import (
    TheoryParams,
    jf_schedule,
    n_max,
    p0,
    p_out,
    penalty_weight,
    pn,
    pn_ratio,
    ring_energy_table,
    ring_model,
    ring_r_values,
)

__version__ = "0.1.0"
