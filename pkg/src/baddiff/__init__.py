# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

# import all public names
from baddiff.config import (
    DefenseConfig,
    ExperimentConfig,
    PoisonConfig,
    ScheduleConfig,
    derive_seed,
    load_config,
    seed_stream,
)
from baddiff.data import DatasetKind, DatasetSpec, generate_dataset, ring_centres
from baddiff.defense import (
    AnpResult,
    PerturbationGranularity,
    PerturbationState,
    anp_search,
    perturbed_forward,
    reconstruction_mse,
)
from baddiff.denoiser import (
    Architecture,
    DenoiserMode,
    DenoiserParams,
    init_params,
    loss_gradient,
    predict_noise,
    time_embedding,
    zero_params,
)
from baddiff.diffusion import (
    forward_marginal_backdoor,
    forward_marginal_clean,
    posterior_coefficients_backdoor,
    posterior_coefficients_clean,
    posterior_mean_backdoor,
    posterior_mean_backdoor_eps_form,
    posterior_mean_clean,
    reparametrize_x0_backdoor,
    solve_eps_backdoor,
    transition_backdoor,
)
from baddiff.error import (
    DegenerateStepError,
    FormatError,
    NonFiniteError,
    ParameterError,
    ShapeError,
    StageError,
    TimestepError,
    UnsupportedModeError,
    _Error,
    _ErrorCause,
)
from baddiff.experiment import (
    RunResult,
    evaluate,
    load_model,
    run_defense,
    run_experiment,
    run_sweep,
)
from baddiff.logging import (
    LoggingLevel,
    get_global_logging_level,
    get_minimal_logging_level,
    set_global_logging_level,
)
from baddiff.metrics import (
    MetricsReport,
    frechet_gaussian_distance,
    kernel_mmd,
    kernel_mmd_zscore,
    mean_ssim,
    median_bandwidth,
    ssim,
    target_mse,
)
from baddiff.oracle import (
    Gaussian1D,
    VerificationRow,
    condition_pair,
    finite_difference_gradient,
    mc_marginal_check,
    posterior_backdoor,
    random_case,
    reference_ddpm_loss,
    reference_forward,
    run_verification,
)
from baddiff.poisoning import (
    PoisonSpec,
    TargetKind,
    Trigger,
    TriggerKind,
    apply_trigger,
    make_target,
    make_trigger,
    poison_count,
    poison_target_coefficients,
    poisoned_training_example,
    split_dataset,
    split_indices,
)
from baddiff.sampling import (
    SamplerConfig,
    SamplerKind,
    SigmaRule,
    ancestral_sample,
    clipped_sample,
    ddim_sample,
    ddim_timesteps,
    draw_chain_seeds,
    estimate_x0,
    init_latent,
    sample,
    sample_chains,
    to_display,
)
from baddiff.schedule import (
    CoefficientSet,
    NoiseSchedule,
    ScheduleKind,
    coefficients,
    make_linear_schedule,
)
from baddiff.tensor_file import (
    Checkpoint,
    load_checkpoint,
    load_tensors,
    save_checkpoint,
    save_tensors,
)
from baddiff.training import (
    AdamState,
    Batch,
    TrainConfig,
    TrainHistory,
    TrainMode,
    adam_step,
    poisoned_loss_batch,
    build_training_pairs,
    draw_timesteps_and_noise,
    pretrain_clean,
    train,
)
from baddiff.version import __version__


def _del_global_name(name):
    if name in globals():
        del globals()[name]


# remove private module names from the package
_del_global_name("config")
_del_global_name("data")
_del_global_name("defense")
_del_global_name("denoiser")
_del_global_name("diffusion")
_del_global_name("error")
_del_global_name("experiment")
_del_global_name("logging")
_del_global_name("metrics")
_del_global_name("oracle")
_del_global_name("poisoning")
_del_global_name("sampling")
_del_global_name("schedule")
_del_global_name("tensor_file")
_del_global_name("training")
_del_global_name("utils")
_del_global_name("version")

# remove private `_del_global_name` name from the package
del _del_global_name

__all__ = [
    "DefenseConfig",
    "ExperimentConfig",
    "PoisonConfig",
    "ScheduleConfig",
    "derive_seed",
    "load_config",
    "seed_stream",
    "DatasetKind",
    "DatasetSpec",
    "generate_dataset",
    "ring_centres",
    "AnpResult",
    "PerturbationGranularity",
    "PerturbationState",
    "anp_search",
    "perturbed_forward",
    "reconstruction_mse",
    "Architecture",
    "DenoiserMode",
    "DenoiserParams",
    "init_params",
    "loss_gradient",
    "predict_noise",
    "time_embedding",
    "zero_params",
    "forward_marginal_backdoor",
    "forward_marginal_clean",
    "posterior_coefficients_backdoor",
    "posterior_coefficients_clean",
    "posterior_mean_backdoor",
    "posterior_mean_backdoor_eps_form",
    "posterior_mean_clean",
    "reparametrize_x0_backdoor",
    "solve_eps_backdoor",
    "transition_backdoor",
    "DegenerateStepError",
    "FormatError",
    "NonFiniteError",
    "ParameterError",
    "ShapeError",
    "StageError",
    "TimestepError",
    "UnsupportedModeError",
    "_Error",
    "_ErrorCause",
    "RunResult",
    "evaluate",
    "load_model",
    "run_defense",
    "run_experiment",
    "run_sweep",
    "LoggingLevel",
    "get_global_logging_level",
    "get_minimal_logging_level",
    "set_global_logging_level",
    "MetricsReport",
    "frechet_gaussian_distance",
    "kernel_mmd",
    "kernel_mmd_zscore",
    "mean_ssim",
    "median_bandwidth",
    "ssim",
    "target_mse",
    "Gaussian1D",
    "VerificationRow",
    "condition_pair",
    "finite_difference_gradient",
    "mc_marginal_check",
    "posterior_backdoor",
    "random_case",
    "reference_ddpm_loss",
    "reference_forward",
    "run_verification",
    "PoisonSpec",
    "TargetKind",
    "Trigger",
    "TriggerKind",
    "apply_trigger",
    "make_target",
    "make_trigger",
    "poison_count",
    "poison_target_coefficients",
    "poisoned_training_example",
    "split_dataset",
    "split_indices",
    "SamplerConfig",
    "SamplerKind",
    "SigmaRule",
    "ancestral_sample",
    "clipped_sample",
    "ddim_sample",
    "ddim_timesteps",
    "draw_chain_seeds",
    "estimate_x0",
    "init_latent",
    "sample",
    "sample_chains",
    "to_display",
    "CoefficientSet",
    "NoiseSchedule",
    "ScheduleKind",
    "coefficients",
    "make_linear_schedule",
    "Checkpoint",
    "load_checkpoint",
    "load_tensors",
    "save_checkpoint",
    "save_tensors",
    "AdamState",
    "Batch",
    "TrainConfig",
    "TrainHistory",
    "TrainMode",
    "adam_step",
    "poisoned_loss_batch",
    "build_training_pairs",
    "draw_timesteps_and_noise",
    "pretrain_clean",
    "train",
    "__version__",
]
