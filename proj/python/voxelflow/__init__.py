"""Bayesian voxel-wise fMRI activation analysis."""

from ._core import (
    VoxelflowError,
    block_regressor,
    build_design,
    convolve,
    filter_run,
    gp_anova,
    hrf,
    read_volume,
    run_group,
    run_individual,
    sharp_f_evidence,
    simulate,
    test_average,
    test_joint,
    test_marginal,
    validate_fpr,
    write_volume,
)

__version__ = "0.1.0"

__all__ = [
    "VoxelflowError",
    "block_regressor",
    "build_design",
    "convolve",
    "filter_run",
    "gp_anova",
    "hrf",
    "read_volume",
    "run_group",
    "run_individual",
    "sharp_f_evidence",
    "simulate",
    "test_average",
    "test_joint",
    "test_marginal",
    "validate_fpr",
    "write_volume",
]
