"""Heavy-tailed generative model benchmark: samplers, metrics and bound explorer."""

from ._core import (
    Dataset,
    InvalidArgument,
    MmdResult,
    NumericError,
    ddpm_alpha_bar,
    ddpm_exponents,
    ddpm_optimal_t0,
    ddpm_optimized_rate,
    dlpm_optimal_m,
    dlpm_schedule,
    format_cell,
    gen_alpha_stable_iso,
    hill_tail_index,
    mmd_rbf,
    render_report,
    run_bench,
    sample_isotropic_stable,
    selfcheck,
    tce,
    tce_all,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "InvalidArgument",
    "MmdResult",
    "NumericError",
    "ddpm_alpha_bar",
    "ddpm_exponents",
    "ddpm_optimal_t0",
    "ddpm_optimized_rate",
    "dlpm_optimal_m",
    "dlpm_schedule",
    "format_cell",
    "gen_alpha_stable_iso",
    "hill_tail_index",
    "mmd_rbf",
    "render_report",
    "run_bench",
    "sample_isotropic_stable",
    "selfcheck",
    "tce",
    "tce_all",
]
