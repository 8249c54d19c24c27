"""Symmetry-breaking weight masks and mean-field VI for small MLPs.

Thin wrapper over the C++ core; see the functions re-exported from
``symbreak._core``.
"""

from symbreak._core import (
    all_columns,
    default_config,
    forward,
    fully_connected_count,
    generate_gp_dataset,
    generate_mask,
    logsumexp,
    residual_permutation_counts,
    run_single,
)

__all__ = [
    "all_columns",
    "default_config",
    "forward",
    "fully_connected_count",
    "generate_gp_dataset",
    "generate_mask",
    "logsumexp",
    "residual_permutation_counts",
    "run_single",
]
