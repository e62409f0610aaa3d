"""Latent binary tree decomposition of pairwise correlations.

The heavy lifting lives in the compiled ``_core`` extension; this package
re-exports its operations. Trees are plain JSON-style dicts with ``nodes``,
``edges`` and ``root`` keys, so results serialize directly.
"""

from ._core import (
    InputError,
    NumericError,
    compute_correlations,
    decompose,
    fit,
    quad_error,
    simplify_tree,
    simulate,
    star_decompose_3,
    trees_equivalent,
)

__all__ = [
    "InputError",
    "NumericError",
    "compute_correlations",
    "decompose",
    "fit",
    "quad_error",
    "simplify_tree",
    "simulate",
    "star_decompose_3",
    "trees_equivalent",
]
