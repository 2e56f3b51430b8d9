"""Block-wise image cipher, ConvMixer with an adaptive permutation matrix, and parameter budgets."""

from ._ppcm import (
    EpochMetrics,
    InvalidArgument,
    IoError,
    KeyMismatch,
    Model,
    ModelConfig,
    ParseError,
    ShapeError,
    block_affine_map,
    decrypt,
    derive_subkeys,
    encrypt,
    extract_permutation,
    gen_mask,
    gen_permutation,
    master_from_seed,
    n_params,
    next_u64,
    penalty_LU,
    permutation_matrix,
    sweep,
)

__all__ = [
    "EpochMetrics",
    "InvalidArgument",
    "IoError",
    "KeyMismatch",
    "Model",
    "ModelConfig",
    "ParseError",
    "ShapeError",
    "block_affine_map",
    "decrypt",
    "derive_subkeys",
    "encrypt",
    "extract_permutation",
    "gen_mask",
    "gen_permutation",
    "master_from_seed",
    "n_params",
    "next_u64",
    "penalty_LU",
    "permutation_matrix",
    "sweep",
]
