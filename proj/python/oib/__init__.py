"""Opportunistic information bottleneck: Gaussian compressors, re-expansion and metrics."""

from ._oib import (
    CovariancePair,
    Compressor,
    GibSolution,
    Reexpander,
    ConfigError,
    DimensionError,
    NumericalError,
    estimate_covariance_pair,
    solve_gib,
    compressor_at_beta,
    compressor_at_size,
    cca_compressor,
    pca_compressor,
    encode_rows,
    fit_lmmse,
    fit_ls,
    reexpand_rows,
    gaussian_entropy,
    gaussian_mi,
    linear_map_mi,
    input_mi,
    dft_forward,
    dft_inverse,
    henze_zirkler,
    network_macs,
    savings_table,
    synth_gaussian,
)

__all__ = [name for name in dir() if not name.startswith("_")]
