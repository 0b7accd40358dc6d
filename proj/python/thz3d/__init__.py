"""Terahertz FMCW volume synthesis, sinc-model fitting and lateral deconvolution."""

from ._core import (
    DataError,
    NumericalError,
    blind_tv_deconvolve,
    fit_spectra,
    gaussian_kernel,
    intensity_psf_sigma_px,
    lucy_richardson,
    read_volume,
    run_pipeline,
    synthesize,
    write_volume,
)

__all__ = [
    "DataError",
    "NumericalError",
    "blind_tv_deconvolve",
    "fit_spectra",
    "gaussian_kernel",
    "intensity_psf_sigma_px",
    "lucy_richardson",
    "read_volume",
    "run_pipeline",
    "synthesize",
    "write_volume",
]
