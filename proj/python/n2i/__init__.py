"""Phase-contrast CT simulation, reconstruction and self-supervised denoising."""

import json as _json

from ._core import (
    ConfigError,
    Denoiser,
    Error,
    IoError,
    NumericError,
    apply_noise,
    backproject,
    cnr,
    edge_resolution,
    exposure_alpha_scales,
    fbp_reconstruct,
    gamma_schedule,
    gaussian_filter,
    paganin_retrieve,
    phase_propagate_forward,
    psnr,
    radon_forward,
    simulate,
    ssim,
    subsample,
    tv_denoise,
    uniform_angles,
    write_volume,
)
from ._core import read_volume as _read_volume


def read_volume(path):
    """Array, axes, pixel pitch and metadata dict of an .n2ivol file."""
    array, axes, pitch, meta = _read_volume(path)
    return array, axes, pitch, _json.loads(meta)


__all__ = [name for name in dir() if not name.startswith("_")]
