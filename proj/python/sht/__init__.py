"""Python bindings for the super-resolution guided face alignment library.

Images are H x W x 3 float arrays in [0, 1]; landmarks are L x 2 arrays of
pixel coordinates with pixel centers at integers.
"""

import torch as _torch  # loads the libtorch shared libraries the extension links against

from ._sht import (
    Error,
    Model,
    ced_auc,
    decode_heatmaps,
    failure_rate,
    gradient_map,
    nme,
    normalize_config,
    psnr_y,
    read_image,
    reference_config_text,
    render_heatmaps,
    ssim_y,
    toy_config_text,
    toy_faces,
)

__all__ = [
    "Error",
    "Model",
    "ced_auc",
    "decode_heatmaps",
    "failure_rate",
    "gradient_map",
    "nme",
    "normalize_config",
    "psnr_y",
    "read_image",
    "reference_config_text",
    "render_heatmaps",
    "ssim_y",
    "toy_config_text",
    "toy_faces",
]
