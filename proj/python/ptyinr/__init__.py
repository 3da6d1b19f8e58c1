"""Neural-field ptychographic reconstruction."""

from ._core import (
    __version__,
    align_global_phase,
    count_params,
    default_config,
    epie,
    evaluate,
    focused_probe,
    frc,
    gradcheck,
    phantom,
    psnr,
    reconstruct,
    simulate,
)

__all__ = [
    "__version__",
    "align_global_phase",
    "count_params",
    "default_config",
    "epie",
    "evaluate",
    "focused_probe",
    "frc",
    "gradcheck",
    "phantom",
    "psnr",
    "reconstruct",
    "simulate",
]
