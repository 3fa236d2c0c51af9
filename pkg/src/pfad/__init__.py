"""Motion-artifact removal for MRI with a pixel-frequency diffusion sampler.

The package is organised by layer:

``kspace``     centered unitary DFT and ideal phase-encode filters
``phantom``    synthetic anatomy-like test images
``motion``     rigid and respiratory k-space corruption
``diffusion``  DDPM schedule, forward/reverse steps, oracle denoiser
``network``    small torch denoiser, training loop, checkpoint format
``purify``     the alternating-mask purification sampler
``metrics``    PSNR, SSIM, GMSD and the Mann-Whitney U test
``studies``    ablation arms and parameter sweeps
``cli``        the ``pfad`` command line tool
"""

from .diffusion import NoiseSchedule, OracleDenoiser, make_schedule, rescaled_schedule
from .kspace import FrequencyFilter, dft2, idft2, make_filter_pair
from .metrics import gmsd, mann_whitney_u, psnr, ssim
from .motion import RespiratoryParams, RigidMotionParams, simulate
from .phantom import PhantomSpec, generate_phantom, phantom_corpus
from .purify import PurifyConfig, purify

__version__ = "0.1.0"

__all__ = [
    "FrequencyFilter", "NoiseSchedule", "OracleDenoiser", "PhantomSpec", "PurifyConfig",
    "RespiratoryParams", "RigidMotionParams", "dft2", "generate_phantom", "gmsd",
    "idft2", "make_filter_pair", "make_schedule", "mann_whitney_u", "phantom_corpus",
    "psnr", "purify", "rescaled_schedule", "simulate", "ssim",
]
