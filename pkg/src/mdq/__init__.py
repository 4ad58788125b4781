"""Overfitted multiple-description image codec.

Two small MLPs plus two hierarchical latent pyramids are fit to each
image, producing two independently decodable descriptions; receiving
both yields a higher-quality central reconstruction via latent
interleaving.
"""

from .arm import ArmParams, ContextSpec, laplace_prob, predict, rate_pyramid
from .bitstream import Description, Header, decode_image, read_description, write_description
from .codec import EncodeResult, decode_bytes, encode_image
from .latents import (
    CentralLatentSet,
    LatentPyramid,
    add_uniform_noise,
    interleave,
    quantize,
    quantize_pyramid,
)
from .metrics import ms_ssim, psnr
from .param_quant import QuantizedParams, param_rate, quantize_group, search_steps
from .range_coder import CdfTable, build_cdf, decode_symbols, encode_symbols
from .synthesis import SynthesisParams, UpsampledStack, synth_forward, upsample_bicubic
from .training import (
    SdcModel,
    TrainConfig,
    TrainedModel,
    distortion,
    mdc_loss,
    parse_config,
    train,
    train_single,
)

__version__ = "0.1.0"
