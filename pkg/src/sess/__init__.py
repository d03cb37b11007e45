"""Saliency enhancement over superpixel similarity."""
from .config import SessConfig, parse_config, preset
from .fusion import run_sess, sess
from .raster import load_image, load_saliency, rgb_to_lab, save_map

__all__ = [
    "SessConfig",
    "load_image",
    "load_saliency",
    "parse_config",
    "preset",
    "rgb_to_lab",
    "run_sess",
    "save_map",
    "sess",
]
