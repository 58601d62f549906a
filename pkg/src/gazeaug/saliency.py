"""Saliency providers: precomputed gaze maps, spectral residual, uniform.

Each provider returns a dense [0,1] map matching the image dimensions, so
the augmentation gates can run on stored expert attention or on a classical
frequency-domain baseline interchangeably.
"""

import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ConfigError
from .formats import read_smap
from .geometry import resize_bilinear

SR_WORKING_PX = 64
SR_SMOOTH_SIGMA = 2.5
_LOG_EPS = 1e-8

VALID_KINDS = ("gaze_file", "spectral_residual", "uniform")


@dataclass(frozen=True)
class SaliencySource:
    """Where saliency maps come from.

    kind 'gaze_file' reads `<root>/<image_id>.smap`; 'spectral_residual'
    computes the frequency-domain baseline from the image itself; 'uniform'
    returns an all-ones map (no attention prior).
    """

    kind: str
    root: Path = None
    working_px: int = SR_WORKING_PX
    smooth_sigma: float = SR_SMOOTH_SIGMA

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise ConfigError(f"unknown saliency kind '{self.kind}'; expected one of {VALID_KINDS}")
        if self.kind == "gaze_file":
            if self.root is None:
                raise ConfigError("gaze_file saliency requires a root directory")
            root = Path(self.root)
            if not root.is_dir():
                raise ConfigError(f"saliency root does not exist: {root}")
            object.__setattr__(self, "root", root)


# one cache of loaded maps per source; guarded for concurrent readers
_cache_lock = threading.Lock()
_file_cache = {}


def saliency_for(source: SaliencySource, image_id: str, image: np.ndarray) -> np.ndarray:
    """Return the saliency map for `image` under the given source."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("image must be a non-empty 2-D array")
    if source.kind == "uniform":
        return np.ones_like(img)
    if source.kind == "spectral_residual":
        return spectral_residual(img, working_px=source.working_px, smooth_sigma=source.smooth_sigma)
    path = source.root / f"{image_id}.smap"
    key = (str(path.resolve()), image_id)
    with _cache_lock:
        cached = _file_cache.get(key)
    if cached is None:
        if not path.is_file():
            raise FileNotFoundError(f"no stored saliency map for '{image_id}': {path}")
        cached = read_smap(path)
        cached.setflags(write=False)
        with _cache_lock:
            _file_cache[key] = cached
    if cached.shape != img.shape:
        raise ValueError(
            f"saliency map for '{image_id}' is {cached.shape}, image is {img.shape}"
        )
    return np.array(cached)


def _spectral_residual_core(img, fft2, ifft2, smooth_sigma):
    """Shared pipeline around an injectable DFT (tests swap in a direct DFT)."""
    # drop the mean so the DC bin carries no energy: a flat image then maps
    # to an identically zero response instead of dominating the inverse
    spectrum = fft2(img - img.mean())
    amplitude = np.abs(spectrum)
    log_amp = np.log(amplitude + _LOG_EPS)
    residual = log_amp - ndimage.uniform_filter(log_amp, size=3, mode="wrap")
    rescaled = spectrum * np.exp(residual) / (amplitude + _LOG_EPS)
    response = np.abs(ifft2(rescaled)) ** 2
    return ndimage.gaussian_filter(response, smooth_sigma, mode="nearest")


def spectral_residual(
    image: np.ndarray,
    working_px: int = SR_WORKING_PX,
    smooth_sigma: float = SR_SMOOTH_SIGMA,
    fft2=np.fft.fft2,
    ifft2=np.fft.ifft2,
) -> np.ndarray:
    """Frequency-domain saliency: deviation of the log spectrum from its local mean.

    The image is downscaled so its longer side is `working_px` (never
    upscaled), transformed, and the log-amplitude spectrum is compared to
    its 3x3 box-filtered version; the residual re-weights the original
    spectrum, and the squared magnitude of the inverse transform, Gaussian
    smoothed, is the saliency. The map is upscaled back and max-normalized;
    a degenerate all-zero response stays all-zero.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    height, width = img.shape
    if height < 8 or width < 8:
        raise ValueError(f"image too small for spectral residual: {img.shape} (need >= 8x8)")

    longer = max(height, width)
    if longer > working_px:
        scale = working_px / longer
        work_h = max(8, int(round(height * scale)))
        work_w = max(8, int(round(width * scale)))
        work = resize_bilinear(img, work_h, work_w)
    else:
        work = img

    response = _spectral_residual_core(work, fft2, ifft2, smooth_sigma)
    if response.shape != img.shape:
        response = resize_bilinear(response, height, width)
    peak = response.max()
    if peak > 1e-12:
        response = response / peak
    else:
        response = np.zeros_like(response)
    return np.clip(response, 0.0, 1.0)
