"""Retina image preprocessing: radius rescale, local-average subtraction, clip.

Images are held as float arrays of shape (height, width, channels) with
values in [0, 255]; quantisation to 8 bits happens only when writing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

BLUR_TRUNCATE = 3.0
# foreground pixels are brighter than this fraction of the mean intensity
BACKGROUND_FRACTION = 0.1


class PreprocError(ValueError):
    pass


@dataclass(frozen=True)
class Image:
    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=float)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3 or a.shape[2] not in (1, 3):
            raise PreprocError(f"expected (h, w, 1|3) pixel grid, got shape {a.shape}")
        if a.size == 0:
            raise PreprocError("image is empty")
        object.__setattr__(self, "data", a)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class PreprocConfig:
    target_radius: float = 300.0
    blur_constant: float = 30.0
    clip_fraction: float = 0.9
    alpha: float = 4.0
    offset: float = 128.0

    def __post_init__(self):
        if not self.blur_constant > 0:
            raise PreprocError("blur_constant must be > 0")
        if not 0 < self.clip_fraction <= 1:
            raise PreprocError("clip_fraction must lie in (0, 1]")
        if not self.target_radius > 0:
            raise PreprocError("target_radius must be > 0")

    @property
    def sigma(self) -> float:
        return self.target_radius / self.blur_constant


def estimate_radius(img: Image) -> float:
    """Half the widest row of foreground pixels.

    Foreground is channel-summed intensity above a tenth of the image mean,
    so a black border of any width is ignored.
    """
    intensity = img.data.sum(axis=2)
    mask = intensity > BACKGROUND_FRACTION * intensity.mean()
    widths = mask.sum(axis=1)
    if widths.max(initial=0) == 0:
        raise PreprocError("no foreground pixels; cannot estimate radius")
    return float(widths.max()) / 2.0


def rescale_to_radius(img: Image, target_radius: float) -> Image:
    factor = target_radius / estimate_radius(img)
    if factor == 1.0:
        return Image(img.data.copy())
    out = ndimage.zoom(img.data, (factor, factor, 1), order=1, mode="nearest", grid_mode=True)
    return Image(np.clip(out, 0.0, 255.0))


def gaussian_blur(data: np.ndarray, sigma: float) -> np.ndarray:
    """Separable per-channel blur, kernel truncated at 3 sigma, reflected edges."""
    out = np.asarray(data, dtype=float)
    for axis in (0, 1):
        out = ndimage.gaussian_filter1d(out, sigma, axis=axis, mode="reflect", truncate=BLUR_TRUNCATE)
    return out


def subtract_local_average(img: Image, cfg: PreprocConfig = PreprocConfig()) -> Image:
    detail = img.data - gaussian_blur(img.data, cfg.sigma)
    return Image(np.clip(cfg.alpha * detail + cfg.offset, 0.0, 255.0))


def clip_mask(height: int, width: int, clip_fraction: float) -> np.ndarray:
    """True for pixel centres inside the centred clip circle."""
    r = clip_fraction * min(width, height) / 2.0
    yy = np.arange(height) + 0.5 - height / 2.0
    xx = np.arange(width) + 0.5 - width / 2.0
    return yy[:, None] ** 2 + xx[None, :] ** 2 <= r * r


def clip_boundary(img: Image, clip_fraction: float = 0.9) -> Image:
    if not 0 < clip_fraction <= 1:
        raise PreprocError("clip_fraction must lie in (0, 1]")
    mask = clip_mask(img.height, img.width, clip_fraction)
    return Image(img.data * mask[:, :, None])


def preprocess(img: Image, cfg: PreprocConfig = PreprocConfig(), rescale: bool = True) -> Image:
    if rescale:
        img = rescale_to_radius(img, cfg.target_radius)
    return clip_boundary(subtract_local_average(img, cfg), cfg.clip_fraction)


def read_image(path) -> Image:
    """Read a binary PGM (P5) or PPM (P6)."""
    with PILImage.open(path) as im:
        if im.format != "PPM":
            raise PreprocError(f"{path}: not a PGM/PPM file")
        if im.mode not in ("L", "RGB"):
            raise PreprocError(f"{path}: unsupported pixel mode {im.mode}")
        return Image(np.asarray(im, dtype=float))


def quantize(img: Image) -> np.ndarray:
    return np.clip(np.rint(img.data), 0, 255).astype(np.uint8)


def write_image(img: Image, path) -> None:
    """Write binary PGM/PPM to a path or a binary file object."""
    q = quantize(img)
    mode = "L" if img.channels == 1 else "RGB"
    arr = q[:, :, 0] if img.channels == 1 else q
    PILImage.fromarray(arr, mode).save(path, format="PPM")
