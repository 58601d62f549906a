"""Synthetic radiograph-like images with planted graded lesions.

Each sample is smoothed band-limited noise (stand-in for bone texture)
plus, for grades above 0, a small elliptical blob whose contrast grows
linearly with the grade. The matching saliency map is an anisotropic
Gaussian bump whose 0.05 level set hugs the lesion ellipse with a one-pixel
margin, so the lesion is always contained in the salient region and the
IOU gates translate directly into lesion preservation.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .formats import read_pgm, read_smap, write_pgm, write_smap
from .rng import derive_rng

# exp(-x^2/2) = 0.05 at x = sqrt(2 ln 20)
_EPS_RADIUS = float(np.sqrt(2.0 * np.log(20.0)))
_BUMP_MARGIN_PX = 1.0

BG_MEAN = 0.45
BG_STD = 0.08
TEXTURE_WAVELENGTH_PX = 16.0


@dataclass(frozen=True)
class SynthSpec:
    image_px: int = 224
    lesion_area_fraction: float = 0.0412
    n_classes: int = 5
    texture_seed: int = 0
    lesion_contrast: float = 0.4
    texture_std: float = BG_STD

    def __post_init__(self):
        if not 0.0 < self.lesion_area_fraction < 0.5:
            raise ValueError("lesion_area_fraction must be in (0, 0.5)")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if self.image_px < 16:
            raise ValueError("image_px must be >= 16")
        if self.texture_std < 0:
            raise ValueError("texture_std must be >= 0")


@dataclass(frozen=True)
class SynthSample:
    image_id: str
    image: np.ndarray
    label: int
    lesion_mask: np.ndarray
    saliency: np.ndarray


def _background(size, rng, texture_std):
    noise = rng.standard_normal((size, size))
    smooth = ndimage.gaussian_filter(noise, TEXTURE_WAVELENGTH_PX / 4.0, mode="reflect")
    smooth = (smooth - smooth.mean()) / max(smooth.std(), 1e-12)
    return smooth * texture_std + BG_MEAN


def _lesion_geometry(spec, rng):
    """Random ellipse: area fixed by the spec, axis ratio in [1,2], any angle.

    The center is uniform over the disc that keeps the whole bump inside
    the frame under any rotation about the image center, so rigid
    augmentation never clips the lesion at a border (and the placement
    stays at least one blob radius from every border)."""
    size = spec.image_px
    area = spec.lesion_area_fraction * size * size
    ratio = float(rng.uniform(1.0, 2.0))
    minor = float(np.sqrt(area / (np.pi * ratio)))
    major = ratio * minor
    angle = float(rng.uniform(0.0, np.pi))
    center = (size - 1.0) / 2.0
    reach = center - (major + _BUMP_MARGIN_PX + 1.0)
    if reach <= 0:
        raise ValueError(f"image {size}px too small for lesion fraction {spec.lesion_area_fraction}")
    radius = reach * np.sqrt(rng.uniform(0.0, 1.0))
    theta = rng.uniform(0.0, 2.0 * np.pi)
    cy = float(center + radius * np.sin(theta))
    cx = float(center + radius * np.cos(theta))
    return cy, cx, major, minor, angle


def _elliptic_radius(size, cy, cx, major, minor, angle):
    yy, xx = np.meshgrid(np.arange(size, dtype=np.float64), np.arange(size, dtype=np.float64), indexing="ij")
    dy, dx = yy - cy, xx - cx
    u = np.cos(angle) * dx + np.sin(angle) * dy
    v = -np.sin(angle) * dx + np.cos(angle) * dy
    return np.sqrt((u / major) ** 2 + (v / minor) ** 2)


def gen_sample(spec: SynthSpec, grade: int, rng, image_id: str = "synth") -> SynthSample:
    """Generate one sample of the given severity grade.

    Grade 0 has no lesion; its saliency bump sits at a random plausible
    location so downstream consumers always get a usable attention map.
    """
    if not 0 <= grade < spec.n_classes:
        raise ValueError(f"grade {grade} outside [0, {spec.n_classes})")
    size = spec.image_px
    image = _background(size, rng, spec.texture_std)
    cy, cx, major, minor, angle = _lesion_geometry(spec, rng)
    rho = _elliptic_radius(size, cy, cx, major, minor, angle)

    if grade > 0:
        delta = spec.lesion_contrast * grade / (spec.n_classes - 1)
        # ~1 px anti-aliased edge in normalized radius units
        coverage = np.clip((1.0 - rho) * minor + 0.5, 0.0, 1.0)
        image = image + delta * coverage
        lesion_mask = rho <= 1.0
    else:
        lesion_mask = np.zeros((size, size), dtype=bool)
    image = np.clip(image, 0.0, 1.0)

    sigma_scale = (np.array([major, minor]) + _BUMP_MARGIN_PX) / _EPS_RADIUS
    rho_bump = _elliptic_radius(size, cy, cx, sigma_scale[0], sigma_scale[1], angle)
    saliency = np.exp(-0.5 * rho_bump**2)
    saliency /= saliency.max()

    return SynthSample(image_id, image, int(grade), lesion_mask, saliency)


def gen_dataset(spec: SynthSpec, n_per_class: int, seed: int) -> list:
    """Balanced dataset with per-sample splittable seeds (labels interleave
    0..n_classes-1 so any prefix stays balanced)."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    samples = []
    total = n_per_class * spec.n_classes
    for i in range(total):
        grade = i % spec.n_classes
        rng = derive_rng(seed, "synth-sample", spec.texture_seed, i)
        samples.append(gen_sample(spec, grade, rng, image_id=f"synth_{i:05d}"))
    return samples


def dump_dataset(samples, out_dir) -> None:
    """Write PGM images, .smap saliency, and labels.csv (image_id,grade)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "labels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "grade"])
        for s in samples:
            write_pgm(out / f"{s.image_id}.pgm", s.image)
            write_smap(out / f"{s.image_id}.smap", s.saliency)
            writer.writerow([s.image_id, s.label])


def load_dataset(data_dir) -> list:
    """Load a dumped dataset; lesion masks are not persisted and load empty."""
    root = Path(data_dir)
    labels_path = root / "labels.csv"
    if not labels_path.is_file():
        raise FileNotFoundError(f"no labels.csv in {root}")
    samples = []
    with open(labels_path, newline="") as fh:
        for row in csv.DictReader(fh):
            image_id = row["image_id"]
            image = read_pgm(root / f"{image_id}.pgm")
            smap_path = root / f"{image_id}.smap"
            saliency = read_smap(smap_path) if smap_path.is_file() else np.ones_like(image)
            samples.append(
                SynthSample(
                    image_id=image_id,
                    image=image,
                    label=int(row["grade"]),
                    lesion_mask=np.zeros(image.shape, dtype=bool),
                    saliency=saliency,
                )
            )
    return samples
