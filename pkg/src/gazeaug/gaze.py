"""Gaze-log parsing, filtering, and Gaussian saliency-map rendering.

A gaze log is a UTF-8 text file, one sample per line in the form
``image_id,x,y,t_ms`` with ``.`` as the decimal separator; lines starting
with ``#`` are comments. Coordinates are normalized to [0,1] over the
displayed image; samples outside that square are kept by the parser and
dropped by :func:`filter_gaze`.

Rendering deposits one unit impulse per sample at the nearest pixel and
convolves with a truncated Gaussian kernel (odd size, default 99 px,
sigma = size/6 so the support covers +-3 sigma), then max-normalizes the
map to [0,1].
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ParseError

DEFAULT_KERNEL_SIZE = 99
DEFAULT_SAMPLE_RATE_HZ = 90.0


@dataclass(frozen=True)
class GazePoint:
    x: float
    y: float
    t_ms: float

    def in_bounds(self) -> bool:
        return 0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0


@dataclass(frozen=True)
class GazeLog:
    image_id: str
    points: tuple
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class KernelSpec:
    """Truncated Gaussian kernel: odd pixel size and positive sigma."""

    size_px: int = DEFAULT_KERNEL_SIZE
    sigma_px: float = field(default=None)

    def __post_init__(self):
        if self.size_px <= 0 or self.size_px % 2 == 0:
            raise ValueError(f"kernel size must be odd and positive, got {self.size_px}")
        if self.sigma_px is None:
            object.__setattr__(self, "sigma_px", self.size_px / 6.0)
        if self.sigma_px <= 0:
            raise ValueError(f"kernel sigma must be positive, got {self.sigma_px}")


def parse_gaze_logs(data) -> list:
    """Parse a gaze-log file into one GazeLog per image_id.

    Accepts bytes or str. Logs appear in order of first appearance; sample
    order within each log is preserved. Raises ParseError on malformed
    lines (naming the 1-based line number), on timestamps that decrease
    within one image's sequence, and on inputs with no samples at all.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"gaze log is not valid UTF-8: {exc}") from exc
    else:
        text = data

    points_by_image = {}
    last_t = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 4:
            raise ParseError(f"expected 4 comma-separated fields, got {len(fields)}", line=lineno)
        image_id = fields[0]
        if not image_id:
            raise ParseError("empty image_id", line=lineno)
        try:
            x, y, t_ms = float(fields[1]), float(fields[2]), float(fields[3])
        except ValueError as exc:
            raise ParseError(f"non-numeric field: {exc}", line=lineno)
        if not np.isfinite([x, y, t_ms]).all():
            raise ParseError("non-finite value", line=lineno)
        if t_ms < 0:
            raise ParseError(f"negative timestamp {t_ms}", line=lineno)
        prev = last_t.get(image_id)
        if prev is not None and t_ms < prev:
            raise ParseError(
                f"timestamp decreases for image '{image_id}': {t_ms} after {prev}", line=lineno
            )
        last_t[image_id] = t_ms
        points_by_image.setdefault(image_id, []).append(GazePoint(x, y, t_ms))

    if not points_by_image:
        raise ParseError("no samples")
    return [GazeLog(image_id, tuple(pts)) for image_id, pts in points_by_image.items()]


def parse_gaze_log(data, image_id: str = None) -> GazeLog:
    """Parse a single-session gaze log.

    If the file contains several image_ids, `image_id` selects one;
    otherwise exactly one session must be present.
    """
    logs = parse_gaze_logs(data)
    if image_id is not None:
        for log in logs:
            if log.image_id == image_id:
                return log
        raise ParseError(f"image_id '{image_id}' not present in log")
    if len(logs) != 1:
        ids = ", ".join(log.image_id for log in logs)
        raise ParseError(f"log contains {len(logs)} sessions ({ids}); pass image_id")
    return logs[0]


def filter_gaze(log: GazeLog) -> GazeLog:
    """Drop samples outside the unit square; order is preserved.

    Only the bounds check is applied here; upstream distortion removal is
    tracker-specific and out of scope. Idempotent.
    """
    kept = tuple(p for p in log.points if p.in_bounds())
    if not kept:
        raise ParseError(f"empty after filtering: no in-bounds samples for '{log.image_id}'")
    return GazeLog(log.image_id, kept, log.sample_rate_hz)


def gaussian_kernel(spec: KernelSpec) -> np.ndarray:
    """1-D truncated Gaussian profile of length size_px, peak 1 at the center."""
    half = spec.size_px // 2
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    return np.exp(-(offsets**2) / (2.0 * spec.sigma_px**2))


def _impulse_grid(log: GazeLog, width: int, height: int) -> np.ndarray:
    grid = np.zeros((height, width), dtype=np.float64)
    xs = np.array([p.x for p in log.points])
    ys = np.array([p.y for p in log.points])
    # round-half-up of normalized coordinate times dimension, clamped
    cols = np.clip(np.floor(xs * width + 0.5).astype(np.int64), 0, width - 1)
    rows = np.clip(np.floor(ys * height + 0.5).astype(np.int64), 0, height - 1)
    np.add.at(grid, (rows, cols), 1.0)
    return grid


def render_gaze_map(log: GazeLog, width: int, height: int, kernel: KernelSpec = None) -> np.ndarray:
    """Render a filtered gaze log into a max-normalized saliency map.

    Each sample contributes a unit impulse at its nearest pixel; the impulse
    grid is convolved with the truncated Gaussian (zero padding, separable)
    and divided by its maximum, so a non-degenerate map peaks at exactly 1.
    """
    if width <= 0 or height <= 0:
        raise ValueError("map dimensions must be positive")
    if len(log) == 0:
        raise ValueError("cannot render an empty gaze log")
    kernel = kernel or KernelSpec()
    if kernel.size_px > width or kernel.size_px > height:
        raise ValueError(
            f"kernel exceeds image: size {kernel.size_px} vs {width}x{height}"
        )
    grid = _impulse_grid(log, width, height)
    profile = gaussian_kernel(kernel)
    smoothed = ndimage.correlate1d(grid, profile, axis=0, mode="constant", cval=0.0)
    smoothed = ndimage.correlate1d(smoothed, profile, axis=1, mode="constant", cval=0.0)
    peak = smoothed.max()
    if peak > 0:
        smoothed /= peak
    return smoothed
