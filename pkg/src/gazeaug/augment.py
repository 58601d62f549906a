"""Saliency-gated image augmentation.

Views are produced by a chain of operators (flip, intensity jitter,
rotation, cutout, resized crop). Every draw of a chain records the exact
parameters used, so a view's geometry can be replayed bit-exactly on any
array; the saliency map always rides along through the same geometric
transforms, while intensity jitter touches the image only.

The gated generators re-draw candidate pairs until the salient region
survives: the source map is pushed through the candidate's transform chain
*minus the gated operator* to form the reference mask, so the IOU measures
only the loss caused by cutout (or by the crop window), never benign rigid
motion. Pairs that cannot pass within the retry budget raise
:class:`~gazeaug.errors.RejectionFailure` carrying the best IOUs seen.
"""

import dataclasses
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import RejectionFailure
from .geometry import forward_rotate_points, resize_bilinear, rotate_center

DEFAULT_OP_ORDER = ("flip", "jitter", "rotate", "cutout", "crop")
_CROP_KINDS = ("resize_crop", "shrink_pad")

# strength optima found by exhaustive search at the 224 px reference scale
SEARCHED_CUTOUT_PX = 48
SEARCHED_CROP_ZOOM = 1.2

MODES = ("default", "searched", "focus")


@dataclass(frozen=True)
class AugmentSpec:
    """Strength parameters for the ungated augmentation chain."""

    flip_prob: float = 0.5
    rotation_deg: float = 30.0
    cutout_px: int = 32
    crop_zoom: float = 1.2
    jitter: float = 0.1
    op_order: tuple = DEFAULT_OP_ORDER

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError(f"flip_prob must be in [0,1], got {self.flip_prob}")
        if self.rotation_deg < 0:
            raise ValueError("rotation_deg must be >= 0")
        if self.cutout_px < 0:
            raise ValueError("cutout_px must be >= 0")
        if self.crop_zoom <= 0:
            raise ValueError("crop_zoom must be > 0")
        if self.jitter < 0:
            raise ValueError("jitter must be >= 0")
        order = tuple(self.op_order)
        unknown = set(order) - set(DEFAULT_OP_ORDER)
        if unknown:
            raise ValueError(f"unknown ops in op_order: {sorted(unknown)}")
        if len(set(order)) != len(order):
            raise ValueError("op_order contains duplicates")
        object.__setattr__(self, "op_order", order)


@dataclass(frozen=True)
class FocusConfig:
    """Gate thresholds and rejection-loop limits."""

    cutout_iou_min: float = 0.9
    crop_iou_min: float = 0.8
    mask_keep_fraction: float = 0.2
    salient_eps: float = 0.05
    max_retries: int = 100
    mask_both_views: bool = True

    def __post_init__(self):
        for name in ("cutout_iou_min", "crop_iou_min"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0,1], got {v}")
        if not 0.0 < self.mask_keep_fraction < 1.0:
            raise ValueError("mask_keep_fraction must be in (0,1)")
        if self.salient_eps < 0:
            raise ValueError("salient_eps must be >= 0")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")


@dataclass(frozen=True)
class ViewPair:
    """Two augmented views with their co-transformed maps and provenance."""

    v1: np.ndarray
    v2: np.ndarray
    map1: np.ndarray
    map2: np.ndarray
    chain1: tuple
    chain2: tuple
    iou_v1: float
    iou_v2: float
    attempts: int
    mode: str = "default"
    seed: object = None


# ---------------------------------------------------------------------------
# masks

def salient_region(saliency: np.ndarray, eps: float = 0.05) -> np.ndarray:
    """Binary mask of pixels whose attention weight exceeds eps."""
    return np.asarray(saliency) > eps


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two binary masks; 1.0 when both are empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = int(np.logical_or(a, b).sum())
    if union == 0:
        return 1.0
    return int(np.logical_and(a, b).sum()) / union


# ---------------------------------------------------------------------------
# transform chains

def _apply_op(arr, rec, is_map):
    kind = rec[0]
    if kind == "flip":
        return arr[:, ::-1].copy()
    if kind == "rotate":
        return rotate_center(arr, rec[1])
    if kind == "jitter":
        if is_map:
            return arr
        return np.clip(arr * rec[1] + rec[2], 0.0, 1.0)
    if kind == "cutout":
        _, top, left, size = rec
        out = arr.copy()
        out[top : top + size, left : left + size] = 0.0
        return out
    if kind == "resize_crop":
        _, out_h, out_w, top, left = rec
        h, w = arr.shape
        big = resize_bilinear(arr, out_h, out_w)
        return big[top : top + h, left : left + w].copy()
    if kind == "shrink_pad":
        _, small_h, small_w, top, left = rec
        small = resize_bilinear(arr, small_h, small_w)
        out = np.zeros_like(arr)
        out[top : top + small_h, left : left + small_w] = small
        return out
    raise ValueError(f"unknown op record {rec!r}")


def apply_chain(arr: np.ndarray, chain, is_map: bool = False) -> np.ndarray:
    """Replay a recorded transform chain on an array.

    Maps skip intensity jitter (attention is not intensity). Replaying the
    chain recorded in a ViewPair on the source map reproduces the pair's
    map bit-exactly.
    """
    out = np.array(arr, dtype=np.float64)
    for rec in chain:
        out = _apply_op(out, rec, is_map)
    return out


def chain_without(chain, kinds) -> tuple:
    return tuple(rec for rec in chain if rec[0] not in kinds)


def chain_to_json(chain) -> list:
    names = {
        "flip": (),
        "rotate": ("angle_deg",),
        "jitter": ("scale", "offset"),
        "cutout": ("top", "left", "size"),
        "resize_crop": ("out_h", "out_w", "top", "left"),
        "shrink_pad": ("small_h", "small_w", "top", "left"),
    }
    return [
        {"op": rec[0], **dict(zip(names[rec[0]], rec[1:]))}
        for rec in chain
    ]


def chain_from_json(entries) -> tuple:
    order = {
        "flip": (),
        "rotate": ("angle_deg",),
        "jitter": ("scale", "offset"),
        "cutout": ("top", "left", "size"),
        "resize_crop": ("out_h", "out_w", "top", "left"),
        "shrink_pad": ("small_h", "small_w", "top", "left"),
    }
    chain = []
    for entry in entries:
        keys = order[entry["op"]]
        chain.append((entry["op"], *(entry[k] for k in keys)))
    return tuple(chain)


@lru_cache(maxsize=64)
def _index_grid(h, w):
    yy, xx = np.meshgrid(
        np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij"
    )
    yy.setflags(write=False)
    xx.setflags(write=False)
    return yy, xx


def survival_mask(shape, chain) -> np.ndarray:
    """Which source pixels survive a chain's destructive geometry.

    Tracks each source pixel center through the chain's forward geometry;
    a pixel is lost when it leaves the frame under rotation, falls inside a
    cutout footprint, or misses the crop window. Photometric ops never
    destroy pixels. The result lives in source coordinates.
    """
    h, w = shape
    yy, xx = _index_grid(h, w)
    alive = np.ones(shape, dtype=bool)
    for rec in chain:
        kind = rec[0]
        if kind == "flip":
            xx = (w - 1) - xx
        elif kind == "rotate":
            xx, yy = forward_rotate_points(xx, yy, (h, w), rec[1])
            alive &= (xx >= -0.5) & (xx < w - 0.5) & (yy >= -0.5) & (yy < h - 0.5)
        elif kind == "jitter":
            continue
        elif kind == "cutout":
            _, top, left, size = rec
            inside = (
                (yy >= top - 0.5)
                & (yy < top + size - 0.5)
                & (xx >= left - 0.5)
                & (xx < left + size - 0.5)
            )
            alive &= ~inside
        elif kind == "resize_crop":
            _, out_h, out_w, top, left = rec
            yy = (yy + 0.5) * out_h / h - 0.5
            xx = (xx + 0.5) * out_w / w - 0.5
            alive &= (yy >= top - 0.5) & (yy < top + h - 0.5)
            alive &= (xx >= left - 0.5) & (xx < left + w - 0.5)
            yy = yy - top
            xx = xx - left
        elif kind == "shrink_pad":
            _, small_h, small_w, top, left = rec
            yy = (yy + 0.5) * small_h / h - 0.5 + top
            xx = (xx + 0.5) * small_w / w - 0.5 + left
        else:
            raise ValueError(f"unknown op record {rec!r}")
    return alive


# ---------------------------------------------------------------------------
# chain drawing

def _draw_cutout(shape, size, rng):
    h, w = shape
    if size > min(h, w):
        raise ValueError(f"cutout size {size} exceeds image {w}x{h}")
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    return ("cutout", top, left, int(size))


def _draw_crop(shape, zoom, rng):
    h, w = shape
    if zoom == 1.0:
        return None
    # intermediate size truncates: 1.4x of 224 gives 313
    out_h, out_w = max(1, int(zoom * h)), max(1, int(zoom * w))
    if zoom > 1.0:
        top = int(rng.integers(0, out_h - h + 1))
        left = int(rng.integers(0, out_w - w + 1))
        return ("resize_crop", out_h, out_w, top, left)
    top = int(rng.integers(0, h - out_h + 1))
    left = int(rng.integers(0, w - out_w + 1))
    return ("shrink_pad", out_h, out_w, top, left)


def _draw_chain(spec: AugmentSpec, shape, rng) -> tuple:
    """Draw one view's chain. Identity sub-ops are drawn but not recorded,
    keeping the rng stream layout a function of the config alone."""
    chain = []
    for op in spec.op_order:
        if op == "flip":
            if rng.random() < spec.flip_prob:
                chain.append(("flip",))
        elif op == "jitter":
            scale = float(rng.uniform(1.0 - spec.jitter, 1.0 + spec.jitter))
            offset = float(rng.uniform(-spec.jitter, spec.jitter))
            if scale != 1.0 or offset != 0.0:
                chain.append(("jitter", scale, offset))
        elif op == "rotate":
            angle = float(rng.uniform(-spec.rotation_deg, spec.rotation_deg))
            if angle != 0.0:
                chain.append(("rotate", angle))
        elif op == "cutout":
            rec = _draw_cutout(shape, spec.cutout_px, rng)
            if spec.cutout_px > 0:
                chain.append(rec)
        elif op == "crop":
            rec = _draw_crop(shape, spec.crop_zoom, rng)
            if rec is not None:
                chain.append(rec)
    return tuple(chain)


# ---------------------------------------------------------------------------
# single operators (spec surface; each draws its own parameters)

def random_cutout(image, saliency, size_px, rng):
    """Zero a random size x size square in both image and map.

    Returns (image, map, footprint mask). The square always lies fully
    inside the image.
    """
    image = np.asarray(image, dtype=np.float64)
    saliency = np.asarray(saliency, dtype=np.float64)
    rec = _draw_cutout(image.shape, int(size_px), rng)
    footprint = np.zeros(image.shape, dtype=bool)
    if size_px > 0:
        _, top, left, size = rec
        footprint[top : top + size, left : left + size] = True
        return _apply_op(image, rec, False), _apply_op(saliency, rec, True), footprint
    return image.copy(), saliency.copy(), footprint


def random_resized_crop(image, saliency, zoom, rng):
    """Zoom-in: upscale then crop back at a random offset. Zoom-out: shrink
    and zero-pad at a random offset. zoom == 1 is the identity."""
    if zoom <= 0:
        raise ValueError("zoom must be > 0")
    image = np.asarray(image, dtype=np.float64)
    saliency = np.asarray(saliency, dtype=np.float64)
    rec = _draw_crop(image.shape, float(zoom), rng)
    if rec is None:
        return image.copy(), saliency.copy()
    return _apply_op(image, rec, False), _apply_op(saliency, rec, True)


def photometric_and_geometric(image, saliency, spec: AugmentSpec, rng):
    """Apply the flip / jitter / rotation subset of the chain, co-transforming
    the map through the geometric part only."""
    image = np.asarray(image, dtype=np.float64)
    saliency = np.asarray(saliency, dtype=np.float64)
    rigid_spec = dataclasses.replace(
        spec, op_order=tuple(op for op in spec.op_order if op in ("flip", "jitter", "rotate"))
    )
    chain = _draw_chain(rigid_spec, image.shape, rng)
    return apply_chain(image, chain, is_map=False), apply_chain(saliency, chain, is_map=True)


def focus_mask(image, saliency, keep_fraction: float) -> np.ndarray:
    """Zero the image wherever the map falls below its (1-keep) quantile.

    Pixels exactly at the quantile survive, so a constant map keeps the
    whole image.
    """
    if not 0.0 < keep_fraction < 1.0:
        raise ValueError("keep_fraction must be in (0,1)")
    image = np.asarray(image, dtype=np.float64)
    saliency = np.asarray(saliency, dtype=np.float64)
    if image.shape != saliency.shape:
        raise ValueError(f"image {image.shape} vs map {saliency.shape}")
    cut = np.quantile(saliency, 1.0 - keep_fraction)
    out = image.copy()
    out[saliency < cut] = 0.0
    return out


# ---------------------------------------------------------------------------
# gated pair generation

_DESTRUCTIVE = ("cutout",) + _CROP_KINDS


def _split_rigid_prefix(chain):
    """(rigid prefix, destructive suffix) when the chain has that shape,
    else None; lets gate evaluation share the expensive rigid transform."""
    first = next((i for i, rec in enumerate(chain) if rec[0] in _DESTRUCTIVE), len(chain))
    if any(rec[0] not in _DESTRUCTIVE for rec in chain[first:]):
        return None
    return chain[:first], chain[first:]


def _gate_metrics(source_map, chain, eps, gates):
    """Transformed map plus one IOU per requested gate.

    cutout gate: salient region after the full chain vs after the chain
    without cutout. crop gate: fraction of the pre-crop salient region whose
    pixels land inside the crop window.
    """
    split = _split_rigid_prefix(chain)
    if split is None:
        base, suffix = source_map, chain
    else:
        rigid, suffix = split
        base = apply_chain(source_map, rigid, is_map=True)
    map_full = apply_chain(base, suffix, is_map=True)
    metrics = {}
    if "cutout" in gates:
        ref_map = apply_chain(base, chain_without(suffix, ("cutout",)), is_map=True)
        ref = salient_region(ref_map, eps)
        metrics["cutout"] = iou(salient_region(map_full, eps), ref)
    if "crop" in gates:
        ref = salient_region(apply_chain(base, chain_without(suffix, _CROP_KINDS), True), eps)
        crop_rec = next((r for r in chain if r[0] in _CROP_KINDS), None)
        if crop_rec is None:
            metrics["crop"] = 1.0
        else:
            surviving = ref & survival_mask(ref.shape, (crop_rec,))
            metrics["crop"] = iou(surviving, ref)
    return map_full, metrics


def _gated_pair(images, source_map, spec, cfg, rng, gates, mode, seed):
    """Rejection loop shared by the gated generators.

    `images` holds the per-view source images (they differ when focus_mask
    is applied to one view only).
    """
    shape = source_map.shape
    limits = {g: (cfg.cutout_iou_min if g == "cutout" else cfg.crop_iou_min) for g in gates}
    best = (-1.0, -1.0, -1.0)
    threshold = min(limits.values())
    for attempt in range(1, cfg.max_retries + 1):
        chain1 = _draw_chain(spec, shape, rng)
        chain2 = _draw_chain(spec, shape, rng)
        map1, metrics1 = _gate_metrics(source_map, chain1, cfg.salient_eps, gates)
        map2, metrics2 = _gate_metrics(source_map, chain2, cfg.salient_eps, gates)
        iou1 = min(metrics1.values())
        iou2 = min(metrics2.values())
        if min(iou1, iou2) > best[0]:
            best = (min(iou1, iou2), iou1, iou2)
        ok1 = all(metrics1[g] > limits[g] for g in gates)
        ok2 = all(metrics2[g] > limits[g] for g in gates)
        if ok1 and ok2:
            return ViewPair(
                v1=apply_chain(images[0], chain1, is_map=False),
                v2=apply_chain(images[1], chain2, is_map=False),
                map1=map1,
                map2=map2,
                chain1=chain1,
                chain2=chain2,
                iou_v1=iou1,
                iou_v2=iou2,
                attempts=attempt,
                mode=mode,
                seed=seed,
            )
    raise RejectionFailure(cfg.max_retries, best[1], best[2], threshold)


def _check_pair_inputs(image, saliency):
    image = np.asarray(image, dtype=np.float64)
    saliency = np.asarray(saliency, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError("image must be 2-D")
    if image.shape != saliency.shape:
        raise ValueError(f"image {image.shape} vs map {saliency.shape}")
    return image, saliency


def focus_cutout_pair(image, saliency, spec, cfg, rng, seed=None) -> ViewPair:
    """Draw view pairs until the cutout removes almost none of the salient
    region in both views (IOU > cfg.cutout_iou_min)."""
    image, saliency = _check_pair_inputs(image, saliency)
    return _gated_pair((image, image), saliency, spec, cfg, rng, ("cutout",), "focus_cutout", seed)


def focus_crop_pair(image, saliency, spec, cfg, rng, seed=None) -> ViewPair:
    """Draw view pairs until the crop window retains enough of the salient
    region in both views (IOU > cfg.crop_iou_min)."""
    image, saliency = _check_pair_inputs(image, saliency)
    return _gated_pair((image, image), saliency, spec, cfg, rng, ("crop",), "focus_crop", seed)


def generate_pair(image, saliency, mode, spec, cfg, rng, seed=None, compute_ious=None) -> ViewPair:
    """Produce one positive pair in the requested mode.

    default: the ungated chain, twice. searched: ungated with the
    exhaustively-searched strength optima (crop 1.2x, cutout 48 px at the
    224 px reference scale). focus: focus_mask on the source image, then
    the chain with both the cutout and crop gates active.

    With a uniform (all-ones) map, focus mode gates against the full image
    region: any cutout or zoom-in crop then loses area unconditionally, so
    strict thresholds can make acceptance impossible; that is the documented
    degenerate behavior, surfaced as RejectionFailure.

    compute_ious: for the ungated modes, sidecar IOUs are computed only on
    request (None means "only when gating"); gated modes always carry them.
    """
    image, saliency = _check_pair_inputs(image, saliency)
    if mode not in MODES:
        raise ValueError(f"unknown mode '{mode}'; expected one of {MODES}")
    if mode == "focus":
        masked = focus_mask(image, saliency, cfg.mask_keep_fraction)
        sources = (masked, masked) if cfg.mask_both_views else (masked, image)
        return _gated_pair(sources, saliency, spec, cfg, rng, ("cutout", "crop"), mode, seed)

    if mode == "searched":
        spec = dataclasses.replace(spec, cutout_px=SEARCHED_CUTOUT_PX, crop_zoom=SEARCHED_CROP_ZOOM)
    shape = saliency.shape
    chain1 = _draw_chain(spec, shape, rng)
    chain2 = _draw_chain(spec, shape, rng)
    iou1 = iou2 = None
    if compute_ious:
        _, metrics1 = _gate_metrics(saliency, chain1, cfg.salient_eps, ("cutout", "crop"))
        _, metrics2 = _gate_metrics(saliency, chain2, cfg.salient_eps, ("cutout", "crop"))
        iou1, iou2 = min(metrics1.values()), min(metrics2.values())
    return ViewPair(
        v1=apply_chain(image, chain1, is_map=False),
        v2=apply_chain(image, chain2, is_map=False),
        map1=apply_chain(saliency, chain1, is_map=True),
        map2=apply_chain(saliency, chain2, is_map=True),
        chain1=chain1,
        chain2=chain2,
        iou_v1=iou1,
        iou_v2=iou2,
        attempts=1,
        mode=mode,
        seed=seed,
    )
