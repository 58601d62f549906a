"""Batch iterator over saliency-gated view pairs.

A thin, framework-agnostic layer over the gazeaug engine so external
training loops can pull gated positive pairs as float32 arrays. The engine
itself is never re-implemented here: a session is just the engine's public
API plus the same strict config document and the same per-(seed, image_id,
pair index) stream derivation the CLI `augment` command uses, which is what
makes the two interfaces produce identical pixels.

    session = open_session({"seed": 7, "paths": {"data_root": "data/"}})
    v1, v2, meta = next_pairs(session, batch_size=64)
"""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

import gazeaug
from gazeaug import ConfigError, RejectionFailure, read_pgm, read_smap, saliency_for
from gazeaug.augment import chain_to_json, generate_pair
from gazeaug.config import RunConfig, config_from_dict, load_config
from gazeaug.rng import derive_rng
from gazeaug.saliency import SaliencySource

__version__ = gazeaug.__version__

__all__ = ["PairBatchHandle", "PairGenerationError", "next_pairs", "open_session",
           "saliency_for", "__version__"]


class PairGenerationError(RuntimeError):
    """A gated pair could not be produced; carries per-item diagnostics."""

    def __init__(self, image_id, pair_index, cause: RejectionFailure):
        self.image_id = image_id
        self.pair_index = pair_index
        self.cause = cause
        super().__init__(
            f"image '{image_id}', pair {pair_index}: {cause}"
        )


class PairBatchHandle:
    """One engine session: dataset, saliency source, configs, root seed.

    Confine a handle to a single caller thread; open several handles for
    concurrent consumers. Batches are deterministic in (config, seed) and
    independent of the worker count.
    """

    def __init__(self, config: RunConfig):
        if config.paths.data_root is None:
            raise ConfigError("paths.data_root is required to open a session")
        root = Path(config.paths.data_root)
        if not root.is_dir():
            raise ConfigError(f"data_root does not exist: {root}")
        image_paths = sorted(root.glob("*.pgm"))
        if not image_paths:
            raise ConfigError(f"no .pgm images under data_root: {root}")

        self.config = config
        self._items = []
        source = None
        for path in image_paths:
            image = read_pgm(path)
            smap_path = path.with_suffix(".smap")
            if smap_path.is_file():
                saliency = read_smap(smap_path)
                if saliency.shape != image.shape:
                    raise ConfigError(
                        f"saliency {saliency.shape} does not match image "
                        f"{image.shape} for '{path.stem}'"
                    )
            else:
                if source is None:
                    opts = config.saliency
                    source = SaliencySource(kind=opts.kind,
                                            root=config.paths.saliency_root,
                                            working_px=opts.working_px,
                                            smooth_sigma=opts.smooth_sigma)
                saliency = saliency_for(source, path.stem, image)
            self._items.append((path.stem, image, saliency))
        self._cursor = 0
        self._pair_counters = {image_id: 0 for image_id, _, _ in self._items}

    def __len__(self):
        return len(self._items)


def open_session(config_document) -> PairBatchHandle:
    """Validate a config document (dict or JSON file path) and open a session.

    The schema is the CLI's RunConfig; unknown keys raise ConfigError naming
    the key, mirroring the CLI's exit-code-2 diagnostics.
    """
    if isinstance(config_document, (str, Path)):
        config = load_config(config_document)
    elif isinstance(config_document, RunConfig):
        config = config_document
    else:
        config = config_from_dict(config_document)
    return PairBatchHandle(config)


def _make_pair(handle, image_id, image, saliency, pair_index):
    config = handle.config
    rng = derive_rng(config.seed, image_id, pair_index)
    try:
        pair = generate_pair(image, saliency, config.mode, config.augment,
                             config.focus, rng, seed=config.seed, compute_ious=True)
    except RejectionFailure as exc:
        raise PairGenerationError(image_id, pair_index, exc) from exc
    meta = {
        "image_id": image_id,
        "seed": config.seed,
        "pair_index": pair_index,
        "mode": pair.mode,
        "attempts": pair.attempts,
        "iou_v1": pair.iou_v1,
        "iou_v2": pair.iou_v2,
        "transform_chain": {
            "v1": chain_to_json(pair.chain1),
            "v2": chain_to_json(pair.chain2),
        },
    }
    # quantize to the 16-bit interchange depth so the arrays decode to
    # exactly the CLI's PGM pixels for the same derived seeds
    v1 = np.round(pair.v1 * 65535.0) / 65535.0
    v2 = np.round(pair.v2 * 65535.0) / 65535.0
    return v1, v2, meta


def next_pairs(handle: PairBatchHandle, batch_size: int):
    """Produce the next batch of gated pairs.

    Returns (v1, v2, metadata): two C-contiguous float32 arrays of shape
    (batch, height, width) in [0, 1] and a list of sidecar-equivalent
    metadata dicts. Images cycle in sorted-id order; each image keeps its
    own pair counter, so pixel output is bit-identical to the CLI
    `augment` command at the same (seed, image_id, pair index).
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    jobs = []
    for _ in range(batch_size):
        image_id, image, saliency = handle._items[handle._cursor]
        handle._cursor = (handle._cursor + 1) % len(handle._items)
        k = handle._pair_counters[image_id]
        handle._pair_counters[image_id] = k + 1
        jobs.append((image_id, image, saliency, k))

    if handle.config.workers > 1:
        with ThreadPoolExecutor(max_workers=handle.config.workers) as pool:
            results = list(pool.map(lambda j: _make_pair(handle, *j), jobs))
    else:
        results = [_make_pair(handle, *j) for j in jobs]

    v1 = np.ascontiguousarray(np.stack([r[0] for r in results]), dtype=np.float32)
    v2 = np.ascontiguousarray(np.stack([r[1] for r in results]), dtype=np.float32)
    return v1, v2, [r[2] for r in results]
