"""View-quality metrics and the augmentation-strength sweep.

The overlap score is the pixel-set proxy for shared information between
two views: the fraction of the source salient region that survives the
destructive geometry of *both* views. The sweep orchestrates pretrain +
probe per strength value and emits one CSV row per (value, label fraction).
"""

import csv
import dataclasses
from dataclasses import dataclass

import numpy as np

from .augment import AugmentSpec, FocusConfig, ViewPair, salient_region, survival_mask
from .augment import generate_pair
from .errors import GazeAugError, RejectionFailure
from .rng import derive_rng
from .train import TrainConfig, linear_probe, pretrain

SWEEP_AXES = ("crop_zoom", "cutout_px")
CSV_FIELDS = (
    "axis", "value", "label_fraction", "acc", "mae",
    "overlap_mean", "reject_rate", "attempts_mean", "status",
)


@dataclass(frozen=True)
class SweepGrid:
    axis: str
    values: tuple
    spec: AugmentSpec = AugmentSpec()
    label_fractions: tuple = (1.0,)
    mode: str = "default"
    overlap_pairs: int = 10_000

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"sweep axis must be one of {SWEEP_AXES}")
        values = tuple(self.values)
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "label_fractions", tuple(self.label_fractions))


@dataclass
class SweepResult:
    rows: list

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: row[k] for k in CSV_FIELDS})


def overlap_score(pair: ViewPair, source_map: np.ndarray, eps: float = 0.05) -> float:
    """Fraction of source salient pixels surviving in both views; 1.0 when
    the source region is empty."""
    source_map = np.asarray(source_map, dtype=np.float64)
    if source_map.shape != pair.map1.shape:
        raise ValueError(f"map {source_map.shape} vs views {pair.map1.shape}")
    region = salient_region(source_map, eps)
    total = int(region.sum())
    if total == 0:
        return 1.0
    alive = region & survival_mask(source_map.shape, pair.chain1)
    alive &= survival_mask(source_map.shape, pair.chain2)
    return int(alive.sum()) / total


def lesion_preservation(pair: ViewPair, lesion_mask: np.ndarray) -> float:
    """Worst-case surviving lesion fraction over the two views; 1.0 for an
    empty lesion."""
    lesion = np.asarray(lesion_mask, dtype=bool)
    if lesion.shape != pair.map1.shape:
        raise ValueError(f"lesion mask {lesion.shape} vs views {pair.map1.shape}")
    total = int(lesion.sum())
    if total == 0:
        return 1.0
    fracs = []
    for chain in (pair.chain1, pair.chain2):
        alive = lesion & survival_mask(lesion.shape, chain)
        fracs.append(int(alive.sum()) / total)
    return min(fracs)


def _overlap_monte_carlo(samples, spec, focus, mode, n_pairs, seed):
    """Mean/SEM of the overlap score and rejection stats over n_pairs draws,
    cycling through the dataset."""
    scores = []
    attempts = []
    rejected = 0
    for k in range(n_pairs):
        sample = samples[k % len(samples)]
        rng = derive_rng(seed, "overlap-mc", k)
        try:
            pair = generate_pair(sample.image, sample.saliency, mode, spec, focus, rng)
        except RejectionFailure:
            rejected += 1
            continue
        scores.append(overlap_score(pair, sample.saliency, focus.salient_eps))
        attempts.append(pair.attempts)
    mean = float(np.mean(scores)) if scores else float("nan")
    sem = float(np.std(scores) / np.sqrt(len(scores))) if scores else float("nan")
    return {
        "overlap_mean": mean,
        "overlap_sem": sem,
        "reject_rate": rejected / n_pairs,
        "attempts_mean": float(np.mean(attempts)) if attempts else 0.0,
    }


def run_sweep(grid: SweepGrid, train_cfg: TrainConfig, train_samples,
              test_samples, focus: FocusConfig = None, seed: int = 0,
              workers: int = 1) -> SweepResult:
    """Pretrain + probe at every strength value on the grid.

    Each cell derives its own seeds, so cells can be recomputed or
    parallelized without changing results. A cell whose pretraining aborts
    is marked failed and the sweep continues.
    """
    focus = focus or FocusConfig()
    rows = []
    for vi, value in enumerate(grid.values):
        spec = dataclasses.replace(grid.spec, **{grid.axis: value})
        cell_seed = derive_rng(seed, "sweep-cell", grid.axis, vi).integers(0, 2**63 - 1)
        cfg = dataclasses.replace(train_cfg, seed=int(cell_seed))
        stats = _overlap_monte_carlo(
            train_samples, spec, focus, grid.mode, grid.overlap_pairs, int(cell_seed)
        )
        try:
            result = pretrain(cfg, train_samples, grid.mode, spec=spec, focus=focus,
                              workers=workers)
            status = "ok"
        except GazeAugError as exc:
            result = None
            status = f"failed: {exc}"
        for fraction in grid.label_fractions:
            row = {
                "axis": grid.axis,
                "value": value,
                "label_fraction": fraction,
                "acc": float("nan"),
                "mae": float("nan"),
                "status": status,
                **{k: stats[k] for k in ("overlap_mean", "reject_rate", "attempts_mean")},
                "overlap_sem": stats["overlap_sem"],
            }
            if result is not None:
                probe = linear_probe(result.state, train_samples, test_samples,
                                     label_fraction=fraction, seed=int(cell_seed))
                row["acc"] = probe.accuracy
                row["mae"] = probe.mae
            rows.append(row)
    return SweepResult(rows=rows)
