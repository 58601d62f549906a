"""Gated versus random augmentation on a planted lesion.

Generates pairs from one synthetic sample in three modes and reports how
often the lesion survives both views, plus the rejection-loop cost of the
gates. The gated pairs never lose more than a sliver of the lesion; strong
random augmentation destroys it outright in a large fraction of pairs.
"""

import numpy as np

from gazeaug import (
    AugmentSpec,
    FocusConfig,
    RejectionFailure,
    SynthSpec,
    derive_rng,
    gen_sample,
    generate_pair,
    lesion_preservation,
    overlap_score,
)

sample = gen_sample(SynthSpec(image_px=64), grade=3, rng=derive_rng(1, "demo-aug"))
print(f"sample: {int(sample.lesion_mask.sum())} lesion px "
      f"({sample.lesion_mask.mean():.3%} of the image)\n")

configs = {
    "focus (gated)": ("focus", AugmentSpec(cutout_px=9, crop_zoom=1.2)),
    "default": ("default", AugmentSpec(cutout_px=9, crop_zoom=1.2)),
    "default strong": ("default", AugmentSpec(cutout_px=37, crop_zoom=2.0)),
}
cfg = FocusConfig()

header = f"{'mode':16s} {'pairs':>6s} {'rej':>5s} {'attempts':>8s} {'overlap':>8s} {'lesion kept':>11s} {'full loss':>9s}"
print(header)
for name, (mode, spec) in configs.items():
    kept, overlaps, attempts, rejected, full_loss = [], [], [], 0, 0
    for k in range(500):
        try:
            pair = generate_pair(sample.image, sample.saliency, mode, spec, cfg,
                                 derive_rng(2, "demo-aug", name, k))
        except RejectionFailure:
            rejected += 1
            continue
        attempts.append(pair.attempts)
        overlaps.append(overlap_score(pair, sample.saliency))
        rate = lesion_preservation(pair, sample.lesion_mask)
        kept.append(rate)
        full_loss += rate == 0.0
    print(f"{name:16s} {len(kept):6d} {rejected:5d} {np.mean(attempts):8.2f} "
          f"{np.mean(overlaps):8.3f} {np.mean(kept):11.3f} {full_loss / 500:9.1%}")

print("\nthe gate trades a few retries for a guarantee: every accepted view of")
print("the gated mode keeps the great majority of the lesion pixels.")
