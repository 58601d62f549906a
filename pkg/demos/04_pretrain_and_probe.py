"""End-to-end: synthesize, pretrain contrastively, linear-probe.

A compact version of the headline experiment: the same encoder trained on
gated (focus) pairs versus strength-matched strong random pairs, evaluated
by a frozen-encoder linear probe. Takes a few minutes on a laptop CPU.
"""

import time

from gazeaug import AugmentSpec, FocusConfig, SynthSpec, gen_dataset
from gazeaug.train import TrainConfig, linear_probe, pretrain

train = gen_dataset(SynthSpec(image_px=64), 60, seed=11)   # 300 images
test = gen_dataset(SynthSpec(image_px=64), 20, seed=999)   # 100 images
print(f"dataset: {len(train)} train / {len(test)} test, 5 severity grades\n")

for label, mode, spec in (
    ("focus (gated)", "focus", AugmentSpec(cutout_px=9, crop_zoom=1.2)),
    ("default strong", "default", AugmentSpec(cutout_px=37, crop_zoom=2.0)),
):
    cfg = TrainConfig(mode="infonce", epochs=15, batch_size=64, base_lr=0.1,
                      warmup_epochs=3, seed=1)
    start = time.time()
    result = pretrain(cfg, train, mode, spec=spec, focus=FocusConfig())
    losses = [row["loss"] for row in result.log]
    probe = linear_probe(result.state, train, test, label_fraction=1.0, seed=1)
    print(f"{label:15s}: loss {losses[0]:.2f} -> {losses[-1]:.2f}, "
          f"probe ACC {probe.accuracy:.3f}, MAE {probe.mae:.3f} "
          f"({time.time() - start:.0f}s)")

print("\ngated augmentation preserves the grade-bearing pixels, so the frozen")
print("features stay linearly decodable; strong random augmentation feeds the")
print("loss positives that share nothing and the representation collapses.")
