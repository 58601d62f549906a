"""Feeding gated pairs to an external training loop via the bindings.

Requires the companion package from bindings/ (`pip install -e bindings/`).
The session yields float32 batches that decode to exactly the same pixels
as the `gazeaug augment` CLI for the same seed, so a framework data loader
and the file pipeline can be mixed freely.
"""

import tempfile
from pathlib import Path

from gazeaug import SynthSpec, dump_dataset, gen_dataset

try:
    from gazeaug_pairs import next_pairs, open_session
except ImportError:
    raise SystemExit("install the bindings first: pip install -e bindings/ --no-build-isolation")

with tempfile.TemporaryDirectory() as tmp:
    data = Path(tmp) / "data"
    dump_dataset(gen_dataset(SynthSpec(image_px=64), 4, seed=5), data)

    session = open_session({
        "seed": 7,
        "mode": "focus",
        "workers": 2,
        "paths": {"data_root": str(data)},
        "augment": {"cutout_px": 9, "crop_zoom": 1.2},
    })
    print(f"session over {len(session)} images")

    for step in range(3):
        v1, v2, meta = next_pairs(session, batch_size=8)
        ious = [round(m["iou_v1"], 3) for m in meta]
        print(f"step {step}: v1 {v1.shape} {v1.dtype}, "
              f"attempts {[m['attempts'] for m in meta]}, iou_v1 {ious}")
    print("every pair passed the gates; plug v1/v2 into any Siamese loss.")
