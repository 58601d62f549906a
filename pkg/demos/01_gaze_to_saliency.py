"""From raw gaze samples to a dense saliency map.

Simulates a short reading session (a 90 Hz tracker dwelling on two image
regions with a few off-screen samples), parses and filters the log, renders
the Gaussian attention map, and writes both the .smap file and a PGM
preview next to this script's output directory.
"""

from pathlib import Path

from gazeaug import (
    derive_rng,
    filter_gaze,
    parse_gaze_log,
    render_gaze_map,
    write_pgm,
    write_smap,
)
from gazeaug.gaze import KernelSpec

out_dir = Path(__file__).resolve().parent / "output"
out_dir.mkdir(exist_ok=True)

rng = derive_rng(0, "demo-gaze")
lines = ["# simulated 90 Hz session, image 'knee_042'"]
t = 0.0
for cx, cy, n in ((0.42, 0.55, 120), (0.61, 0.48, 80)):
    for _ in range(n):
        x = cx + rng.normal(0, 0.015)
        y = cy + rng.normal(0, 0.015)
        lines.append(f"knee_042,{x:.5f},{y:.5f},{t:.1f}")
        t += 1000.0 / 90.0
# the reader glances at the GUI (off-image coordinates, dropped by the filter)
for _ in range(15):
    lines.append(f"knee_042,{1.2 + rng.random() * 0.1:.5f},{0.9:.5f},{t:.1f}")
    t += 1000.0 / 90.0

log = parse_gaze_log("\n".join(lines))
print(f"parsed {len(log)} samples for image '{log.image_id}'")

kept = filter_gaze(log)
print(f"filter kept {len(kept)} in-bounds samples ({len(log) - len(kept)} dropped)")

saliency = render_gaze_map(kept, 224, 224, KernelSpec(size_px=99))
print(f"rendered 224x224 map: max={saliency.max():.3f}, "
      f"salient fraction (>0.05) = {(saliency > 0.05).mean():.3f}")

write_smap(out_dir / "knee_042.smap", saliency)
write_pgm(out_dir / "knee_042_saliency.pgm", saliency)
print(f"wrote {out_dir / 'knee_042.smap'} and a PGM preview")
