"""Classical frequency-domain saliency on synthetic images.

Shows the spectral-residual baseline doing what it should (nothing on a
flat image, a sharp response on an isolated anomaly) and where it falls
short of expert attention: on a textured radiograph the interior response
does sit on the planted lesion, but the DFT's periodic extension also
fires along the frame border, and that artifact can take the global max.
General-purpose saliency being a shaky stand-in for reader gaze is exactly
why precomputed gaze maps are the preferred provider.
"""

from pathlib import Path

import numpy as np

from gazeaug import SynthSpec, derive_rng, gen_sample, spectral_residual, write_pgm

out_dir = Path(__file__).resolve().parent / "output"
out_dir.mkdir(exist_ok=True)

flat = np.full((64, 64), 0.5)
print(f"flat image      -> max response {spectral_residual(flat).max():.4f} (degenerate, near zero)")

impulse = np.zeros((64, 64))
impulse[40, 22] = 1.0
m = spectral_residual(impulse)
print(f"bright pixel    -> argmax at {np.unravel_index(m.argmax(), m.shape)} (planted at (40, 22))")

sample = gen_sample(SynthSpec(image_px=224), grade=4, rng=derive_rng(3, "demo-sr"))
m = spectral_residual(sample.image)
border = np.zeros_like(m, dtype=bool)
border[:8] = border[-8:] = True
border[:, :8] = border[:, -8:] = True
interior = np.where(border, -1.0, m)
peak = np.unravel_index(interior.argmax(), m.shape)
print(f"synthetic knee  -> interior argmax {peak}, inside lesion: "
      f"{bool(sample.lesion_mask[peak])}; border artifact max {m[border].max():.2f} "
      "(DFT wraparound)")

write_pgm(out_dir / "sr_input.pgm", sample.image)
write_pgm(out_dir / "sr_response.pgm", m)
print(f"wrote {out_dir / 'sr_input.pgm'} and {out_dir / 'sr_response.pgm'}")
