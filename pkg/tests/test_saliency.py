import threading

import numpy as np
import pytest

from gazeaug import ConfigError, SaliencySource, derive_rng, saliency_for, spectral_residual, write_smap
from gazeaug.formats import read_smap


def direct_dft2(img):
    """Brute-force DFT straight from the definition (O(N^2) per output bin)."""
    h, w = img.shape
    out = np.zeros((h, w), dtype=complex)
    ys, xs = np.arange(h), np.arange(w)
    for u in range(h):
        for v in range(w):
            phase = np.exp(-2j * np.pi * (u * ys[:, None] / h + v * xs[None, :] / w))
            out[u, v] = (img * phase).sum()
    return out


def direct_idft2(spec):
    h, w = spec.shape
    out = np.zeros((h, w), dtype=complex)
    us, vs = np.arange(h), np.arange(w)
    for y in range(h):
        for x in range(w):
            phase = np.exp(2j * np.pi * (us[:, None] * y / h + vs[None, :] * x / w))
            out[y, x] = (spec * phase).sum()
    return out / (h * w)


def smooth_random_image(seed, size=64):
    from scipy import ndimage
    rng = derive_rng(seed, "sr-image")
    return ndimage.gaussian_filter(rng.random((size, size)), 2.0, mode="reflect")


class TestSpectralResidual:
    def test_constant_image_near_zero(self):
        m = spectral_residual(np.full((64, 64), 0.5))
        assert m.max() < 0.05

    def test_impulse_argmax_at_pixel(self):
        img = np.zeros((64, 64))
        img[10, 20] = 1.0
        m = spectral_residual(img)
        assert np.unravel_index(m.argmax(), m.shape) == (10, 20)

    def test_matches_direct_dft_oracle(self):
        for seed in range(3):
            img = derive_rng(seed, "sr-oracle").random((16, 16))
            fast = spectral_residual(img)
            slow = spectral_residual(img, fft2=direct_dft2, ifft2=direct_idft2)
            assert np.allclose(fast, slow, rtol=1e-6, atol=1e-9)

    def test_affine_intensity_invariance_of_argmax(self):
        img = smooth_random_image(5)
        base = np.unravel_index(spectral_residual(img).argmax(), img.shape)
        for a, b in ((0.5, 0.0), (2.0, 0.1), (0.25, 0.3)):
            m = spectral_residual(np.clip(a * img + b, 0.0, 4.0))
            assert np.unravel_index(m.argmax(), img.shape) == base

    def test_values_in_unit_range(self):
        m = spectral_residual(smooth_random_image(6))
        assert m.min() >= 0.0 and m.max() <= 1.0
        assert m.max() == pytest.approx(1.0)

    def test_output_matches_input_size(self):
        img = smooth_random_image(7, size=150)
        assert spectral_residual(img).shape == (150, 150)

    def test_too_small_rejected(self):
        with pytest.raises(ValueError, match="too small"):
            spectral_residual(np.zeros((7, 9)))


class TestProviders:
    def test_uniform(self):
        img = np.zeros((224, 224))
        m = saliency_for(SaliencySource(kind="uniform"), "any", img)
        assert m.shape == img.shape
        assert (m == 1.0).all()

    def test_gaze_file_round_trip(self, tmp_path):
        stored = derive_rng(1, "prov").random((32, 32))
        write_smap(tmp_path / "imgA.smap", stored)
        src = SaliencySource(kind="gaze_file", root=tmp_path)
        m = saliency_for(src, "imgA", np.zeros((32, 32)))
        assert np.array_equal(m, read_smap(tmp_path / "imgA.smap"))

    def test_missing_file(self, tmp_path):
        src = SaliencySource(kind="gaze_file", root=tmp_path)
        with pytest.raises(FileNotFoundError, match="imgB"):
            saliency_for(src, "imgB", np.zeros((16, 16)))

    def test_dimension_mismatch(self, tmp_path):
        write_smap(tmp_path / "imgC.smap", np.ones((8, 8)))
        src = SaliencySource(kind="gaze_file", root=tmp_path)
        with pytest.raises(ValueError, match="imgC"):
            saliency_for(src, "imgC", np.zeros((16, 16)))

    def test_missing_root_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="root"):
            SaliencySource(kind="gaze_file", root=tmp_path / "nope")
        with pytest.raises(ConfigError, match="root"):
            SaliencySource(kind="gaze_file")

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError, match="kind"):
            SaliencySource(kind="magic")

    def test_spectral_residual_provider_on_constant(self):
        img = np.full((64, 64), 0.25)
        m = saliency_for(SaliencySource(kind="spectral_residual"), "x", img)
        assert m.max() < 0.05

    def test_concurrent_file_reads_consistent(self, tmp_path):
        stored = derive_rng(2, "conc").random((24, 24))
        write_smap(tmp_path / "imgD.smap", stored)
        src = SaliencySource(kind="gaze_file", root=tmp_path)
        img = np.zeros((24, 24))
        results = [None] * 8
        def worker(i):
            results[i] = saliency_for(src, "imgD", img)
        threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        for r in results[1:]:
            assert np.array_equal(r, results[0])
