import numpy as np
import pytest

from gazeaug import (
    GazeLog,
    GazePoint,
    KernelSpec,
    ParseError,
    derive_rng,
    filter_gaze,
    parse_gaze_log,
    parse_gaze_logs,
    render_gaze_map,
)


def make_log(points, image_id="img"):
    return GazeLog(image_id, tuple(GazePoint(x, y, t) for x, y, t in points))


class TestParse:
    def test_three_rows(self):
        log = parse_gaze_log(b"img1,0.5,0.5,0\nimg1,0.6,0.5,11\nimg1,0.7,0.5,22\n")
        assert log.image_id == "img1"
        assert len(log) == 3
        assert log.points[0] == GazePoint(0.5, 0.5, 0.0)
        assert log.points[2] == GazePoint(0.7, 0.5, 22.0)

    def test_empty_file(self):
        with pytest.raises(ParseError, match="no samples"):
            parse_gaze_log(b"")

    def test_comments_and_blanks_only(self):
        with pytest.raises(ParseError, match="no samples"):
            parse_gaze_log(b"# header\n\n# more\n")

    def test_decreasing_timestamp(self):
        with pytest.raises(ParseError, match="line 3.*decreases"):
            parse_gaze_log(b"a,0.1,0.1,5\na,0.2,0.2,6\na,0.3,0.3,2\n")

    def test_malformed_line_names_line_number(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_gaze_log(b"a,0.1,0.1,0\na,0.2,oops,1\n")

    def test_wrong_field_count(self):
        with pytest.raises(ParseError, match="line 1.*4"):
            parse_gaze_log(b"a,0.1,0.1\n")

    def test_negative_timestamp(self):
        with pytest.raises(ParseError, match="negative timestamp"):
            parse_gaze_log(b"a,0.1,0.1,-3\n")

    def test_out_of_range_points_kept_by_parser(self):
        log = parse_gaze_log(b"a,1.5,0.5,0\na,-0.2,0.5,1\n")
        assert len(log) == 2

    def test_multi_image_grouping(self):
        logs = parse_gaze_logs(b"a,0.1,0.1,0\nb,0.2,0.2,0\na,0.3,0.3,5\n")
        assert [log.image_id for log in logs] == ["a", "b"]
        assert len(logs[0]) == 2 and len(logs[1]) == 1

    def test_single_log_from_multi_image_file_needs_id(self):
        data = b"a,0.1,0.1,0\nb,0.2,0.2,0\n"
        with pytest.raises(ParseError, match="2 sessions"):
            parse_gaze_log(data)
        assert parse_gaze_log(data, image_id="b").image_id == "b"

    def test_timestamps_independent_across_images(self):
        logs = parse_gaze_logs(b"a,0.1,0.1,50\nb,0.2,0.2,0\na,0.1,0.1,60\n")
        assert len(logs) == 2


class TestFilter:
    def test_bounds_check(self):
        log = make_log([(0.5, 0.5, 0), (1.3, 0.5, 1), (-0.1, 0.2, 2)])
        kept = filter_gaze(log)
        assert len(kept) == 1
        assert kept.points[0].x == 0.5

    def test_identity_when_all_in_bounds(self):
        log = make_log([(0.1, 0.9, 0), (1.0, 0.0, 1)])
        assert filter_gaze(log).points == log.points

    def test_all_filtered_out(self):
        log = make_log([(1.5, 0.5, 0), (-2.0, 0.5, 1)])
        with pytest.raises(ParseError, match="empty after filtering"):
            filter_gaze(log)

    def test_known_fraction_retained(self):
        # 1000 points, 40% pushed out of bounds by construction
        rng = derive_rng(42, "filter-fraction")
        points = []
        out_flags = rng.random(1000) < 0.4
        for i, out in enumerate(out_flags):
            x, y = rng.uniform(0.05, 0.95, size=2)
            if out:
                x = x + 1.5 if rng.random() < 0.5 else -0.5 - x
            points.append((float(x), float(y), float(i)))
        kept = filter_gaze(make_log(points))
        assert len(kept) == int((~out_flags).sum())

    def test_idempotent(self):
        rng = derive_rng(7, "filter-idem")
        for trial in range(20):
            pts = [(float(x), float(y), float(i)) for i, (x, y) in
                   enumerate(rng.uniform(-0.5, 1.5, size=(50, 2)))]
            if not any(0 <= x <= 1 and 0 <= y <= 1 for x, y, _ in pts):
                continue
            once = filter_gaze(make_log(pts))
            twice = filter_gaze(once)
            assert twice.points == once.points


class TestKernelSpec:
    def test_default_size_99_sigma(self):
        k = KernelSpec()
        assert k.size_px == 99
        assert k.sigma_px == pytest.approx(99 / 6)

    def test_even_size_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            KernelSpec(size_px=98)

    def test_bad_sigma_rejected(self):
        with pytest.raises(ValueError, match="sigma"):
            KernelSpec(size_px=9, sigma_px=-1.0)


class TestRender:
    def test_single_center_point(self):
        log = make_log([(0.5, 0.5, 0)])
        m = render_gaze_map(log, 224, 224)
        assert m.shape == (224, 224)
        assert np.unravel_index(m.argmax(), m.shape) == (112, 112)
        assert m[112, 112] == 1.0

    def test_duplicate_points_same_map(self):
        one = render_gaze_map(make_log([(0.5, 0.5, 0)]), 128, 128)
        two = render_gaze_map(make_log([(0.5, 0.5, 0), (0.5, 0.5, 1)]), 128, 128)
        assert np.array_equal(one, two)

    def test_distant_points_disjoint_bumps(self):
        # 300 px apart on 400x400; the truncated kernel (radius 49) cannot
        # reach the midpoint, 150 px from either impulse
        log = make_log([(50 / 400, 0.5, 0), (350 / 400, 0.5, 1)])
        m = render_gaze_map(log, 400, 400, KernelSpec(size_px=99))
        assert m[200, 200] == 0.0
        assert m[200, 200] < 0.01

    def test_translation_equivariance_exact(self):
        k = KernelSpec(size_px=21)
        w = h = 128
        base_pixels = [(40, 44), (60, 70), (55, 52)]
        dx, dy = 9, 13
        def render(pixels):
            pts = [(px / w, py / h, float(i)) for i, (px, py) in enumerate(pixels)]
            return render_gaze_map(make_log(pts), w, h, k)
        m1 = render(base_pixels)
        m2 = render([(px + dx, py + dy) for px, py in base_pixels])
        shifted = np.zeros_like(m1)
        shifted[dy:, dx:] = m1[:-dy, :-dx]
        assert np.array_equal(m2, shifted)

    def test_kernel_support_honored(self):
        # default 99 kernel: nonzero exactly within Chebyshev radius 49
        m = render_gaze_map(make_log([(0.5, 0.5, 0)]), 224, 224)
        yy, xx = np.meshgrid(np.arange(224), np.arange(224), indexing="ij")
        cheb = np.maximum(np.abs(yy - 112), np.abs(xx - 112))
        assert (m[cheb <= 49] > 0).all()
        assert (m[cheb > 49] == 0).all()

    def test_max_normalization(self):
        rng = derive_rng(3, "render-norm")
        for trial in range(5):
            pts = [(float(x), float(y), float(i)) for i, (x, y) in
                   enumerate(rng.uniform(0.2, 0.8, size=(12, 2)))]
            m = render_gaze_map(make_log(pts), 96, 96, KernelSpec(size_px=15))
            assert m.max() == 1.0
            assert m.min() >= 0.0

    def test_deterministic(self):
        log = make_log([(0.3, 0.7, 0), (0.6, 0.2, 5)])
        a = render_gaze_map(log, 128, 96, KernelSpec(size_px=31))
        b = render_gaze_map(log, 128, 96, KernelSpec(size_px=31))
        assert np.array_equal(a, b)

    def test_rounding_half_up_and_clamp(self):
        # x*width = 64.5 rounds up to 65; x=1.0 clamps to the last column
        m = render_gaze_map(make_log([(64.5 / 128, 0.5, 0)]), 128, 128, KernelSpec(size_px=5))
        assert np.unravel_index(m.argmax(), m.shape)[1] == 65
        m = render_gaze_map(make_log([(1.0, 0.5, 0)]), 128, 128, KernelSpec(size_px=5))
        assert np.unravel_index(m.argmax(), m.shape)[1] == 127

    def test_empty_log_error(self):
        with pytest.raises(ValueError, match="empty"):
            render_gaze_map(GazeLog("x", ()), 64, 64, KernelSpec(size_px=5))

    def test_kernel_exceeds_image(self):
        with pytest.raises(ValueError, match="kernel exceeds image"):
            render_gaze_map(make_log([(0.5, 0.5, 0)]), 64, 64, KernelSpec(size_px=99))
