import io

import numpy as np
import pytest

from nccbank import filterbank as fb
from nccbank import patchmath as pm


def impulse(size):
    g = np.zeros((size, size))
    g[size // 2, size // 2] = 1.0
    return g


class TestGaussian:
    def test_center_is_max_and_symmetric(self):
        g = fb.gaussian_grid(15, 1.2)
        assert g[7, 7] == 1.0
        assert g[7, 7] == g.max()
        assert np.array_equal(np.rot90(g), g)
        assert np.array_equal(g.T, g)

    def test_narrow_beats_wide_on_impulse(self):
        s_narrow = pm.ncc_score(impulse(15), fb.gaussian_grid(15, 0.5), "std")
        s_wide = pm.ncc_score(impulse(15), fb.gaussian_grid(15, 2.0), "std")
        assert s_narrow > s_wide

    def test_huge_sigma_goes_flat(self):
        with pytest.raises(pm.DegeneratePatchError):
            pm.normalize_std(fb.gaussian_grid(15, 1e8))

    def test_validation(self):
        with pytest.raises(ValueError):
            fb.gaussian_grid(14, 1.0)
        with pytest.raises(ValueError):
            fb.gaussian_grid(15, 0.0)

    def test_spec_wrapper(self):
        spec = fb.gaussian_filter(15, 1.2)
        assert spec.name == "gauss-1.2"
        assert spec.precision == "ideal"
        assert spec.size == 15


class TestHat:
    def test_exactly_zero_sum(self):
        assert abs(fb.ricker_hat_grid(15).sum()) < 1e-12
        assert abs(fb.ricker_hat_grid(9, fb.HatParams(3.0, 1.0, 0.2, 0.3)).sum()) < 1e-12

    def test_lattice_exact_symmetry(self):
        hat = fb.ricker_hat_grid(15)
        assert np.array_equal(np.rot90(hat), hat)
        assert np.array_equal(hat.T, hat)

    def test_default_center_pit(self):
        hat = fb.ricker_hat_grid(15)
        c = 7
        for nb in (hat[c - 1, c], hat[c + 1, c], hat[c, c - 1], hat[c, c + 1]):
            assert hat[c, c] < nb

    def test_no_pit_means_center_peak(self):
        hat = fb.ricker_hat_grid(15, fb.HatParams(pit_depth=0.0))
        assert hat[7, 7] == hat.max()

    def test_surround_is_negative_annulus(self):
        hat = fb.ricker_hat_grid(15)
        assert hat[7, 3] < 0.0 and hat[3, 7] < 0.0

    def test_param_validation(self):
        with pytest.raises(ValueError):
            fb.HatParams(support_halfwidth=-1.0)
        with pytest.raises(ValueError):
            fb.HatParams(pit_radius=0.0)
        with pytest.raises(ValueError):
            fb.ricker_hat_grid(8)


class TestFitHat:
    def test_self_recovery(self):
        # the default hat re-expressed with sigma pinned to 1 is
        # (support 3.5, pit_depth 0.5, pit_radius 0.25)
        params, sim = fb.fit_hat(fb.ricker_hat_grid(15))
        assert sim > 0.999
        assert abs(params.support_halfwidth - 3.5) < 0.05
        assert abs(params.pit_depth - 0.5) < 0.05
        assert abs(params.pit_radius - 0.25) < 0.05

    def test_gaussian_wants_no_pit(self):
        params, sim = fb.fit_hat(fb.gaussian_grid(15, 1.2))
        assert params.pit_depth < 0.05
        assert sim > 0.8

    def test_flat_target_rejected(self):
        with pytest.raises(pm.DegeneratePatchError):
            fb.fit_hat(np.full((15, 15), 2.0))


class TestCrop:
    def test_fifteen_to_nine_is_three_px_trim(self):
        rng = np.random.default_rng(90)
        g = rng.normal(size=(15, 15))
        np.testing.assert_array_equal(fb.crop_grid(g, 9), g[3:12, 3:12])

    def test_identity_and_composition(self):
        rng = np.random.default_rng(91)
        g = rng.normal(size=(15, 15))
        np.testing.assert_array_equal(fb.crop_grid(g, 15), g)
        two_step = fb.crop_grid(fb.crop_grid(g, 7), 5)
        np.testing.assert_array_equal(two_step, fb.crop_grid(g, 5))

    def test_invalid_sizes(self):
        g = np.zeros((15, 15))
        with pytest.raises(ValueError):
            fb.crop_grid(g, 8)
        with pytest.raises(ValueError):
            fb.crop_grid(g, 17)

    def test_spec_crop(self):
        spec = fb.ricker_hat_filter(15)
        small = fb.crop_filter(spec, 9, name="hat9")
        assert small.size == 9
        np.testing.assert_array_equal(small.grid, spec.grid[3:12, 3:12])


class TestQuantize:
    def test_pinned_values_q87(self):
        raw = fb.quantize_taps(np.array([[0.5, -1.0], [1.0, 0.0]]))
        np.testing.assert_array_equal(raw, [[64, -128], [127, 0]])

    def test_round_half_even(self):
        raw = fb.quantize_taps(np.array([[64.5 / 128, 65.5 / 128]]))
        np.testing.assert_array_equal(raw, [[64, 66]])

    def test_roundtrip_error_half_ulp(self):
        rng = np.random.default_rng(92)
        q = fb.TAP_QFORMAT
        taps = rng.uniform(-q.max_value, q.max_value, size=(15, 15))
        back = fb.dequantize_taps(fb.quantize_taps(taps, q), q)
        assert np.max(np.abs(back - taps)) <= 2.0 ** -(q.frac_bits + 1)

    def test_prescale_hits_full_range(self):
        hat = fb.ricker_hat_grid(15)
        scaled = fb.prescale_for_qformat(hat, fb.TAP_QFORMAT)
        assert np.max(np.abs(scaled)) == pytest.approx(127.0 / 128.0, abs=1e-15)
        with pytest.raises(pm.DegeneratePatchError):
            fb.prescale_for_qformat(np.zeros((5, 5)))

    def test_prepared_taps_use_full_range(self):
        raw = fb.prepare_fixed_taps(fb.ricker_hat_grid(15))
        assert np.max(np.abs(raw)) == 127

    def test_quantization_score_shift_is_small(self):
        # measure C in |score drift| <= C * 2^-frac for the prepared hat
        rng = np.random.default_rng(93)
        q = fb.TAP_QFORMAT
        hat = fb.ricker_hat_grid(15)
        ideal = fb.prescale_for_qformat(hat - hat.mean(), q)
        quant = fb.dequantize_taps(fb.quantize_taps(ideal, q), q)
        worst = 0.0
        for _ in range(100):
            p = rng.normal(loc=1000.0, scale=80.0, size=(15, 15))
            a = pm.ncc_score(p, ideal, "std")
            b = pm.ncc_score(p, quant, "std")
            worst = max(worst, abs(a - b))
        c_measured = worst / 2.0**-q.frac_bits
        assert c_measured < 10.0

    def test_quantize_filter_spec(self):
        spec = fb.ricker_hat_filter(15)
        fixed = fb.quantize_filter(spec, fb.TAP_QFORMAT)
        assert fixed.precision == "fixed"
        assert fixed.qformat == fb.QFormat(8, 7)
        assert fixed.raw.dtype == np.int32
        np.testing.assert_allclose(
            fixed.grid, fixed.raw / 128.0, atol=0
        )
        with pytest.raises(ValueError):
            fb.quantize_filter(fixed)

    def test_qformat_validation(self):
        with pytest.raises(ValueError):
            fb.QFormat(1, 0)
        with pytest.raises(ValueError):
            fb.QFormat(8, 8)
        assert fb.QFormat(8, 7).raw_min == -128
        assert fb.QFormat(16, 10).raw_max == 32767


class TestFixedScore:
    # hand-worked 2x2 case: patch [[10,20],[30,40]], taps (-0.5,-0.25,0.25,0.5)
    # in Q(8,7) = [[-64,-32],[32,64]]:
    #   sum 100, mean 25, devs (-15,-5,5,15), sad 40
    #   acc = 960+160+160+960 = 2240
    #   raw = trunc(2240 * 2 * 1024 / (40 * 128)) = trunc(896.0) = 896
    PATCH = np.array([[10, 20], [30, 40]], dtype=np.uint16)
    TAPS = np.array([[-64, -32], [32, 64]], dtype=np.int32)
    Q = fb.QFormat(8, 7)

    def test_pinned_exact_case(self):
        s = fb.mad_ncc_fixed_score(self.PATCH, self.TAPS, self.Q)
        assert s.raw == 896
        assert not s.degenerate and not s.saturated
        assert s.value == pytest.approx(0.875)

    def test_truncation_toward_zero(self):
        # patch [[10,20],[30,41]]: mean trunc(101/4)=25, devs (-15,-5,5,16),
        # sad 41, acc 2304, quotient 899.12... -> +899; negated taps -> -899
        # (floor division would give -900)
        patch = np.array([[10, 20], [30, 41]], dtype=np.uint16)
        pos = fb.mad_ncc_fixed_score(patch, self.TAPS, self.Q)
        neg = fb.mad_ncc_fixed_score(patch, -self.TAPS, self.Q)
        assert pos.raw == 899
        assert neg.raw == -899

    def test_flat_patch_degenerate(self):
        s = fb.mad_ncc_fixed_score(
            np.full((5, 5), 123, dtype=np.uint16),
            np.ones((5, 5), dtype=np.int32),
            self.Q,
        )
        assert s.degenerate and s.raw == 0

    def test_impulse_beats_ramp_through_quantized_hat9(self):
        hat9 = fb.crop_grid(fb.ricker_hat_grid(15), 9)
        taps = fb.prepare_fixed_taps(hat9)
        imp = np.full((9, 9), 1000, dtype=np.uint16)
        imp[4, 4] = 4000
        ramp = (1000 + 50 * np.arange(9)[None, :] + np.zeros((9, 1))).astype(np.uint16)
        s_imp = fb.mad_ncc_fixed_score(imp, taps, fb.TAP_QFORMAT)
        s_ramp = fb.mad_ncc_fixed_score(ramp, taps, fb.TAP_QFORMAT)
        assert s_imp.raw > 0
        assert s_imp.raw > s_ramp.raw

    def test_matches_float_reference(self):
        rng = np.random.default_rng(94)
        taps = fb.prepare_fixed_taps(fb.ricker_hat_grid(15))
        deq = fb.dequantize_taps(taps, fb.TAP_QFORMAT)
        for _ in range(200):
            patch = rng.integers(200, 4000, size=(15, 15)).astype(np.uint16)
            fixed = fb.mad_ncc_fixed_score(patch, taps, fb.TAP_QFORMAT)
            ref = fb.mad_ncc_float_score(patch.astype(float), deq)
            assert abs(fixed.value - ref) <= 2.0**-5

    def test_saturation_flag(self):
        # 35x35 taps aligned with the deviation signs: float score would be
        # ~ 0.99 * 35 = 34.7, beyond the Q(16,10) ceiling of ~32
        k = 35
        patch = np.full((k, k), 100, dtype=np.uint16)
        patch[::2, ::2] = 3000
        mean = int(patch.sum()) // (k * k)
        taps = np.where(patch.astype(int) - mean >= 0, 127, -127).astype(np.int32)
        s = fb.mad_ncc_fixed_score(patch, taps, self.Q)
        assert s.saturated
        assert s.raw == fb.OUT_QFORMAT.raw_max

    def test_input_validation(self):
        with pytest.raises(ValueError):
            fb.mad_ncc_fixed_score(self.PATCH.astype(float), self.TAPS, self.Q)
        with pytest.raises(ValueError):
            fb.mad_ncc_fixed_score(
                np.array([[70000, 1], [1, 1]], dtype=np.int64), self.TAPS, self.Q
            )
        with pytest.raises(ValueError):
            fb.mad_ncc_fixed_score(self.PATCH, self.TAPS.astype(float), self.Q)
        with pytest.raises(ValueError):
            fb.mad_ncc_fixed_score(self.PATCH, self.TAPS)


class TestFixedResponse:
    def test_bit_identical_to_scalar(self):
        rng = np.random.default_rng(95)
        frame = rng.integers(100, 5000, size=(30, 30)).astype(np.uint16)
        frame[5:14, 20:29] = 777  # one flat window somewhere in the field
        taps = fb.prepare_fixed_taps(fb.crop_grid(fb.ricker_hat_grid(15), 9))
        raw, degen = fb.mad_ncc_fixed_response(frame, taps, fb.TAP_QFORMAT, chunk_rows=7)
        assert raw.shape == (22, 22)
        for i in range(22):
            for j in range(22):
                s = fb.mad_ncc_fixed_score(frame[i : i + 9, j : j + 9], taps, fb.TAP_QFORMAT)
                assert raw[i, j] == s.raw, (i, j)
                assert degen[i, j] == s.degenerate, (i, j)
        assert degen[5, 20]

    def test_all_flat_frame(self):
        taps = fb.prepare_fixed_taps(fb.ricker_hat_grid(15))
        raw, degen = fb.mad_ncc_fixed_response(
            np.full((20, 20), 42, dtype=np.uint16), taps, fb.TAP_QFORMAT
        )
        assert degen.all()
        assert np.all(raw == 0)

    def test_validation(self):
        taps = fb.prepare_fixed_taps(fb.ricker_hat_grid(9))
        with pytest.raises(ValueError):
            fb.mad_ncc_fixed_response(np.zeros((20, 20)), taps, fb.TAP_QFORMAT)
        with pytest.raises(ValueError):
            fb.mad_ncc_fixed_response(
                np.zeros((5, 5), dtype=np.uint16), taps, fb.TAP_QFORMAT
            )


class TestMadRatio:
    def test_pinned_hot_center(self):
        # all-100 patch with center 200: center ratio is exactly 112.5,
        # everything else ~0.502
        patch = np.full((15, 15), 100.0)
        patch[7, 7] = 200.0
        mask = fb.mad_ratio_detect(patch, 2.5)
        assert mask[7, 7]
        assert mask.sum() == 1
        assert fb.mad_ratio_detect(patch, 112.0)[7, 7]
        assert not fb.mad_ratio_detect(patch, 113.0)[7, 7]
        assert fb.mad_ratio_detect(patch, 0.4).all()
        assert fb.mad_ratio_detect(patch, 0.6).sum() == 1

    def test_flat_patch_all_false(self):
        assert not fb.mad_ratio_detect(np.full((5, 5), 7.0), 2.5).any()

    def test_threshold_zero_marks_any_deviation(self):
        patch = np.full((15, 15), 100.0)
        patch[7, 7] = 200.0
        assert fb.mad_ratio_detect(patch, 0.0).all()

    def test_affine_invariance(self):
        rng = np.random.default_rng(96)
        for _ in range(10):
            p = rng.normal(size=(9, 9))
            a = float(rng.uniform(0.1, 100.0))
            b = float(rng.uniform(-50.0, 50.0))
            np.testing.assert_array_equal(
                fb.mad_ratio_detect(p, 2.5), fb.mad_ratio_detect(a * p + b, 2.5)
            )


class TestOpCount:
    def test_pinned_table(self):
        per = 256 * 256 // (15 * 15)  # 291
        assert per == 291
        assert fb.op_count("mad-ratio", 256, 15) == fb.OpCount(65536, 291, 291, 0)
        assert fb.op_count("ncc-std", 256, 15) == fb.OpCount(65536, 582, 291, 291)
        assert fb.op_count("ncc-mad", 256, 15) == fb.OpCount(65536, 582, 291, 0)
        assert fb.op_count("unnorm-corr", 256, 15) == fb.OpCount(65536, 291, 0, 0)

    def test_spec_examples(self):
        assert fb.op_count("ncc-mad", 512, 15).square_roots == 0
        assert fb.op_count("ncc-std", 512, 15).square_roots == 512 * 512 // (15 * 15)
        assert fb.op_count("unnorm-corr", 512, 15).divisions == 0

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            fb.op_count("ipi", 256, 15)

    def test_csv_report(self, tmp_path):
        path = tmp_path / "ops.csv"
        fb.write_op_count_csv(path, 256, 15)
        lines = path.read_text().splitlines()
        assert lines[0] == "method,N,f,mul,add,div,sqrt"
        assert lines[2] == "ncc-std,256,15,65536,582,291,291"
        assert len(lines) == 5


class TestTiledScan:
    def test_sqrt_count_matches_formula(self):
        rng = np.random.default_rng(97)
        frame = rng.normal(loc=100.0, scale=10.0, size=(64, 64))
        filt = fb.ricker_hat_grid(5, fb.HatParams(2.0, 1.0, 0.0, 0.3))
        _, counts = fb.tiled_std_scan(frame, filt)
        assert counts.square_roots == 64 * 64 // 25
        assert counts.square_roots == fb.op_count("ncc-std", 64, 5).square_roots

    def test_run_start_pixels_score_exactly(self):
        rng = np.random.default_rng(98)
        frame = rng.normal(loc=50.0, scale=5.0, size=(40, 40))
        filt = fb.gaussian_grid(5, 1.0)
        scores, counts = fb.tiled_std_scan(frame, filt)
        assert scores.shape == frame.shape
        f = 5
        for run in range(counts.square_roots):
            pos = run * f * f
            r, c = divmod(pos, 40)
            tr, tc = min(r, 40 - f), min(c, 40 - f)
            window = frame[tr : tr + f, tc : tc + f]
            exact = pm.ncc_score(window, filt, "std")
            assert scores[r, c] == pytest.approx(exact, abs=1e-9)

    def test_frame_too_small(self):
        with pytest.raises(ValueError):
            fb.tiled_std_scan(np.zeros((4, 4)) + np.arange(4), fb.gaussian_grid(5, 1.0))


class TestQuantizedFilterIO:
    def test_roundtrip(self, tmp_path):
        taps = fb.prepare_fixed_taps(fb.ricker_hat_grid(9))
        path = tmp_path / "hat9.qf"
        fb.save_quantized_filter(path, taps, fb.TAP_QFORMAT)
        back, q = fb.load_quantized_filter(path)
        assert q == fb.TAP_QFORMAT
        np.testing.assert_array_equal(back, taps)

    def test_stream_roundtrip(self):
        taps = np.array([[1, -2], [3, -4]], dtype=np.int32)
        buf = io.StringIO()
        fb.save_quantized_filter(buf, taps, fb.QFormat(4, 2))
        buf.seek(0)
        back, q = fb.load_quantized_filter(buf)
        assert q == fb.QFormat(4, 2)
        np.testing.assert_array_equal(back, taps)

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "qfilter 2\nqformat 8 7\n1 1\n5\n",
            "qfilter 1\nqformat 8\n1 1\n5\n",
            "qfilter 1\nqformat 8 7\n2 1\n5\n",
            "qfilter 1\nqformat 8 7\n1 1\n500\n",
            "qfilter 1\nqformat 8 7\n1 2\n5\n",
        ],
    )
    def test_malformed_rejected(self, text):
        with pytest.raises(ValueError):
            fb.load_quantized_filter(io.StringIO(text))

    def test_save_validation(self):
        with pytest.raises(ValueError):
            fb.save_quantized_filter(io.StringIO(), np.zeros((2, 2)), fb.TAP_QFORMAT)
