import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from handover_intent.dsp import (
    Standardization,
    TfSpec,
    apply_filter,
    average_channels,
    band_pass,
    butterworth_magnitude,
    decimate,
    default_tf_spec,
    interpolate_gaps,
    low_pass,
    morlet_tf,
    morlet_wavelet,
    standardize,
)

from conftest import series


def sine(freq_hz, rate_hz, seconds, amplitude=1.0, phase=0.0):
    t = np.arange(0.0, seconds, 1.0 / rate_hz)
    return series(0.0, 1.0 / rate_hz, amplitude * np.sin(2 * np.pi * freq_hz * t + phase))


def measured_gain_and_phase(x, y, freq_hz, rate_hz):
    """Projection onto the quadrature pair over the steady middle third."""
    n = x.n_samples
    mid = slice(n // 3, 2 * n // 3)
    t = x.times()[mid]
    basis = np.stack([np.sin(2 * np.pi * freq_hz * t), np.cos(2 * np.pi * freq_hz * t)])
    def coef(v):
        return 2.0 / t.shape[0] * basis @ v
    cx, cy = coef(x.values[mid, 0]), coef(y.values[mid, 0])
    gain = np.hypot(*cy) / np.hypot(*cx)
    phase = np.arctan2(cy[1], cy[0]) - np.arctan2(cx[1], cx[0])
    return gain, (phase + np.pi) % (2 * np.pi) - np.pi


class TestFilter:
    def test_dc_rejected_by_band_pass(self):
        # Oracle: the band-pass response at 0 Hz is exactly zero.
        assert butterworth_magnitude(band_pass(1.0, 100.0), np.array([0.0]))[0] == 0.0
        x = series(0.0, 1e-3, np.ones(3000))
        y = apply_filter(x, band_pass(1.0, 100.0))
        assert np.abs(y.values[1000:2000]).max() < 1e-3

    def test_zero_signal_stays_zero(self):
        x = series(0.0, 0.004, np.zeros((500, 2)))
        y = apply_filter(x, low_pass(40.0))
        assert np.allclose(y.values, 0.0)

    def test_pass_band_sinusoid_amplitude_and_phase(self):
        # Oracle: analytic Butterworth magnitude at 10 Hz, squared for the
        # forward-backward pass; phase is zero by construction.
        x = sine(10.0, 250.0, 8.0)
        y = apply_filter(x, low_pass(40.0))
        gain, phase = measured_gain_and_phase(x, y, 10.0, 250.0)
        analytic = butterworth_magnitude(low_pass(40.0), np.array([10.0]))[0] ** 2
        assert abs(gain - analytic) < 0.01
        assert abs(gain - 1.0) < 0.01
        assert abs(phase) < 0.01

    def test_linearity(self, rng):
        x = series(0.0, 0.004, rng.normal(size=500))
        y = series(0.0, 0.004, rng.normal(size=500))
        spec = band_pass(2.0, 40.0)
        lhs = apply_filter(series(0.0, 0.004, 3.0 * x.values - 2.0 * y.values), spec)
        rhs = 3.0 * apply_filter(x, spec).values - 2.0 * apply_filter(y, spec).values
        scale = np.abs(rhs).max()
        assert np.abs(lhs.values - rhs).max() < 1e-9 * scale

    def test_zero_phase_keeps_pulse_peak(self):
        t = np.arange(1000) * 0.004
        pulse = np.exp(-0.5 * ((t - 2.0) / 0.1) ** 2)
        x = series(0.0, 0.004, pulse)
        y = apply_filter(x, low_pass(30.0))
        assert np.argmax(y.values[:, 0]) == np.argmax(x.values[:, 0])

    def test_cutoff_at_nyquist_rejected(self):
        x = series(0.0, 0.01, np.zeros(100))  # 100 Hz
        with pytest.raises(ValueError, match="Nyquist"):
            apply_filter(x, low_pass(50.0))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            band_pass(100.0, 1.0)
        with pytest.raises(ValueError):
            low_pass(-1.0)


class TestDecimate:
    def test_1000hz_by_4_gives_250hz(self):
        x = series(0.0, 0.001, np.random.default_rng(0).normal(size=11000))
        y = decimate(x, 4)
        assert y.n_samples == 2750
        assert y.step_s == pytest.approx(0.004)

    def test_factor_one_is_identity(self):
        x = series(0.0, 0.04, np.arange(10.0))
        y = decimate(x, 1)
        assert np.array_equal(y.values, x.values)

    def test_ceil_length(self):
        # Oracle: enumerate kept indices 0, 3, 6, 9 -> 4 rows.
        x = series(0.0, 0.04, np.arange(10.0))
        y = decimate(x, 3)
        assert y.n_samples == 4
        assert y.step_s == pytest.approx(0.12)

    def test_bad_factor(self):
        with pytest.raises(ValueError):
            decimate(series(0.0, 0.1, np.zeros(5)), 0)

    def test_antialias_attenuates_high_band(self):
        # 45 Hz tone aliases to 5 Hz at 50 Hz rate unless filtered out first.
        x = sine(45.0, 200.0, 10.0)
        y = decimate(x, 4)
        assert np.abs(y.values[y.n_samples // 3 :]).max() < 0.2


class TestInterpolateGaps:
    def test_midpoint(self):
        x = series(0.0, 1.0, [1.0, np.nan, 3.0])
        assert interpolate_gaps(x).values[:, 0].tolist() == [1.0, 2.0, 3.0]

    def test_no_gaps_identity(self):
        x = series(0.0, 1.0, [1.0, 4.0, 9.0])
        assert np.array_equal(interpolate_gaps(x).values, x.values)

    def test_two_point_interior_gap(self):
        # Oracle: solve the line through (0, 0) and (3, 3) at points 1, 2.
        x = series(0.0, 1.0, [0.0, np.nan, np.nan, 3.0])
        assert interpolate_gaps(x).values[:, 0].tolist() == [0.0, 1.0, 2.0, 3.0]

    def test_edges_take_nearest_value(self):
        x = series(0.0, 1.0, [np.nan, 2.0, 5.0, np.nan, np.nan])
        assert interpolate_gaps(x).values[:, 0].tolist() == [2.0, 2.0, 5.0, 5.0, 5.0]

    def test_all_missing_column_names_the_column(self):
        vals = np.stack([np.ones(4), np.full(4, np.nan)], axis=1)
        with pytest.raises(ValueError, match="column 1"):
            interpolate_gaps(series(0.0, 1.0, vals))

    @given(st.data())
    @settings(max_examples=50, deadline=None)
    def test_idempotent(self, data):
        n = data.draw(st.integers(3, 20))
        vals = np.array(
            data.draw(
                st.lists(
                    st.floats(-100, 100),
                    min_size=n,
                    max_size=n,
                )
            )
        )
        gaps = data.draw(st.lists(st.integers(0, n - 1), max_size=n // 2))
        vals[list(set(gaps))] = np.nan
        if not np.isfinite(vals).any():
            vals[0] = 0.0
        once = interpolate_gaps(series(0.0, 1.0, vals))
        twice = interpolate_gaps(once)
        assert np.array_equal(once.values, twice.values)
        present = np.isfinite(vals)
        assert np.array_equal(once.values[present, 0], vals[present])


class TestStandardize:
    def test_population_convention(self):
        out, stats = standardize(np.array([[2.0], [4.0]]))
        assert out[:, 0].tolist() == [-1.0, 1.0]
        assert stats.std[0] == pytest.approx(1.0)  # population std of [2, 4]

    def test_fit_then_apply_gives_zero_mean_unit_std(self, rng):
        x = rng.normal(3.0, 7.0, size=(40, 5))
        out, _ = standardize(x)
        assert np.abs(out.mean(axis=0)).max() < 1e-9
        assert np.abs(out.std(axis=0) - 1.0).max() < 1e-9

    def test_idempotent_on_fitted_data(self, rng):
        x = rng.normal(size=(30, 3))
        once, _ = standardize(x)
        twice, _ = standardize(once)
        assert np.abs(twice - once).max() < 1e-9

    def test_constant_column_maps_to_zero(self):
        out, _ = standardize(np.array([[5.0], [5.0], [5.0]]))
        assert out[:, 0].tolist() == [0.0, 0.0, 0.0]

    def test_held_out_data_uses_fitted_stats_only(self, rng):
        train = rng.normal(0.0, 1.0, size=(50, 2))
        test = rng.normal(5.0, 3.0, size=(20, 2))
        _, stats = standardize(train)
        out, stats2 = standardize(test, stats)
        assert stats2 is stats
        # means stay far from zero because the test stats were never refit
        assert np.abs(out.mean(axis=0)).min() > 1.0

    def test_dimension_mismatch(self):
        _, stats = standardize(np.ones((3, 2)))
        with pytest.raises(ValueError):
            stats.apply(np.ones((3, 5)))


def direct_convolution_power(values, wavelet):
    """Oracle: explicit same-mode complex convolution, squared magnitude."""
    full = np.convolve(values, wavelet, mode="full")
    start = (len(wavelet) - 1) // 2
    coef = full[start : start + len(values)]
    return np.abs(coef) ** 2


class TestMorlet:
    def test_wavelet_shape_and_center_gain(self):
        w = morlet_wavelet(10.0, 3.0, 0.004)
        sigma_t = 3.0 / (2 * np.pi * 10.0)
        assert len(w) == 2 * int(np.ceil(5 * sigma_t / 0.004)) + 1
        assert np.abs(w).sum() == pytest.approx(1.0)
        # unit gain at the center frequency
        t = np.arange(len(w)) * 0.004
        tone = np.exp(2j * np.pi * 10.0 * t)
        assert abs(np.abs(np.vdot(w, tone)) - 1.0) < 1e-6

    def test_pure_tone_peaks_at_true_frequency(self):
        spec = default_tf_spec()
        for freq in (7.0, 12.0, 25.0, 38.0):
            tf = morlet_tf(sine(freq, 250.0, 3.0), spec)[0]
            peak = tf.freqs_hz[np.argmax(tf.power.mean(axis=0))]
            assert abs(peak - freq) <= 1.0

    def test_matches_direct_convolution_oracle(self, rng):
        x = rng.normal(size=300)
        spec = TfSpec(freqs_hz=(6.0, 11.0, 19.0), n_cycles=3.0, output_step_s=0.004)
        tf = morlet_tf(series(0.0, 0.004, x), spec)[0]
        for j, f in enumerate(spec.freqs_hz):
            oracle = direct_convolution_power(x, morlet_wavelet(f, 3.0, 0.004))
            assert np.abs(tf.power[:, j] - oracle).max() < 1e-9 * oracle.max()

    def test_zero_signal_zero_power(self):
        tf = morlet_tf(series(0.0, 0.004, np.zeros(600)), default_tf_spec())[0]
        assert np.all(tf.power == 0.0)

    def test_power_is_quadratic_in_amplitude(self):
        spec = TfSpec(freqs_hz=(8.0, 14.0), n_cycles=3.0, output_step_s=0.02)
        base = morlet_tf(sine(10.0, 250.0, 2.0), spec)[0]
        doubled = morlet_tf(sine(10.0, 250.0, 2.0, amplitude=2.0), spec)[0]
        assert np.allclose(doubled.power, 4.0 * base.power, rtol=1e-9)

    def test_sign_flip_invariance(self, rng):
        x = rng.normal(size=400)
        spec = TfSpec(freqs_hz=(9.0, 21.0), n_cycles=3.0, output_step_s=0.01)
        a = morlet_tf(series(0.0, 0.004, x), spec)[0]
        b = morlet_tf(series(0.0, 0.004, -x), spec)[0]
        assert np.allclose(a.power, b.power)

    def test_short_signal_error_states_minimum_length(self):
        with pytest.raises(ValueError, match="at least"):
            morlet_tf(series(0.0, 0.004, np.zeros(50)), default_tf_spec())

    def test_output_step_snaps_to_grid(self):
        tf = morlet_tf(sine(10.0, 250.0, 3.0), default_tf_spec())[0]
        step = tf.times_s[1] - tf.times_s[0]
        assert step == pytest.approx(0.052)  # nearest multiple of 4 ms to 50 ms
        assert np.allclose(np.diff(tf.times_s), step)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            TfSpec(freqs_hz=())
        with pytest.raises(ValueError):
            TfSpec(freqs_hz=(10.0, 5.0))
        spec = TfSpec(freqs_hz=(5.0, 40.0))
        with pytest.raises(ValueError, match="Nyquist"):
            spec.validate_at(60.0)


class TestAverageChannels:
    def test_identity_for_identical_channels(self, rng):
        x = rng.normal(size=(200, 2))
        tfs = morlet_tf(series(0.0, 0.004, np.stack([x[:, 0], x[:, 0]], axis=1)),
                        TfSpec(freqs_hz=(10.0,), n_cycles=3.0, output_step_s=0.004))
        avg = average_channels(tfs)
        assert np.allclose(avg.power, tfs[0].power)

    def test_mean_of_p_and_3p(self):
        from handover_intent.dsp import TfFeature

        times = np.arange(4.0)
        freqs = np.array([5.0, 6.0])
        p = np.arange(8.0).reshape(4, 2) + 1.0
        a = TfFeature(times, freqs, p)
        b = TfFeature(times, freqs, 3.0 * p)
        assert np.allclose(average_channels([a, b]).power, 2.0 * p)

    def test_twelve_random_channels_match_summation_oracle(self, rng):
        from handover_intent.dsp import TfFeature

        times = np.arange(6.0)
        freqs = np.array([5.0, 9.0, 13.0])
        powers = [rng.random((6, 3)) for _ in range(12)]
        tfs = [TfFeature(times, freqs, p) for p in powers]
        oracle = sum(powers) / 12.0
        assert np.abs(average_channels(tfs).power - oracle).max() < 1e-12

    def test_grid_mismatch(self):
        from handover_intent.dsp import TfFeature

        a = TfFeature(np.arange(3.0), np.array([5.0]), np.ones((3, 1)))
        b = TfFeature(np.arange(3.0) + 1.0, np.array([5.0]), np.ones((3, 1)))
        with pytest.raises(ValueError, match="grid"):
            average_channels([a, b])
