"""Signal conditioning: IIR filtering, decimation, gap interpolation,
standardization, and the Morlet time-frequency transform."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import signal as sps

from .core_data import TimeSeries


class FilterKind(Enum):
    BAND_PASS = "band_pass"
    LOW_PASS = "low_pass"


@dataclass(frozen=True)
class FilterSpec:
    kind: FilterKind
    high_cut_hz: float
    low_cut_hz: float | None = None
    order: int = 4
    zero_phase: bool = True

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.kind is FilterKind.BAND_PASS:
            if self.low_cut_hz is None or not 0 < self.low_cut_hz < self.high_cut_hz:
                raise ValueError(
                    f"band-pass needs 0 < low ({self.low_cut_hz}) < high "
                    f"({self.high_cut_hz})"
                )
        elif self.low_cut_hz is not None:
            raise ValueError("low_cut_hz only applies to band-pass filters")
        if not self.high_cut_hz > 0:
            raise ValueError("high_cut_hz must be positive")

    def validate_at(self, sample_rate_hz: float) -> None:
        nyquist = sample_rate_hz / 2.0
        if self.high_cut_hz >= nyquist:
            raise ValueError(
                f"cutoff {self.high_cut_hz} Hz >= Nyquist {nyquist} Hz"
            )


def band_pass(low_hz: float, high_hz: float, order: int = 4) -> FilterSpec:
    return FilterSpec(FilterKind.BAND_PASS, high_hz, low_hz, order)


def low_pass(high_hz: float, order: int = 4) -> FilterSpec:
    return FilterSpec(FilterKind.LOW_PASS, high_hz, order=order)


def _design(spec: FilterSpec, sample_rate_hz: float) -> np.ndarray:
    spec.validate_at(sample_rate_hz)
    if spec.kind is FilterKind.BAND_PASS:
        return sps.butter(
            spec.order,
            [spec.low_cut_hz, spec.high_cut_hz],
            btype="bandpass",
            fs=sample_rate_hz,
            output="sos",
        )
    return sps.butter(
        spec.order, spec.high_cut_hz, btype="lowpass", fs=sample_rate_hz, output="sos"
    )


def apply_filter(x: TimeSeries, spec: FilterSpec) -> TimeSeries:
    """Butterworth IIR filter along time; forward-backward when zero_phase."""
    sos = _design(spec, 1.0 / x.step_s)
    if spec.zero_phase:
        padlen = min(x.n_samples - 1, 3 * (2 * len(sos) + 1))
        out = sps.sosfiltfilt(sos, x.values, axis=0, padlen=padlen)
    else:
        out = sps.sosfilt(sos, x.values, axis=0)
    return TimeSeries(x.start_time_s, x.step_s, out)


def butterworth_magnitude(spec: FilterSpec, freq_hz: np.ndarray) -> np.ndarray:
    """Analytic magnitude response of the underlying analog prototype.

    For zero-phase application the effective magnitude is this squared.
    Used by verification code as an independent reference; the filter itself
    is realized digitally (bilinear transform), which matches this closely
    inside the pass band.
    """
    f = np.asarray(freq_hz, dtype=float)
    n = spec.order
    if spec.kind is FilterKind.LOW_PASS:
        return 1.0 / np.sqrt(1.0 + (f / spec.high_cut_hz) ** (2 * n))
    f1, f2 = spec.low_cut_hz, spec.high_cut_hz
    with np.errstate(divide="ignore"):
        ratio = np.where(f > 0, (f**2 - f1 * f2) / (f * (f2 - f1)), np.inf)
    return 1.0 / np.sqrt(1.0 + ratio ** (2 * n))


def decimate(x: TimeSeries, factor: int) -> TimeSeries:
    """Keep every ``factor``-th sample after an internal anti-alias low-pass.

    The anti-alias cutoff is 0.8x the new Nyquist; output length is
    ceil(T / factor).
    """
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return x
    new_rate = 1.0 / (x.step_s * factor)
    spec = low_pass(0.8 * new_rate / 2.0)
    filtered = apply_filter(x, spec)
    return TimeSeries(x.start_time_s, x.step_s * factor, filtered.values[::factor])


def interpolate_gaps(x: TimeSeries) -> TimeSeries:
    """Replace nan runs per column by linear interpolation between the nearest
    present neighbors; leading/trailing gaps take the nearest present value.

    Present values are untouched, so the operation is idempotent.
    """
    values = np.array(x.values, dtype=float)
    idx = np.arange(values.shape[0], dtype=float)
    for col in range(values.shape[1]):
        column = values[:, col]
        present = np.isfinite(column)
        if present.all():
            continue
        if not present.any():
            raise ValueError(f"column {col} has no present samples to interpolate from")
        # np.interp clamps outside the known range = nearest-value extension.
        values[:, col] = np.interp(idx, idx[present], column[present])
    return TimeSeries(x.start_time_s, x.step_s, values)


@dataclass(frozen=True)
class Standardization:
    """Per-column statistics fitted on training data only."""

    mean: np.ndarray
    std: np.ndarray
    fit_on_train_only: bool = True

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.mean.shape[0]:
            raise ValueError(
                f"feature count {x.shape[-1]} does not match fitted {self.mean.shape[0]}"
            )
        return (x - self.mean) / self.std


def standardize(
    x: np.ndarray, stats: Standardization | None = None
) -> tuple[np.ndarray, Standardization]:
    """Zero-mean, unit-std columns (population std; constant columns map to 0).

    With ``stats`` given, only applies them -- fitting never happens on
    held-out data.
    """
    x = np.asarray(x, dtype=float)
    if stats is None:
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std > 0.0, std, 1.0)
        stats = Standardization(mean=mean, std=std)
    return stats.apply(x), stats


@dataclass(frozen=True)
class TfSpec:
    freqs_hz: tuple
    n_cycles: float = 3.0
    output_step_s: float = 0.05

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.freqs_hz)
        if not freqs or any(f <= 0 for f in freqs):
            raise ValueError("freqs_hz must be positive")
        if list(freqs) != sorted(freqs):
            raise ValueError("freqs_hz must be ascending")
        if self.n_cycles <= 0:
            raise ValueError("n_cycles must be positive")
        if self.output_step_s <= 0:
            raise ValueError("output_step_s must be positive")
        object.__setattr__(self, "freqs_hz", freqs)

    def validate_at(self, sample_rate_hz: float) -> None:
        nyquist = sample_rate_hz / 2.0
        if self.freqs_hz[-1] >= nyquist:
            raise ValueError(
                f"max frequency {self.freqs_hz[-1]} Hz >= Nyquist {nyquist} Hz"
            )
        if self.output_step_s < 1.0 / sample_rate_hz - 1e-12:
            raise ValueError("output_step_s must be >= the input step")

    def cache_key(self) -> str:
        return (
            "f" + "-".join(f"{f:g}" for f in self.freqs_hz)
            + f"_c{self.n_cycles:g}_s{self.output_step_s:g}"
        )


def default_tf_spec() -> TfSpec:
    """Integer 5..40 Hz grid, 3-cycle wavelets, ~20 Hz feature rate."""
    return TfSpec(freqs_hz=tuple(range(5, 41)), n_cycles=3.0, output_step_s=0.05)


@dataclass(frozen=True)
class TfFeature:
    times_s: np.ndarray
    freqs_hz: np.ndarray
    power: np.ndarray  # (T', F), nonnegative

    def __post_init__(self):
        t = np.asarray(self.times_s, dtype=float)
        f = np.asarray(self.freqs_hz, dtype=float)
        p = np.asarray(self.power, dtype=float)
        if p.shape != (t.shape[0], f.shape[0]):
            raise ValueError(
                f"power shape {p.shape} does not match {t.shape[0]} times x "
                f"{f.shape[0]} freqs"
            )
        object.__setattr__(self, "times_s", t)
        object.__setattr__(self, "freqs_hz", f)
        object.__setattr__(self, "power", p)


def morlet_wavelet(freq_hz: float, n_cycles: float, step_s: float) -> np.ndarray:
    """Complex Morlet wavelet sampled at ``step_s``; sigma_t = n_cycles/(2 pi f),
    support truncated at +-5 sigma_t.

    Normalized to unit envelope L1 norm, i.e. unit gain at the wavelet's own
    center frequency.  (Unit-energy normalization would tilt the response to
    an equal-amplitude tone by 1/f, dragging the spectral peak of few-cycle
    wavelets below the true frequency.)
    """
    sigma_t = n_cycles / (2.0 * math.pi * freq_hz)
    half = int(math.ceil(5.0 * sigma_t / step_s))
    t = np.arange(-half, half + 1) * step_s
    envelope = np.exp(-(t**2) / (2.0 * sigma_t**2))
    wavelet = envelope * np.exp(2j * math.pi * freq_hz * t)
    return wavelet / envelope.sum()


def morlet_tf(x: TimeSeries, spec: TfSpec) -> "list[TfFeature]":
    """Morlet time-frequency power per channel of ``x``.

    The full-rate power stream is decimated to (approximately) the requested
    output step by plain sample selection; the selection stride snaps to the
    nearest integer multiple of the input step, so the emitted grid stays
    strictly uniform (e.g. a 50 ms request on a 250 Hz input yields 52 ms).
    """
    rate = 1.0 / x.step_s
    spec.validate_at(rate)
    stride = max(1, int(math.floor(spec.output_step_s / x.step_s + 0.5)))
    wavelets = [morlet_wavelet(f, spec.n_cycles, x.step_s) for f in spec.freqs_hz]
    longest = max(len(w) for w in wavelets)
    if longest > x.n_samples:
        raise ValueError(
            f"signal of {x.n_samples} samples shorter than the longest wavelet "
            f"({longest} samples at {spec.freqs_hz[0]:g} Hz); need at least "
            f"{longest} samples"
        )
    times = x.times()[::stride]
    features = []
    for ch in range(x.n_features):
        chan = x.values[:, ch]
        power = np.empty((times.shape[0], len(wavelets)))
        for j, wavelet in enumerate(wavelets):
            coef = sps.fftconvolve(chan, wavelet, mode="same")
            power[:, j] = (coef.real**2 + coef.imag**2)[::stride]
        features.append(
            TfFeature(times_s=times, freqs_hz=np.asarray(spec.freqs_hz), power=power)
        )
    return features


def average_channels(tf: "list[TfFeature]") -> TfFeature:
    """Elementwise mean of per-channel power on a shared time/frequency grid."""
    if not tf:
        raise ValueError("no channels to average")
    first = tf[0]
    for other in tf[1:]:
        if (
            other.power.shape != first.power.shape
            or not np.array_equal(other.times_s, first.times_s)
            or not np.array_equal(other.freqs_hz, first.freqs_hz)
        ):
            raise ValueError("channel time/frequency grids do not match")
    mean = np.mean([f.power for f in tf], axis=0)
    return TfFeature(times_s=first.times_s, freqs_hz=first.freqs_hz, power=mean)
