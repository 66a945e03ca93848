"""Synthetic SEP signals and their conditioning into zero-crossing streams.

The skin electric potential (SEP) induced by powerline radiation is modeled
as a mains-frequency carrier riding on a wandering baseline, with a slowly
changing envelope (body movement), additive noise, and ADC quantization.
Conditioning removes the baseline (band-pass or mean-removal filter) and
extracts sub-sample zero-crossing times by linear interpolation.

All times are milliseconds; sample rates are Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

MS_PER_S = 1000.0

# Standard deviation of a full-scale normalized sinusoid (peak-to-peak 1.0).
# Signal strength is defined as sigma / FULL_SCALE_SINE_STD.
FULL_SCALE_SINE_STD = 0.5 / math.sqrt(2.0)

# Band-pass coefficients, order-2 Butterworth designed at 333 Hz with a
# 10 Hz passband around the mains frequency. Precomputed constants; see
# scripts/design_bpf.py for the provenance script and response margins
# (DC < -570 dB, mains 0 dB, 150 Hz < -65 dB).
BPF_DESIGN_RATE_HZ = 333.0
_BPF_COEFFS = {
    50.0: (
        np.array([0.007834918774491603, 0.0, -0.015669837548983205, 0.0,
                  0.007834918774491603]),
        np.array([1.0, -2.2020028774037637, 2.9514341896091922,
                  -1.925816365423916, 0.7658022598460701]),
    ),
    60.0: (
        np.array([0.0078349187744916, 0.0, -0.0156698375489832, 0.0,
                  0.0078349187744916]),
        np.array([1.0, -1.5933157275091983, 2.3716223842679494,
                  -1.3934738845311199, 0.7658022598460699]),
    ),
}

# Transient discarded before zero-crossing detection, matching the one-second
# safeguard applied around every processed signal segment.
DEFAULT_SETTLE_S = 1.0


class FilterDesignError(ValueError):
    """Trace sample rate does not match the stored filter design."""


@dataclass(frozen=True)
class SepTrace:
    """Uniformly sampled SEP segment on the owning node's clock.

    Raw traces hold normalized ADC fractions in [0, 1]; filtered traces are
    signed and zero-centered (``centered=True``). Sample k is taken at
    ``start_time_ms + k * 1000 / sample_rate_hz``.
    """

    start_time_ms: float
    sample_rate_hz: float
    samples: np.ndarray
    centered: bool = False

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if not self.centered and samples.size:
            lo, hi = samples.min(), samples.max()
            if lo < 0.0 or hi > 1.0:
                raise ValueError("raw trace amplitudes must lie in [0, 1]")

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def dt_ms(self) -> float:
        return MS_PER_S / self.sample_rate_hz

    def times_ms(self) -> np.ndarray:
        return self.start_time_ms + np.arange(len(self)) * self.dt_ms

    @property
    def end_time_ms(self) -> float:
        return self.start_time_ms + (len(self) - 1) * self.dt_ms


@dataclass(frozen=True)
class SepSynthesisConfig:
    """Parameters of the synthetic SEP generator.

    signal_strength follows the sigma/0.354 definition: 1.0 is a full-scale
    sinusoid, 0.34 matches a typical skin-contact recording. dc_drift is the
    baseline wander rate in normalized amplitude per second of random walk.
    amplitude_mod_depth drives a 0.1-2 Hz band-limited random envelope (a
    stand-in for body-movement dynamics; the real statistics are unknown).
    phase_offset_ms delays the carrier, modeling comb displacement.
    """

    mains_frequency_hz: float = 50.0
    signal_strength: float = 0.34
    dc_drift: float = 0.0
    amplitude_mod_depth: float = 0.0
    noise_sigma: float = 0.0
    phase_offset_ms: float = 0.0
    quantization_bits: int = 10
    rng_seed: int = 0
    sample_rate_hz: float = 333.0

    def __post_init__(self):
        if self.mains_frequency_hz not in (50.0, 60.0):
            raise ValueError("mains_frequency_hz must be 50 or 60")
        if not 0.0 <= self.signal_strength <= 1.0:
            raise ValueError("signal_strength must lie in [0, 1]")
        if self.quantization_bits < 1:
            raise ValueError("quantization_bits must be >= 1")
        if self.sample_rate_hz <= 2.0 * self.mains_frequency_hz:
            raise ValueError("sample_rate_hz violates Nyquist for the mains carrier")

    @property
    def nominal_period_ms(self) -> float:
        return MS_PER_S / self.mains_frequency_hz


@dataclass(frozen=True)
class ZcStream:
    """Strictly increasing zero-crossing times (ms) from one node's signal."""

    crossings: np.ndarray
    clock_id: str = ""

    def __post_init__(self):
        crossings = np.asarray(self.crossings, dtype=float)
        object.__setattr__(self, "crossings", crossings)
        if crossings.size > 1 and not np.all(np.diff(crossings) > 0):
            raise ValueError("zero-crossing times must be strictly increasing")

    def __len__(self) -> int:
        return int(self.crossings.size)

    def shifted(self, offset_ms: float) -> "ZcStream":
        return ZcStream(self.crossings + offset_ms, self.clock_id)


def quantize(samples: np.ndarray, bits: int) -> np.ndarray:
    """Uniform quantization with step 2**-bits and a code centered on 0.5.

    Mid-scale maps to itself exactly, so a zero-amplitude trace quantizes to
    a constant 0.5 and any signal smaller than half a step flattens out.
    """
    step = 2.0 ** -bits
    return np.clip(np.round((np.asarray(samples) - 0.5) / step) * step + 0.5,
                   0.0, 1.0)


def _bandlimited_noise(rng: np.random.Generator, n: int, sample_rate_hz: float,
                       low_hz: float, high_hz: float) -> np.ndarray:
    """Unit-std noise restricted to [low_hz, high_hz], for slow modulations."""
    from scipy.signal import butter

    white = rng.standard_normal(n)
    nyq = sample_rate_hz / 2.0
    b, a = butter(2, [low_hz / nyq, min(high_hz / nyq, 0.99)], btype="bandpass")
    shaped = lfilter(b, a, white)
    std = shaped.std()
    if std > 0:
        shaped /= std
    return shaped


def _synthesize_values(config: SepSynthesisConfig, waveform_times_ms: np.ndarray,
                       rng: np.random.Generator) -> np.ndarray:
    """Generate quantized [0, 1] samples whose carrier phase is driven by
    ``waveform_times_ms`` (the signal's own time axis, already shifted for
    any comb displacement)."""
    n = waveform_times_ms.size
    carrier = np.sin(2.0 * math.pi * config.mains_frequency_hz
                     * waveform_times_ms / MS_PER_S)

    # Draw order is fixed so traces are reproducible for a given seed.
    if config.amplitude_mod_depth > 0.0:
        walk = _bandlimited_noise(rng, n, config.sample_rate_hz, 0.1, 2.0)
        envelope = np.clip(1.0 + config.amplitude_mod_depth * walk, 0.05, None)
    else:
        envelope = 1.0

    ac = carrier * envelope
    target_std = FULL_SCALE_SINE_STD * config.signal_strength
    if config.signal_strength > 0.0:
        measured = ac.std()
        if measured > 0.0:
            ac = ac * (target_std / measured)
    else:
        ac = np.zeros(n)

    baseline = np.full(n, 0.5)
    if config.dc_drift > 0.0:
        steps = rng.standard_normal(n) / math.sqrt(config.sample_rate_hz)
        baseline = baseline + config.dc_drift * np.cumsum(steps)

    noise = (config.noise_sigma * rng.standard_normal(n)
             if config.noise_sigma > 0.0 else 0.0)

    raw = np.clip(baseline + ac + noise, 0.0, 1.0)
    return quantize(raw, config.quantization_bits)


def synthesize_sep(config: SepSynthesisConfig, duration_s: float,
                   start_time_ms: float = 0.0) -> SepTrace:
    """Synthesize a SEP trace of ``duration_s`` seconds.

    The carrier phase is a function of absolute trace time minus
    ``config.phase_offset_ms``, so traces generated at different start times
    agree on the underlying waveform. Deterministic for a given seed.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    n = int(round(duration_s * config.sample_rate_hz))
    if n < 1:
        raise ValueError("duration too short for one sample")
    rng = np.random.default_rng(config.rng_seed)
    local_times = start_time_ms + np.arange(n) * (MS_PER_S / config.sample_rate_hz)
    values = _synthesize_values(config, local_times - config.phase_offset_ms, rng)
    return SepTrace(start_time_ms, config.sample_rate_hz, values)


def synthesize_sep_mapped(config: SepSynthesisConfig, duration_s: float,
                          start_time_ms: float, waveform_time_of_local) -> SepTrace:
    """Like :func:`synthesize_sep`, but the carrier phase at each local sample
    time is taken from ``waveform_time_of_local(local_times_ms)``.

    Used by the simulator to sample a reference-time waveform through a
    drifting, offset node clock with an extra comb displacement.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    n = int(round(duration_s * config.sample_rate_hz))
    rng = np.random.default_rng(config.rng_seed)
    local_times = start_time_ms + np.arange(n) * (MS_PER_S / config.sample_rate_hz)
    values = _synthesize_values(config, np.asarray(waveform_time_of_local(local_times),
                                                   dtype=float), rng)
    return SepTrace(start_time_ms, config.sample_rate_hz, values)


def measure_signal_strength(trace: SepTrace, mains_frequency_hz: float = 50.0) -> float:
    """Estimate signal strength by projecting onto the mains quadratures.

    Robust to DC offset and baseline drift (both nearly orthogonal to the
    carrier over a multi-cycle window). Returns sigma/0.354 of the carrier.
    """
    t = trace.times_ms() / MS_PER_S
    x = trace.samples - trace.samples.mean()
    w = 2.0 * math.pi * mains_frequency_hz
    a = 2.0 * np.mean(x * np.sin(w * t))
    b = 2.0 * np.mean(x * np.cos(w * t))
    sigma = math.hypot(a, b) / math.sqrt(2.0)
    return sigma / FULL_SCALE_SINE_STD


def bandpass_filter(trace: SepTrace, mains_frequency_hz: float = 50.0) -> SepTrace:
    """Apply the stored mains band-pass filter, returning a centered trace.

    The filter rejects DC (so the raw ADC offset dies after settling) and
    passes the mains carrier within 3 dB. Output length equals input length.
    """
    if trace.sample_rate_hz != BPF_DESIGN_RATE_HZ:
        raise FilterDesignError(
            f"band-pass coefficients are designed for {BPF_DESIGN_RATE_HZ} Hz, "
            f"got {trace.sample_rate_hz} Hz")
    if mains_frequency_hz not in _BPF_COEFFS:
        raise FilterDesignError(f"no band-pass design for {mains_frequency_hz} Hz mains")
    if len(trace) == 0:
        raise ValueError("cannot filter an empty trace")
    b, a = _BPF_COEFFS[mains_frequency_hz]
    y = lfilter(b, a, trace.samples)
    return SepTrace(trace.start_time_ms, trace.sample_rate_hz, y, centered=True)


def _running_mean_trailing(x: np.ndarray, window: int) -> np.ndarray:
    """Trailing running mean; windows at the head shrink to the data available."""
    if window == 1:
        return x.copy()
    csum = np.cumsum(x)
    out = np.empty_like(csum)
    out[:window] = csum[:window] / np.arange(1, min(window, x.size) + 1)
    if x.size > window:
        out[window:] = (csum[window:] - csum[:-window]) / window
    return out


def mean_removal_filter(trace: SepTrace, window: int) -> SepTrace:
    """Subtract the trailing running mean over ``window`` samples.

    The cheap alternative to the band-pass filter for baseline removal:
    output[k] = input[k] - mean(input[k-window+1 .. k]).
    """
    if window < 1 or window > len(trace):
        raise ValueError(f"window must lie in [1, {len(trace)}], got {window}")
    y = trace.samples - _running_mean_trailing(trace.samples, window)
    return SepTrace(trace.start_time_ms, trace.sample_rate_hz, y, centered=True)


# Minimum sample-to-sample swing for a crossing, far below one ADC step but
# above the numerical residue a filtered flat trace leaves behind.
ZC_DEADBAND = 1e-9


def detect_zero_crossings(trace: SepTrace, clock_id: str = "") -> ZcStream:
    """Detect negative-to-positive crossings with sub-sample interpolation.

    A crossing between samples k (negative) and k+1 (non-negative) is placed
    at the linear interpolation of the zero level. Positive-to-negative
    changes are ignored, as are sub-deadband swings (a flattened signal
    yields an empty stream, not numerical garbage). An empty stream is a
    valid result.
    """
    x = trace.samples
    if x.size < 2:
        return ZcStream(np.empty(0), clock_id)
    rise = (x[:-1] < 0.0) & (x[1:] >= 0.0) & (x[1:] - x[:-1] > ZC_DEADBAND)
    idx = np.nonzero(rise)[0]
    if idx.size == 0:
        return ZcStream(np.empty(0), clock_id)
    frac = -x[idx] / (x[idx + 1] - x[idx])
    times = trace.start_time_ms + (idx + frac) * trace.dt_ms
    return ZcStream(times, clock_id)


def condition_trace(trace: SepTrace, filter_kind: str = "bpf",
                    mains_frequency_hz: float = 50.0,
                    mrf_window: int | None = None,
                    settle_s: float = DEFAULT_SETTLE_S,
                    clock_id: str = "") -> ZcStream:
    """Full conditioning: filter, discard the settling transient, detect ZCs.

    ``filter_kind`` is "bpf" or "mrf"; the mean-removal window defaults to
    one mains cycle. The first ``settle_s`` seconds of filtered output are
    discarded so the filter transient never reaches the crossing detector.
    """
    if filter_kind == "bpf":
        filtered = bandpass_filter(trace, mains_frequency_hz)
    elif filter_kind == "mrf":
        window = mrf_window or int(round(trace.sample_rate_hz / mains_frequency_hz))
        filtered = mean_removal_filter(trace, window)
    else:
        raise ValueError(f"unknown filter kind: {filter_kind!r}")
    skip = int(round(settle_s * trace.sample_rate_hz))
    if skip >= len(filtered):
        raise ValueError("trace shorter than the settling interval")
    trimmed = SepTrace(filtered.start_time_ms + skip * filtered.dt_ms,
                       filtered.sample_rate_hz, filtered.samples[skip:],
                       centered=True)
    return detect_zero_crossings(trimmed, clock_id)


def scaled_trace(trace: SepTrace, factor: float, quantization_bits: int = 10) -> SepTrace:
    """Scale the AC part of a raw trace about mid-scale and re-quantize.

    Used by the strength sweep: factor < 1 attenuates toward a flat
    mid-scale trace, mimicking a weaker received signal on the same ADC.
    """
    if trace.centered:
        raise ValueError("strength scaling applies to raw [0, 1] traces")
    scaled = 0.5 + (trace.samples - 0.5) * factor
    return SepTrace(trace.start_time_ms, trace.sample_rate_hz,
                    quantize(scaled, quantization_bits))
