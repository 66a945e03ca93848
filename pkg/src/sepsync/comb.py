"""Dirac combs: PLL stabilization of zero-crossing streams and phase lookup.

The software PLL turns a jittery, gappy zero-crossing stream into a nearly
periodic impulse train (a Dirac comb). A PI controller nudges the impulse
phase and period toward the incoming crossings; crossings further than a
skip threshold from the predicted impulse are ignored, and after a run of
missed inputs the loop free-runs and then re-acquires with a bounded
per-step correction so comb gaps stay near the period.

Gains were chosen with scripts/tune_pll.py against the behavioral targets
(jitter spread reduction, outage drift, recovery speed, convergence time).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sepsync.signals import ZcStream

# Tracking-loop realization constants (see scripts/tune_pll.py).
TRACK_CLAMP_MS = 1.5          # cap on a single tracking phase correction
REACQUIRE_AFTER_MISSES = 3    # consecutive unmatched impulses before re-acquiring
REACQUIRE_GAIN = 0.8          # phase gain while re-acquiring
REACQUIRE_CLAMP_MS = 1.2      # cap per re-acquisition step, keeps gaps within 10%
REACQUIRE_EXIT_MS = 0.8       # error below this returns the loop to tracking


class PllLockError(RuntimeError):
    """The input stream has too few crossings for the loop to lock."""


@dataclass(frozen=True)
class DiracComb:
    """Strictly increasing impulse times (ms) with their mean period."""

    impulses: np.ndarray
    period_ms: float = 0.0

    def __post_init__(self):
        impulses = np.asarray(self.impulses, dtype=float)
        object.__setattr__(self, "impulses", impulses)
        if impulses.size < 2:
            raise ValueError("a comb needs at least two impulses")
        gaps = np.diff(impulses)
        if not np.all(gaps > 0):
            raise ValueError("impulse times must be strictly increasing")
        period = float(gaps.mean())
        object.__setattr__(self, "period_ms", period)
        if np.any(np.abs(gaps - period) > 0.1 * period + 1e-9):
            raise ValueError("impulse gaps deviate more than 10% from the period")

    def __len__(self) -> int:
        return int(self.impulses.size)

    @property
    def start_ms(self) -> float:
        return float(self.impulses[0])

    @property
    def end_ms(self) -> float:
        return float(self.impulses[-1])


@dataclass(frozen=True)
class PllConfig:
    nominal_period_ms: float = 20.0
    proportional_gain: float = 0.07
    integral_gain: float = 0.002
    skip_threshold_ms: float = 25.0
    convergence_window: int = 10

    def __post_init__(self):
        if self.proportional_gain <= 0 or self.integral_gain <= 0:
            raise ValueError("controller gains must be positive")
        if not 0.0 < self.skip_threshold_ms < 2.0 * self.nominal_period_ms:
            raise ValueError("skip threshold must lie in (0, 2 * nominal period)")
        if self.convergence_window < 1:
            raise ValueError("convergence_window must be >= 1")


def _clamp(x: float, bound: float) -> float:
    return max(-bound, min(bound, x))


def _fold(err: float, period: float) -> float:
    """Fold a time difference into (-T/2, T/2]; comb phase is periodic, so a
    crossing one whole period away carries no phase information."""
    return err - period * round(err / period)


def _pll_impulses(zc_times: np.ndarray, config: PllConfig) -> np.ndarray:
    """Run the loop over a buffered crossing stream, offline."""
    kp = config.proportional_gain
    ki = config.integral_gain
    skip = config.skip_threshold_ms

    t = float(zc_times[0])
    period = config.nominal_period_ms
    impulses = [t]
    j = 1                 # next unconsumed input crossing
    misses = 0
    reacquiring = False
    n = zc_times.size
    last = float(zc_times[-1])

    while t < last:
        t_pred = t + period
        # Crossings trailing the prediction by more than the threshold are
        # the "large time difference" inputs the controller skips outright.
        while j < n and zc_times[j] < t_pred - skip:
            j += 1
        matched = False
        if j < n and zc_times[j] <= t_pred + skip:
            while j + 1 < n and abs(zc_times[j + 1] - t_pred) <= abs(zc_times[j] - t_pred):
                j += 1
            err = _fold(float(zc_times[j]) - t_pred, period)
            j += 1
            matched = True

        if matched:
            misses = 0
            if reacquiring:
                t = t_pred + _clamp(REACQUIRE_GAIN * err, REACQUIRE_CLAMP_MS)
                if abs(err) < REACQUIRE_EXIT_MS:
                    reacquiring = False
            else:
                period += ki * err
                t = t_pred + _clamp(kp * err, TRACK_CLAMP_MS)
        else:
            misses += 1
            if misses >= REACQUIRE_AFTER_MISSES:
                reacquiring = True
            t = t_pred
        impulses.append(t)

    return np.asarray(impulses)


def run_pll(zcs: ZcStream, config: PllConfig = PllConfig()) -> DiracComb:
    """Stabilize a crossing stream into a Dirac comb covering its time span."""
    if len(zcs) < config.convergence_window:
        raise PllLockError(
            f"need at least {config.convergence_window} crossings, got {len(zcs)}")
    return DiracComb(_pll_impulses(zcs.crossings, config))


def comb_displacements(comb: DiracComb, zcs: ZcStream) -> np.ndarray:
    """Distance (ms) from each input crossing to its nearest comb impulse."""
    imp = comb.impulses
    idx = np.searchsorted(imp, zcs.crossings)
    left = np.clip(idx - 1, 0, imp.size - 1)
    right = np.clip(idx, 0, imp.size - 1)
    return np.minimum(np.abs(zcs.crossings - imp[left]),
                      np.abs(zcs.crossings - imp[right]))


def pll_convergence_time(zcs: ZcStream, config: PllConfig = PllConfig()) -> float | None:
    """Seconds from the first crossing until lock, or None if never locked.

    Lock is declared at the start of the first run of ``convergence_window``
    consecutive input crossings whose displacement from the comb stays below
    1 ms.
    """
    try:
        comb = run_pll(zcs, config)
    except ValueError:
        # The loop output never settled into a near-periodic comb.
        return None
    disp = comb_displacements(comb, zcs)
    window = config.convergence_window
    good = disp < 1.0
    if good.size < window:
        return None
    runs = np.lib.stride_tricks.sliding_window_view(good, window).all(axis=1)
    hits = np.nonzero(runs)[0]
    if hits.size == 0:
        return None
    k = int(hits[0])
    return float(zcs.crossings[k] - zcs.crossings[0]) / 1000.0


def phase_of(comb: DiracComb, t_ms: float) -> float:
    """Elapsed time from the last impulse at or before ``t_ms`` to ``t_ms``."""
    idx = int(np.searchsorted(comb.impulses, t_ms, side="right")) - 1
    if idx < 0:
        raise ValueError(f"query time {t_ms} precedes the first impulse "
                         f"{comb.impulses[0]}")
    return float(t_ms - comb.impulses[idx])
