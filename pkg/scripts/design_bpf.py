#!/usr/bin/env python3
"""Regenerate the band-pass filter constants stored in sepsync/signals.py.

Designs an order-2 Butterworth band-pass (4 poles, 5 taps) at the 333 Hz
sampling rate with a 10 Hz passband around each supported mains frequency,
then prints the coefficient literals and the response margins against the
conditioning requirements:

  - DC attenuated by at least 40 dB
  - mains carrier passed within 3 dB
  - 150 Hz attenuated by at least 20 dB

Run:  python scripts/design_bpf.py
"""

import numpy as np
from scipy import signal

SAMPLE_RATE_HZ = 333.0
BANDS = {50.0: (45.0, 55.0), 60.0: (55.0, 65.0)}


def main() -> None:
    for mains, band in BANDS.items():
        b, a = signal.butter(2, band, btype="bandpass", fs=SAMPLE_RATE_HZ)
        print(f"# mains {mains:g} Hz, passband {band}")
        print(f"b = {list(b)!r}")
        print(f"a = {list(a)!r}")

        probe = [1e-9, mains, 100.0, 150.0]
        _, h = signal.freqz(b, a, worN=probe, fs=SAMPLE_RATE_HZ)
        gains = 20 * np.log10(np.maximum(np.abs(h), 1e-300))
        print(f"  DC gain        {gains[0]:9.1f} dB   (require <= -40)")
        print(f"  {mains:g} Hz gain    {gains[1]:9.3f} dB   (require >= -3)")
        print(f"  100 Hz gain    {gains[2]:9.1f} dB")
        print(f"  150 Hz gain    {gains[3]:9.1f} dB   (require <= -20)")
        poles = np.abs(np.roots(a))
        print(f"  stable: {bool(np.all(poles < 1.0))} (max |pole| = {poles.max():.4f})")
        print()


if __name__ == "__main__":
    main()
