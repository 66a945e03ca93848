"""Stochastic one-way delay models for the simulated channels.

The BLE preset reproduces the measured asymmetry of a polled slave: the
slave-to-master direction waits uniformly over the 67.5 ms connection
interval plus an 8 ms service overhead (median about 42 ms, 1% tail up to
376 ms), while the master-to-slave direction stays near 8 ms. The internet
preset is a qualitative stand-in for a high-jitter tunnel: log-normal
one-way delays with 10% heavy tails.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DelayModel:
    """One direction's delay generator (all values ms).

    kind is "uniform" (offset + U(low, high)), "lognormal" (median and
    shape sigma), or "constant". With probability tail_probability the draw
    is replaced by U(tail_low, tail_max), modeling rare long stalls.
    """

    kind: str = "constant"
    low_ms: float = 0.0
    high_ms: float = 0.0
    median_ms: float = 0.0
    sigma: float = 0.4
    offset_ms: float = 0.0
    value_ms: float = 0.0
    tail_probability: float = 0.0
    tail_low_ms: float = 0.0
    tail_max_ms: float = 0.0
    cap_ms: float = float("inf")

    def __post_init__(self):
        if self.kind not in ("uniform", "lognormal", "constant"):
            raise ValueError(f"unknown delay kind {self.kind!r}")
        if not 0.0 <= self.tail_probability < 1.0:
            raise ValueError("tail probability must lie in [0, 1)")

    def draw(self, rng: np.random.Generator) -> float:
        if self.tail_probability > 0.0 and rng.random() < self.tail_probability:
            return min(float(rng.uniform(self.tail_low_ms, self.tail_max_ms)),
                       self.cap_ms)
        if self.kind == "constant":
            return min(self.value_ms, self.cap_ms)
        if self.kind == "uniform":
            delay = self.offset_ms + float(rng.uniform(self.low_ms, self.high_ms))
        else:
            # lognormal: exp(mu) is the median of the spread above the offset
            delay = self.offset_ms + float(np.exp(
                np.log(self.median_ms) + self.sigma * rng.standard_normal()))
        return min(delay, self.cap_ms)

    def median(self) -> float:
        if self.kind == "constant":
            return self.value_ms
        if self.kind == "uniform":
            return self.offset_ms + (self.low_ms + self.high_ms) / 2.0
        return self.offset_ms + self.median_ms

    def support_min(self) -> float:
        if self.kind == "constant":
            return self.value_ms
        if self.kind == "uniform":
            return self.offset_ms + self.low_ms
        return self.offset_ms


@dataclass(frozen=True)
class LinkModel:
    """A pair of directional delay generators plus a drop probability."""

    name: str
    slave_to_master: DelayModel
    master_to_slave: DelayModel
    drop_probability: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.drop_probability < 1.0:
            raise ValueError("drop probability must lie in [0, 1)")


# Retains the link object alongside its stream so an id is never reused
# while its generator is still cached.
_LINK_RNGS: dict[int, tuple[LinkModel, np.random.Generator]] = {}


def draw_delay(link: LinkModel, direction: str,
               rng: np.random.Generator | None = None) -> float:
    """Draw one positive delay for a direction.

    Standalone calls keep a per-link stream seeded from ``link.rng_seed``;
    simulations pass their own generator so trials stay independent.
    """
    if direction == "slave_to_master":
        model = link.slave_to_master
    elif direction == "master_to_slave":
        model = link.master_to_slave
    else:
        raise ValueError(f"unknown direction {direction!r}")
    if rng is None:
        key = id(link)
        if key not in _LINK_RNGS:
            _LINK_RNGS[key] = (link, np.random.default_rng(link.rng_seed))
        rng = _LINK_RNGS[key][1]
    delay = model.draw(rng)
    return max(delay, 1e-6)


BLE_CONNECTION_INTERVAL_MS = 67.5
BLE_SERVICE_OVERHEAD_MS = 8.0


def ble_preset(seed: int = 0, drop_probability: float = 0.0) -> LinkModel:
    """Polled-slave wireless link: long uniform access delay one way, short
    delay the other, with 1% tails to the measured maxima."""
    s2m = DelayModel(kind="uniform", low_ms=0.0, high_ms=BLE_CONNECTION_INTERVAL_MS,
                     offset_ms=BLE_SERVICE_OVERHEAD_MS,
                     tail_probability=0.01, tail_low_ms=75.5, tail_max_ms=376.0)
    m2s = DelayModel(kind="uniform", low_ms=0.0, high_ms=10.0, offset_ms=3.0,
                     tail_probability=0.01, tail_low_ms=13.0, tail_max_ms=153.0)
    return LinkModel("ble", s2m, m2s, drop_probability, seed)


def internet_preset(seed: int = 0, drop_probability: float = 0.0) -> LinkModel:
    """High-jitter tunnel: onset-shifted log-normal one-way delays (medians
    60 and 45 ms) with 10% heavy tails, capped at 400 ms by timeouts.

    The onsets (27 and 8 ms) bound the achievable period counts from below,
    so a solver given i >= 1, j >= 0, both <= 20 never excludes the truth
    even with comb displacements up to 7 ms.
    """
    s2m = DelayModel(kind="lognormal", offset_ms=27.0, median_ms=29.5, sigma=0.8,
                     tail_probability=0.10, tail_low_ms=100.0, tail_max_ms=400.0,
                     cap_ms=400.0)
    m2s = DelayModel(kind="lognormal", offset_ms=8.0, median_ms=33.1, sigma=0.8,
                     tail_probability=0.10, tail_low_ms=100.0, tail_max_ms=400.0,
                     cap_ms=400.0)
    return LinkModel("internet", s2m, m2s, drop_probability, seed)


INTERNET_I_BOUNDS = (1, 20)
INTERNET_J_BOUNDS = (0, 20)


def constant_preset(delay_ms: float, delay_back_ms: float | None = None,
                    seed: int = 0, drop_probability: float = 0.0) -> LinkModel:
    """Degenerate deterministic link, mostly for tests and examples."""
    if delay_back_ms is None:
        delay_back_ms = delay_ms
    return LinkModel("constant",
                     DelayModel(kind="constant", value_ms=delay_ms),
                     DelayModel(kind="constant", value_ms=delay_back_ms),
                     drop_probability, seed)


PRESETS = {
    "ble": ble_preset,
    "internet": internet_preset,
}


def preset_by_name(name: str, seed: int = 0,
                   drop_probability: float = 0.0) -> LinkModel:
    if name not in PRESETS:
        raise ValueError(f"unknown link preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name](seed=seed, drop_probability=drop_probability)
