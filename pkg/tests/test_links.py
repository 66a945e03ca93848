"""Delay model presets and their measured statistics."""

import numpy as np
import pytest

from sepsync.links import (DelayModel, LinkModel, ble_preset, constant_preset,
                           draw_delay, internet_preset, preset_by_name)


def draws(link, direction, n, seed=0):
    rng = np.random.default_rng(seed)
    return np.array([draw_delay(link, direction, rng) for _ in range(n)])


class TestBlePreset:
    def test_slave_to_master_median(self):
        delays = draws(ble_preset(), "slave_to_master", 10_000)
        assert abs(np.median(delays) - 42.0) <= 3.0

    def test_master_to_slave_median(self):
        delays = draws(ble_preset(), "master_to_slave", 10_000)
        assert abs(np.median(delays) - 8.0) <= 2.0

    def test_tail_reaches_measured_maximum(self):
        delays = draws(ble_preset(), "slave_to_master", 20_000)
        assert delays.max() > 300.0
        assert (delays > 75.5).mean() == pytest.approx(0.01, abs=0.005)

    def test_all_draws_positive(self):
        for direction in ("slave_to_master", "master_to_slave"):
            assert draws(ble_preset(), direction, 5000).min() > 0.0


class TestInternetPreset:
    def test_medians(self):
        link = internet_preset()
        s2m = draws(link, "slave_to_master", 20_000)
        m2s = draws(link, "master_to_slave", 20_000)
        assert abs(np.median(s2m) - 60.0) <= 5.0
        assert abs(np.median(m2s) - 45.0) <= 5.0

    def test_heavy_tail_share(self):
        delays = draws(internet_preset(), "slave_to_master", 20_000)
        assert (delays >= 100.0).mean() >= 0.10

    def test_delays_capped(self):
        link = internet_preset()
        for direction in ("slave_to_master", "master_to_slave"):
            assert draws(link, direction, 20_000).max() <= 400.0

    def test_support_minimums(self):
        link = internet_preset()
        assert draws(link, "slave_to_master", 20_000).min() >= 27.0
        assert draws(link, "master_to_slave", 20_000).min() >= 8.0


class TestConstantPreset:
    def test_every_draw_exact(self):
        link = constant_preset(10.0)
        assert np.all(draws(link, "slave_to_master", 100) == 10.0)
        assert np.all(draws(link, "master_to_slave", 100) == 10.0)

    def test_asymmetric_constant(self):
        link = constant_preset(50.0, 8.0)
        assert draw_delay(link, "slave_to_master",
                          np.random.default_rng(0)) == 50.0
        assert draw_delay(link, "master_to_slave",
                          np.random.default_rng(0)) == 8.0


class TestValidation:
    def test_unknown_direction(self):
        with pytest.raises(ValueError):
            draw_delay(ble_preset(), "sideways", np.random.default_rng(0))

    def test_unknown_preset_name(self):
        with pytest.raises(ValueError):
            preset_by_name("carrier-pigeon")

    def test_bad_drop_probability(self):
        with pytest.raises(ValueError):
            constant_preset(10.0, drop_probability=1.0)

    def test_bad_delay_kind(self):
        with pytest.raises(ValueError):
            DelayModel(kind="levy")

    def test_standalone_draws_are_seeded(self):
        a = LinkModel("x", DelayModel(kind="uniform", low_ms=0, high_ms=10),
                      DelayModel(kind="constant", value_ms=1.0), rng_seed=5)
        b = LinkModel("x", DelayModel(kind="uniform", low_ms=0, high_ms=10),
                      DelayModel(kind="constant", value_ms=1.0), rng_seed=5)
        seq_a = [draw_delay(a, "slave_to_master") for _ in range(10)]
        seq_b = [draw_delay(b, "slave_to_master") for _ in range(10)]
        assert seq_a == seq_b
