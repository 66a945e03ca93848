"""File format round trips and validation."""

import numpy as np
import pytest

from sepsync import storage
from sepsync.comb import DiracComb
from sepsync.protocol import make_ideal_session
from sepsync.signals import SepSynthesisConfig, ZcStream, synthesize_sep


class TestTraceRoundTrip:
    def test_round_trip(self, tmp_path):
        trace = synthesize_sep(SepSynthesisConfig(rng_seed=1), 2.0)
        path = tmp_path / "trace.csv"
        storage.write_trace_csv(path, trace)
        back = storage.read_trace_csv(path)
        assert back.sample_rate_hz == trace.sample_rate_hz
        assert np.allclose(back.samples, trace.samples, atol=1e-8)
        assert back.start_time_ms == pytest.approx(trace.start_time_ms,
                                                   abs=1e-3)

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            storage.read_trace_csv(path)

    def test_non_uniform_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time_ms,amplitude\n0.0,0.5\n1.0,0.5\n5.0,0.5\n")
        with pytest.raises(ValueError):
            storage.read_trace_csv(path)


class TestZcCombRoundTrip:
    def test_zcs(self, tmp_path):
        zcs = ZcStream(np.array([1.25, 21.5, 40.75]))
        path = tmp_path / "zcs.csv"
        storage.write_zcs_csv(path, zcs)
        back = storage.read_zcs_csv(path)
        assert np.allclose(back.crossings, zcs.crossings, atol=1e-6)

    def test_comb(self, tmp_path):
        comb = DiracComb(np.array([0.0, 20.0, 40.0, 60.0]))
        path = tmp_path / "comb.csv"
        storage.write_comb_csv(path, comb)
        back = storage.read_comb_csv(path)
        assert np.allclose(back.impulses, comb.impulses, atol=1e-6)
        assert back.period_ms == pytest.approx(comb.period_ms)

    def test_wrong_headers(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("impulse_time_ms\n0.0\n20.0\n")
        with pytest.raises(ValueError):
            storage.read_zcs_csv(path)


class TestSessionsRoundTrip:
    def test_round_trip(self, tmp_path):
        records = [make_ideal_session(50.0, 25.0, delta_gt_ms=105.0, k=1),
                   make_ideal_session(27.0, 51.0, delta_gt_ms=105.0, k=2)]
        path = tmp_path / "sessions.csv"
        storage.write_sessions_csv(path, records)
        back = storage.read_sessions_csv(path)
        assert len(back) == 2
        assert back[0].rtt == pytest.approx(records[0].rtt, abs=1e-3)
        assert back[1].theta_p == pytest.approx(records[1].theta_p, abs=1e-3)
        # truth diagnostics are simulator-only and never exported
        assert back[0].truth is None

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("k,t1\n1,2\n")
        with pytest.raises(ValueError):
            storage.read_sessions_csv(path)


class TestSummary:
    def test_round_trip_types(self, tmp_path):
        path = tmp_path / "summary.txt"
        storage.write_summary(path, {"trials": 10, "rate": 0.5,
                                     "scenario": "e2e_sync"})
        back = storage.read_summary(path)
        assert back["format_version"] == 1
        assert back["trials"] == 10
        assert back["rate"] == 0.5
        assert back["scenario"] == "e2e_sync"
