"""Session simulation, phase algebra, and candidate offsets."""

import numpy as np
import pytest

from sepsync.comb import DiracComb
from sepsync.links import ble_preset, constant_preset
from sepsync.protocol import (BufferCoverageError, Node, NodeClock,
                              SessionDropped, SessionRecord, SyncMessage,
                              candidate_offsets, make_ideal_session,
                              ntp_offset, rounded_phase_diff, run_session)

T = 20.0


class TestRoundedPhaseDiff:
    def test_direct_branch(self):
        assert rounded_phase_diff(12.0, 2.0, T) == 10.0

    def test_wraparound_branch(self):
        assert rounded_phase_diff(2.0, 12.0, T) == 10.0

    def test_equal_phases(self):
        assert rounded_phase_diff(7.5, 7.5, T) == 0.0

    def test_result_in_range(self):
        for late in np.linspace(0, T * 1.09, 23):
            for early in np.linspace(0, T * 1.09, 23):
                theta = rounded_phase_diff(late, early, T)
                assert 0.0 <= theta < T


class TestNodeClock:
    def test_reads_are_quantized(self):
        clock = NodeClock(0.123456789)
        assert clock.local_at(1000.0) == pytest.approx(1000.123, abs=5e-4)
        assert round(clock.local_at(1000.0) * 1000) / 1000 == pytest.approx(
            clock.local_at(1000.0))

    def test_drift_scales_time(self):
        clock = NodeClock(0.0, drift_ppm=50.0)
        assert clock.local_at(1e6) == pytest.approx(1e6 + 50.0, abs=1e-3)

    def test_drift_bound(self):
        with pytest.raises(ValueError):
            NodeClock(0.0, drift_ppm=150.0)

    def test_round_trip(self):
        clock = NodeClock(37.5, drift_ppm=-20.0)
        ref = 123456.789
        assert clock.ref_at(clock.local_at(ref)) == pytest.approx(ref, abs=1e-3)


class TestSyncMessage:
    def test_request_carries_no_payload(self):
        with pytest.raises(ValueError):
            SyncMessage("request", t2=1.0)

    def test_reply2_requires_full_payload(self):
        with pytest.raises(ValueError):
            SyncMessage("reply2", t2=1.0, t3=2.0, phi2=0.5)

    def test_reply2_phase_validation(self):
        msg = SyncMessage("reply2", t2=1.0, t3=2.0, phi2=5.0, phi3=25.0)
        with pytest.raises(ValueError):
            msg.validate_phases(T)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            SyncMessage("reply3")


class TestRunSession:
    def test_symmetric_subperiod_link(self):
        # i = j = 0: the two rounded phase differences account for the
        # whole round trip
        rec = make_ideal_session(5.0, 5.0, delta_gt_ms=33.0)
        assert rec.theta_q + rec.theta_p == pytest.approx(rec.rtt, abs=1e-6)
        assert (rec.truth.i, rec.truth.j) == (0, 0)

    def test_worked_decomposition_50_8(self):
        rec = make_ideal_session(50.0, 8.0, delta_gt_ms=105.0)
        assert rec.rtt == pytest.approx(58.0, abs=1e-6)
        assert rec.theta_q == pytest.approx(10.0, abs=1e-6)
        assert rec.theta_p == pytest.approx(8.0, abs=1e-6)
        assert (rec.truth.i, rec.truth.j) == (2, 0)
        assert rec.theta_q + rec.theta_p + (2 + 0) * T == pytest.approx(
            rec.rtt, abs=1e-6)

    def test_link_drop_aborts_session(self):
        link = constant_preset(10.0, drop_probability=0.999999)
        slave = Node(NodeClock(5.0), period_ms=T)
        master = Node(NodeClock(0.0), period_ms=T)
        with pytest.raises(SessionDropped):
            run_session(slave, master, link, t1_ref_ms=5000.0,
                        rng=np.random.default_rng(0))

    def test_epsilon_decomposition(self):
        # tau_q = theta_q + i T - eps and tau_p = theta_p + j T + eps
        for eps in (-6.0, -2.5, 0.0, 3.0, 6.0):
            rec = make_ideal_session(47.0, 31.0, delta_gt_ms=-200.0,
                                     epsilon_ms=eps)
            tr = rec.truth
            assert rec.theta_q + tr.i * T - eps == pytest.approx(47.0, abs=1e-3)
            assert rec.theta_p + tr.j * T + eps == pytest.approx(31.0, abs=1e-3)

    def test_offset_formulas_agree(self):
        # request-side and reply-side offset forms give the same value
        for drift in (0.0, 40.0):
            rec = make_ideal_session(50.0, 25.0, delta_gt_ms=105.0,
                                     slave_drift_ppm=drift)
            tr = rec.truth
            lhs = rec.t1 - rec.t2 + rec.theta_q + tr.i * T
            rhs = rec.t4 - rec.t3 - rec.theta_p - tr.j * T
            assert lhs == pytest.approx(rhs, abs=0.2)

    def test_comb_coverage_enforced(self):
        comb = DiracComb(np.arange(10) * T)  # ends at 180 ms
        slave = Node(NodeClock(0.0), comb=comb, period_ms=T)
        master = Node(NodeClock(0.0), period_ms=T)
        link = constant_preset(10.0)
        with pytest.raises(BufferCoverageError):
            run_session(slave, master, link, t1_ref_ms=5000.0,
                        tau_q_ms=10.0, tau_p_ms=10.0)

    def test_record_validation(self):
        with pytest.raises(ValueError):
            SessionRecord(1, 100.0, 50.0, 60.0, 90.0, 0, 0, 0, 0, 0, 0, 30.0)
        with pytest.raises(ValueError):
            SessionRecord(1, 100.0, 60.0, 50.0, 190.0, 0, 0, 0, 0, 0, 0, 30.0)


class TestNtpOffset:
    def test_symmetric_link_is_exact(self):
        rec = make_ideal_session(30.0, 30.0, delta_gt_ms=77.0)
        assert ntp_offset(rec) == pytest.approx(77.0, abs=1e-3)

    def test_asymmetry_error_is_half_difference(self):
        rec = make_ideal_session(50.0, 8.0, delta_gt_ms=105.0)
        assert ntp_offset(rec) - 105.0 == pytest.approx(-21.0, abs=1e-3)

    def test_zero_delay_edge(self):
        rec = make_ideal_session(0.0, 0.0, delta_gt_ms=12.0)
        assert rec.rtt == 0.0
        assert ntp_offset(rec) == rec.t4 - rec.t3
        assert ntp_offset(rec) == pytest.approx(12.0, abs=1e-3)


class TestCandidateOffsets:
    def test_worked_example_session_one(self):
        rec = make_ideal_session(50.0, 25.0, delta_gt_ms=105.0,
                                 t1_ref_ms=1000.0, k=1)
        assert rec.rtt == pytest.approx(75.0)
        assert rec.t4 - rec.t3 == pytest.approx(130.0)
        cands = candidate_offsets(rec, T, (1, 4), (1, 4))
        assert [(c.i, c.j, round(c.delta, 6)) for c in cands] == [
            (1, 2, 85.0), (2, 1, 105.0)]

    def test_worked_example_session_two(self):
        rec = make_ideal_session(27.0, 51.0, delta_gt_ms=105.0,
                                 t1_ref_ms=2000.0, compute_ms=7.0, k=2)
        assert rec.rtt == pytest.approx(78.0)
        assert rec.t4 - rec.t3 == pytest.approx(156.0)
        cands = candidate_offsets(rec, T, (1, 4), (1, 4))
        assert [(c.i, c.j, round(c.delta, 6)) for c in cands] == [
            (1, 2, 105.0), (2, 1, 125.0)]

    def test_subperiod_delays_single_candidate(self):
        rec = make_ideal_session(6.0, 9.0, delta_gt_ms=50.0)
        cands = candidate_offsets(rec, T, (0, 0), (0, 0))
        assert len(cands) == 1
        assert cands[0].i == cands[0].j == 0
        assert cands[0].delta == pytest.approx(
            rec.t4 - rec.t3 - rec.theta_p, abs=1e-9)

    def test_default_ranges_cover_truth(self):
        rec = make_ideal_session(113.0, 57.0, delta_gt_ms=-42.0)
        cands = candidate_offsets(rec, T)
        truth = (rec.truth.i, rec.truth.j)
        assert truth in {(c.i, c.j) for c in cands}
        best = min(cands, key=lambda c: abs(c.delta - (-42.0)))
        assert best.delta == pytest.approx(-42.0, abs=1e-3)

    def test_candidates_spaced_one_period(self):
        rec = make_ideal_session(90.0, 70.0, delta_gt_ms=0.0)
        cands = candidate_offsets(rec, T)
        deltas = sorted(c.delta for c in cands)
        assert np.allclose(np.diff(deltas), T, atol=1e-6)

    def test_bad_ranges_rejected(self):
        rec = make_ideal_session(10.0, 10.0)
        with pytest.raises(ValueError):
            candidate_offsets(rec, T, (-1, 3), None)
        with pytest.raises(ValueError):
            candidate_offsets(rec, T, None, (4, 2))

    def test_inconsistent_session_yields_empty(self):
        rec = SessionRecord(1, 1000.0, 1030.0, 1035.0, 1080.0,
                            0.0, 3.0, 8.0, 1.0, 3.0, 13.0, 45.0)
        # rtt - thetas = 29, no multiple of 20 within 5
        assert candidate_offsets(rec, T) == []

    def test_match_tolerance_widens_admission(self):
        rec = SessionRecord(1, 1000.0, 1030.0, 1035.0, 1080.0,
                            0.0, 3.0, 8.0, 1.0, 3.0, 13.0, 45.0)
        # 29 is 9 away from 20 and 11 away from 40
        assert len(candidate_offsets(rec, T, match_tol_ms=9.5)) == 2
        assert candidate_offsets(rec, T, match_tol_ms=2.0) == []


class TestSessionOverLink:
    def test_ble_preset_truth_consistency(self):
        rng = np.random.default_rng(4)
        link = ble_preset()
        slave = Node(NodeClock(250.0), comb_shift_ms=1.5, period_ms=T)
        master = Node(NodeClock(0.0), period_ms=T)
        for k in range(200):
            rec = run_session(slave, master, link,
                              t1_ref_ms=1000.0 + 500.0 * k, rng=rng, k=k + 1)
            tr = rec.truth
            assert rec.rtt == pytest.approx(tr.tau_q_ms + tr.tau_p_ms, abs=1e-2)
            assert tr.i >= 0 and tr.j >= 0
            # the round trip decomposes into phases plus whole periods
            assert rec.theta_q + rec.theta_p + (tr.i + tr.j) * T == \
                pytest.approx(rec.rtt, abs=1e-2)
            for phi in (rec.phi1, rec.phi2, rec.phi3, rec.phi4):
                assert 0.0 <= phi < T * 1.1
