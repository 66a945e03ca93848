"""End-to-end experiment runners over simulated links.

A trial pairs a slave and a master clock, runs synchronization sessions
through a stochastic link, and feeds them to the ambiguity solver. In
``e2e_sync`` mode each node's phases come from the full signal pipeline
(synthesized SEP, filter, crossing detector, PLL); in ``ntp_baseline`` mode
phases come from ideal combs so thousands of sessions stay cheap while the
delay asymmetry, comb displacement, and solver behavior are identical.

All trials derive their random streams from (seed, trial_index), so results
are reproducible and independent of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from sepsync.comb import DiracComb, PllConfig, run_pll
from sepsync.links import LinkModel, ble_preset
from sepsync.protocol import (Node, NodeClock, SessionRecord, ntp_offset,
                              run_session)
from sepsync.signals import (SepSynthesisConfig, SepTrace, condition_trace,
                             scaled_trace, synthesize_sep,
                             synthesize_sep_mapped)
from sepsync.solver import SolverConfig, solve

MS_PER_S = 1000.0

# Buffer margins around a session, in ms: the filter settling interval plus
# the one-second safeguard plus PLL lock-in slack before t1, and the
# safeguard after t4.
PRE_SESSION_MARGIN_MS = 2600.0
POST_SESSION_MARGIN_MS = 1200.0


@dataclass(frozen=True)
class EpsilonModel:
    """Comb displacement between the two nodes (positive: slave comb lags).

    A constant part, an optional per-trial uniform draw in
    [-draw_max_ms, draw_max_ms], and an optional slow sinusoidal wander
    (hour-scale period; the amplitude is the tested contract, the waveform
    is a stand-in for daily grid-phase variation).
    """

    constant_ms: float = 0.0
    draw_max_ms: float = 0.0
    wander_amplitude_ms: float = 0.0
    wander_period_s: float = 3600.0
    wander_phase_rad: float = 0.0

    def draw_trial(self, rng: np.random.Generator) -> float:
        if self.draw_max_ms > 0.0:
            return float(rng.uniform(-self.draw_max_ms, self.draw_max_ms))
        return 0.0

    def value_at(self, ref_ms: float, trial_draw: float = 0.0) -> float:
        eps = self.constant_ms + trial_draw
        if self.wander_amplitude_ms > 0.0:
            eps += self.wander_amplitude_ms * math.sin(
                2.0 * math.pi * ref_ms / (self.wander_period_s * MS_PER_S)
                + self.wander_phase_rad)
        return eps

    def max_magnitude(self) -> float:
        return (abs(self.constant_ms) + self.draw_max_ms
                + abs(self.wander_amplitude_ms))


SCENARIOS = ("e2e_sync", "ntp_baseline", "convergence_study",
             "pipeline_bench", "strength_sweep")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: scenario, link, per-node signal models, and seeds."""

    scenario: str = "e2e_sync"
    link: LinkModel = field(default_factory=ble_preset)
    sep_slave: SepSynthesisConfig = SepSynthesisConfig()
    sep_master: SepSynthesisConfig = SepSynthesisConfig()
    epsilon: EpsilonModel = EpsilonModel()
    trials: int = 100
    seed: int = 0
    solver: SolverConfig = SolverConfig()
    pll: PllConfig = PllConfig()
    filter_kind: str = "bpf"
    compute_ms: float = 5.0
    offset_range_ms: tuple[float, float] = (-500.0, 500.0)
    slave_drift_ppm: float = 0.0
    master_drift_ppm: float = 0.0
    sessions: int = 1000            # session count for ntp_baseline
    sweep_strength: float = 0.34    # baseline strength for strength_sweep
    sweep_factors: tuple[float, ...] = (1.0, 0.5, 0.2, 0.1, 0.05, 1.0 / 60.0,
                                        0.005, 0.0005)
    sweep_duration_s: float = 12.0
    out_dir: str | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        period = self.solver.period_ms
        if self.scenario == "e2e_sync" and self.epsilon.max_magnitude() >= period / 2:
            raise ValueError("epsilon magnitude must stay below half a period")


@dataclass
class TrialRow:
    trial: int
    converged: bool
    k: int
    restarts: int
    drops: int
    delta_est_ms: float | None
    delta_gt_ms: float
    delta_error_ms: float | None
    epsilon_ms: float


@dataclass
class SessionErrorRow:
    trial: int
    k: int
    rtt_ms: float
    ntp_error_ms: float


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    trial_rows: list[TrialRow]
    session_rows: list[SessionErrorRow]
    summary: dict


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, trial)))


def _node_comb_from_pipeline(config: ExperimentConfig, clock: NodeClock,
                             sep: SepSynthesisConfig, eps_node_ms: float,
                             window_local: tuple[float, float],
                             rng: np.random.Generator, clock_id: str) -> DiracComb:
    """Synthesize, condition, and lock one node's comb around a session.

    The node samples its ADC on its own clock; the underlying waveform lives
    in reference time, displaced by this node's share of the comb offset.
    """
    start_local = window_local[0] - PRE_SESSION_MARGIN_MS
    duration_s = (window_local[1] + POST_SESSION_MARGIN_MS - start_local) / MS_PER_S
    sep_seeded = replace(sep, rng_seed=int(rng.integers(2 ** 31)))

    def waveform_time(local_times_ms: np.ndarray) -> np.ndarray:
        ref = (local_times_ms - clock.true_time_offset_ms) / (1.0 + clock.drift_ppm * 1e-6)
        return ref - eps_node_ms

    trace = synthesize_sep_mapped(sep_seeded, duration_s, start_local, waveform_time)
    zcs = condition_trace(trace, config.filter_kind,
                          sep_seeded.mains_frequency_hz, clock_id=clock_id)
    return run_pll(zcs, config.pll)


def _session_stream(config: ExperimentConfig, rng: np.random.Generator,
                    slave_clock: NodeClock, master_clock: NodeClock,
                    eps_trial: float, full_pipeline: bool,
                    drops: list[int], collected: list[SessionRecord],
                    max_records: int | None = None) -> Iterator[SessionRecord]:
    """Yield session records on demand, simulating each exchange."""
    period = config.solver.period_ms
    cursor = float(rng.uniform(0.0, 60_000.0))
    k = 0
    while max_records is None or k < max_records:
        # Fixed draw order per exchange: drop?, tau_q, drop?, tau_p, gap.
        lost = config.link.drop_probability > 0 and (
            rng.random() < config.link.drop_probability)
        tau_q = config.link.slave_to_master.draw(rng)
        lost |= config.link.drop_probability > 0 and (
            rng.random() < config.link.drop_probability)
        tau_p = config.link.master_to_slave.draw(rng)
        gap = float(rng.uniform(50.0, 150.0))
        if lost:
            drops[0] += 1
            cursor += 500.0 + gap
            continue

        k += 1
        eps_now = config.epsilon.value_at(cursor, eps_trial)
        r1 = cursor
        r4 = r1 + tau_q + config.compute_ms + tau_p
        if full_pipeline:
            slave_window = (slave_clock.local_at(r1), slave_clock.local_at(r4))
            master_window = (master_clock.local_at(r1 + tau_q),
                             master_clock.local_at(r1 + tau_q + config.compute_ms))
            slave = Node(slave_clock,
                         comb=_node_comb_from_pipeline(
                             config, slave_clock, config.sep_slave, eps_now,
                             slave_window, rng, "slave"),
                         comb_shift_ms=eps_now, period_ms=period, clock_id="slave")
            master = Node(master_clock,
                          comb=_node_comb_from_pipeline(
                              config, master_clock, config.sep_master, 0.0,
                              master_window, rng, "master"),
                          comb_shift_ms=0.0, period_ms=period, clock_id="master")
        else:
            slave = Node(slave_clock, comb_shift_ms=eps_now, period_ms=period,
                         clock_id="slave")
            master = Node(master_clock, comb_shift_ms=0.0, period_ms=period,
                          clock_id="master")

        rec = run_session(slave, master, config.link, t1_ref_ms=r1,
                          compute_ms=config.compute_ms, k=k,
                          tau_q_ms=tau_q, tau_p_ms=tau_p)
        collected.append(rec)
        cursor = r4 + gap
        yield rec


def run_e2e(config: ExperimentConfig) -> ExperimentReport:
    """Run seeded synchronization trials and aggregate both estimators.

    Each trial draws a ground-truth offset and a comb displacement, runs
    sessions through the solver until convergence (or gives up), and logs
    the per-session symmetric-link baseline error for comparison.
    Non-convergence is counted, not fatal.
    """
    full_pipeline = config.scenario == "e2e_sync"
    trial_rows: list[TrialRow] = []
    session_rows: list[SessionErrorRow] = []

    for trial in range(config.trials):
        rng = _trial_rng(config.seed, trial)
        delta_gt = float(rng.uniform(*config.offset_range_ms))
        eps_trial = config.epsilon.draw_trial(rng)
        slave_clock = NodeClock(delta_gt, config.slave_drift_ppm)
        master_clock = NodeClock(0.0, config.master_drift_ppm)

        drops = [0]
        collected: list[SessionRecord] = []
        stream = _session_stream(config, rng, slave_clock, master_clock,
                                 eps_trial, full_pipeline, drops, collected)
        result = solve(stream, config.solver)

        truth_delta = (collected[-1].truth.delta_gt_ms if collected
                       else delta_gt)
        err = (result.delta_ms - truth_delta) if result.converged else None
        trial_rows.append(TrialRow(
            trial, result.converged, result.sessions_used, result.restarts,
            drops[0], result.delta_ms, truth_delta, err,
            config.epsilon.value_at(0.0, eps_trial)))
        for rec in collected:
            session_rows.append(SessionErrorRow(
                trial, rec.k, rec.rtt,
                ntp_offset(rec) - rec.truth.delta_gt_ms))

    summary = _summarize(config, trial_rows, session_rows)
    return ExperimentReport(config, trial_rows, session_rows, summary)


def run_ntp_baseline(config: ExperimentConfig) -> ExperimentReport:
    """Per-session baseline errors plus solver processes over one stream.

    Generates ``config.sessions`` sessions on a single clock pair with
    ideal combs, reports every session's symmetric-link error, and chunks
    the same stream into consecutive solver processes for the side-by-side
    comparison.
    """
    rng = _trial_rng(config.seed, 0)
    delta_gt = float(rng.uniform(*config.offset_range_ms))
    eps_trial = config.epsilon.draw_trial(rng)
    slave_clock = NodeClock(delta_gt, config.slave_drift_ppm)
    master_clock = NodeClock(0.0, config.master_drift_ppm)

    drops = [0]
    collected: list[SessionRecord] = []
    stream = _session_stream(config, rng, slave_clock, master_clock,
                             eps_trial, False, drops, collected,
                             max_records=config.sessions)

    trial_rows: list[TrialRow] = []
    process = 0
    while True:
        result = solve(stream, config.solver)
        if result.reason == "session stream exhausted":
            # Incomplete final process: the stream ran dry mid-attempt.
            break
        rec = collected[-1] if collected else None
        truth_delta = rec.truth.delta_gt_ms if rec else delta_gt
        err = (result.delta_ms - truth_delta) if result.converged else None
        trial_rows.append(TrialRow(
            process, result.converged, result.sessions_used, result.restarts,
            drops[0], result.delta_ms, truth_delta, err,
            config.epsilon.value_at(0.0, eps_trial)))
        process += 1

    session_rows = [SessionErrorRow(0, rec.k, rec.rtt,
                                    ntp_offset(rec) - rec.truth.delta_gt_ms)
                    for rec in collected]
    summary = _summarize(config, trial_rows, session_rows)
    return ExperimentReport(config, trial_rows, session_rows, summary)


def _summarize(config: ExperimentConfig, trial_rows: list[TrialRow],
               session_rows: list[SessionErrorRow]) -> dict:
    conv = [r for r in trial_rows if r.converged]
    errors = np.array([abs(r.delta_error_ms) for r in conv]) if conv else np.array([])
    ks = np.array([r.k for r in conv]) if conv else np.array([])
    ntp = np.array([abs(r.ntp_error_ms) for r in session_rows]) if session_rows \
        else np.array([])
    summary: dict = {
        "scenario": config.scenario,
        "seed": config.seed,
        "trials": len(trial_rows),
        "sessions": len(session_rows),
        "converged": len(conv),
        "convergence_rate": (len(conv) / len(trial_rows)) if trial_rows else 0.0,
        "epsilon_max_ms": config.epsilon.max_magnitude(),
    }
    if errors.size:
        summary.update({
            "max_abs_error_ms": float(errors.max()),
            "mean_abs_error_ms": float(errors.mean()),
            "mean_k": float(ks.mean()),
            "max_k": int(ks.max()),
        })
    if ntp.size:
        summary.update({
            "ntp_median_abs_error_ms": float(np.median(ntp)),
            "ntp_max_abs_error_ms": float(ntp.max()),
            "ntp_share_above_25ms": float((ntp > 25.0).mean()),
        })
    return summary


@dataclass
class SweepRow:
    scale_factor: float
    strength: float
    zc_count: int
    mae_ms: float | None
    failure: bool


@dataclass
class SweepReport:
    config: ExperimentConfig
    rows: list[SweepRow]
    summary: dict


def zc_mae(reference: np.ndarray, measured: np.ndarray,
           period_ms: float = 20.0) -> tuple[float | None, int]:
    """Mean absolute error of measured crossings against their nearest
    reference crossing, counting pairs farther than half a period as
    unmatched. Returns (mae or None, matched count)."""
    if measured.size == 0 or reference.size == 0:
        return None, 0
    idx = np.searchsorted(reference, measured)
    left = np.clip(idx - 1, 0, reference.size - 1)
    right = np.clip(idx, 0, reference.size - 1)
    dist = np.minimum(np.abs(measured - reference[left]),
                      np.abs(measured - reference[right]))
    matched = dist < period_ms / 2.0
    if not matched.any():
        return None, 0
    return float(dist[matched].mean()), int(matched.sum())


def run_strength_sweep(config: ExperimentConfig) -> SweepReport:
    """Scale a baseline trace down, re-quantize, and track crossing drift.

    Reports the crossing MAE against the unscaled baseline per strength,
    flagging strengths where detection collapses (fewer than half the
    expected crossings survive) instead of reporting garbage.
    """
    if config.sweep_strength <= 0.0:
        raise ValueError("baseline strength must be positive")
    sep = replace(config.sep_slave, signal_strength=config.sweep_strength,
                  rng_seed=config.seed)
    baseline = synthesize_sep(sep, config.sweep_duration_s)
    zc_base = condition_trace(baseline, config.filter_kind,
                              sep.mains_frequency_hz)
    expected = (config.sweep_duration_s - 1.0) * sep.mains_frequency_hz
    period = MS_PER_S / sep.mains_frequency_hz

    rows: list[SweepRow] = []
    for factor in config.sweep_factors:
        scaled = scaled_trace(baseline, factor, sep.quantization_bits)
        zcs = condition_trace(scaled, config.filter_kind, sep.mains_frequency_hz)
        mae, matched = zc_mae(zc_base.crossings, zcs.crossings, period)
        failure = matched < 0.5 * expected
        rows.append(SweepRow(factor, config.sweep_strength * factor,
                             len(zcs), None if failure else mae, failure))

    ok = [r.mae_ms for r in rows if not r.failure and r.mae_ms is not None]
    summary = {
        "scenario": "strength_sweep",
        "seed": config.seed,
        "baseline_strength": config.sweep_strength,
        "baseline_zc_count": len(zc_base),
        "worst_mae_ms": float(max(ok)) if ok else float("nan"),
        "failures": sum(r.failure for r in rows),
    }
    return SweepReport(config, rows, summary)


def run_pipeline_bench(config: ExperimentConfig) -> dict:
    """Measure the conditioning and PLL behavioral figures in one pass:
    filter response probes, jitter spread reduction, outage robustness, and
    the scale-down crossing error."""
    from sepsync.signals import bandpass_filter

    fs = 333.0
    n = int(fs * 6)
    t = np.arange(n) / fs
    settle = int(fs)

    dc = SepTrace(0.0, fs, np.full(n, 0.7))
    dc_residue = float(np.abs(bandpass_filter(dc).samples[settle:]).max())

    amp = 0.3
    tone50 = SepTrace(0.0, fs, 0.5 + amp * np.sin(2 * math.pi * 50 * t))
    gain50 = bandpass_filter(tone50).samples[settle:].std() / (amp / math.sqrt(2))
    tone150 = SepTrace(0.0, fs, 0.5 + amp * np.sin(2 * math.pi * 150 * t))
    atten150_db = -20 * math.log10(
        bandpass_filter(tone150).samples[settle:].std() / (amp / math.sqrt(2)))

    rng = np.random.default_rng(config.seed)
    period = config.pll.nominal_period_ms
    times = np.sort(np.arange(500) * period + rng.uniform(-6, 6, 500))
    from sepsync.signals import ZcStream

    comb = run_pll(ZcStream(times), config.pll)
    after = comb.impulses[comb.impulses > times[0] + 2000.0]
    spread_in = float(np.ptp(np.diff(times)))
    spread_out = float(np.ptp(np.diff(after)))

    grid = np.arange(600) * period
    noisy = grid + rng.uniform(-1, 1, 600)
    keep = np.ones(600, bool)
    keep[300:350] = False
    comb_gap = run_pll(ZcStream(noisy[keep]), config.pll)

    def displacement(c: DiracComb, q: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(c.impulses, q)
        lo = np.clip(idx - 1, 0, len(c.impulses) - 1)
        hi = np.clip(idx, 0, len(c.impulses) - 1)
        return np.minimum(np.abs(q - c.impulses[lo]), np.abs(q - c.impulses[hi]))

    outage_drift = float(displacement(comb_gap, grid[300:350]).max())
    recovery = float(displacement(comb_gap, grid[355:]).max())

    sweep = run_strength_sweep(replace(config, sweep_factors=(1.0 / 60.0,)))
    mae60 = sweep.rows[0].mae_ms

    return {
        "scenario": "pipeline_bench",
        "seed": config.seed,
        "bpf_dc_residue": dc_residue,
        "bpf_50hz_gain": float(gain50),
        "bpf_150hz_attenuation_db": float(atten150_db),
        "pll_spread_in_ms": spread_in,
        "pll_spread_out_ms": spread_out,
        "outage_drift_ms": outage_drift,
        "outage_recovery_ms": recovery,
        "scale60_mae_ms": float(mae60) if mae60 is not None else float("nan"),
    }
