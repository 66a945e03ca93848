"""Synchronization sessions: timestamp exchange, phases, and candidate offsets.

One session is a request/reply1 exchange timed at the application layer
(t1..t4) followed by a reliable reply2 carrying the master's timestamps and
comb phases. The rounded phase differences fold each one-way delay into
[0, T); the remaining whole periods (i, j) are the integer ambiguity that
the solver resolves across sessions.

Conventions: all times in ms. The master's comb impulses sit at reference
times n*T; the slave's at n*T + epsilon (positive epsilon means the slave's
comb lags). Node clocks read local = ref * (1 + drift_ppm * 1e-6) + offset,
and the ground-truth offset is delta_gt = slave_local - master_local.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from sepsync.comb import DiracComb, phase_of
from sepsync.links import LinkModel, constant_preset, draw_delay

TIMESTAMP_RESOLUTION_MS = 0.001


class SessionDropped(RuntimeError):
    """A timed message was lost; the session produced no record."""


class BufferCoverageError(RuntimeError):
    """A node's comb does not cover the interval its phases are read from."""


def read_clock(value_ms: float) -> float:
    """Quantize a clock read to the timestamp resolution (1 microsecond)."""
    return round(value_ms / TIMESTAMP_RESOLUTION_MS) * TIMESTAMP_RESOLUTION_MS


@dataclass(frozen=True)
class NodeClock:
    """Affine clock model with a ground-truth offset and a ppm rate error."""

    true_time_offset_ms: float = 0.0
    drift_ppm: float = 0.0

    def __post_init__(self):
        if abs(self.drift_ppm) > 100.0:
            raise ValueError("drift must stay within +-100 ppm")

    def local_at(self, ref_ms: float) -> float:
        """Timestamp the clock would report at reference time ``ref_ms``."""
        return read_clock(ref_ms * (1.0 + self.drift_ppm * 1e-6)
                          + self.true_time_offset_ms)

    def ref_at(self, local_ms: float) -> float:
        """Reference time at which the clock reads ``local_ms`` (unquantized)."""
        return (local_ms - self.true_time_offset_ms) / (1.0 + self.drift_ppm * 1e-6)


@dataclass(frozen=True)
class Node:
    """One endpoint: its clock, and either a real comb or an ideal-comb model.

    With ``comb`` set, phases come from the conditioned signal. Without it,
    phases are computed from an ideal comb whose impulses sit at reference
    times n*T + comb_shift_ms, mapped through the node clock. This analytic
    mode drives the protocol-level simulations and oracle checks.
    """

    clock: NodeClock = NodeClock()
    comb: DiracComb | None = None
    comb_shift_ms: float = 0.0
    period_ms: float = 20.0
    clock_id: str = ""

    def phase_at_local(self, t_local: float) -> float:
        if self.comb is not None:
            if not (self.comb.start_ms <= t_local <= self.comb.end_ms):
                raise BufferCoverageError(
                    f"comb [{self.comb.start_ms:.1f}, {self.comb.end_ms:.1f}] "
                    f"does not cover t={t_local:.1f}")
            return phase_of(self.comb, t_local)
        r = self.clock.ref_at(t_local)
        n = math.floor((r - self.comb_shift_ms) / self.period_ms)
        impulse_local = self.clock.local_at(n * self.period_ms + self.comb_shift_ms)
        return t_local - impulse_local

    def comb_period(self) -> float:
        return self.comb.period_ms if self.comb is not None else self.period_ms


@dataclass(frozen=True)
class SyncMessage:
    """Wire message. request and reply1 carry no timing payload; reply2
    carries the master's timestamps and phases."""

    kind: str
    t2: float | None = None
    t3: float | None = None
    phi2: float | None = None
    phi3: float | None = None

    def __post_init__(self):
        if self.kind not in ("request", "reply1", "reply2"):
            raise ValueError(f"unknown message kind {self.kind!r}")
        payload = (self.t2, self.t3, self.phi2, self.phi3)
        if self.kind == "reply2":
            if any(v is None for v in payload):
                raise ValueError("reply2 must carry t2, t3, phi2, phi3")
        elif any(v is not None for v in payload):
            raise ValueError(f"{self.kind} carries no timing payload")

    def validate_phases(self, period_ms: float) -> None:
        if self.kind != "reply2":
            return
        if self.t3 < self.t2:
            raise ValueError("reply2 requires t2 <= t3")
        for phi in (self.phi2, self.phi3):
            if not 0.0 <= phi < 1.1 * period_ms:
                raise ValueError(f"phase {phi} outside [0, 1.1 T)")


@dataclass(frozen=True)
class SessionTruth:
    """Simulator-only ground truth, unavailable to a real deployment."""

    tau_q_ms: float
    tau_p_ms: float
    i: int
    j: int
    epsilon_ms: float
    delta_gt_ms: float


@dataclass(frozen=True)
class SessionRecord:
    """Measurements of one synchronization session."""

    k: int
    t1: float
    t2: float
    t3: float
    t4: float
    phi1: float
    phi2: float
    phi3: float
    phi4: float
    theta_q: float
    theta_p: float
    rtt: float
    truth: SessionTruth | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.t4 > self.t1:
            raise ValueError("t4 must follow t1")
        if self.t3 < self.t2:
            raise ValueError("t3 must not precede t2")
        # rtt == 0 is the degenerate zero-delay edge; negative means the
        # timestamps are inconsistent
        if self.rtt < 0:
            raise ValueError("round-trip time must be non-negative")

    @property
    def t4_minus_t3(self) -> float:
        return self.t4 - self.t3


def rounded_phase_diff(phi_late: float, phi_early: float, period_ms: float) -> float:
    """Phase difference folded into [0, T): the late phase minus the early
    one, plus one period when negative. Phases slightly beyond one period
    (a degenerate comb) fold the same way."""
    diff = math.fmod(phi_late - phi_early, period_ms)
    if diff < 0.0:
        diff += period_ms
    if diff >= period_ms:
        diff -= period_ms
    return diff


def run_session(slave: Node, master: Node, link: LinkModel, *,
                t1_ref_ms: float, rng: np.random.Generator | None = None,
                compute_ms: float = 5.0, k: int = 1,
                tau_q_ms: float | None = None,
                tau_p_ms: float | None = None) -> SessionRecord:
    """Simulate one session starting at reference time ``t1_ref_ms``.

    Delays are drawn from the link unless fixed values are given. Raises
    :class:`SessionDropped` when a timed message is lost, and
    :class:`BufferCoverageError` when a node's comb fails to cover the
    interval its phases are read from.
    """
    if rng is None:
        rng = np.random.default_rng(link.rng_seed)

    if tau_q_ms is None:
        if link.drop_probability > 0 and rng.random() < link.drop_probability:
            raise SessionDropped("request lost")
        tau_q_ms = draw_delay(link, "slave_to_master", rng)
    if tau_p_ms is None:
        if link.drop_probability > 0 and rng.random() < link.drop_probability:
            raise SessionDropped("reply1 lost")
        tau_p_ms = draw_delay(link, "master_to_slave", rng)

    r1 = t1_ref_ms
    r2 = r1 + tau_q_ms
    r3 = r2 + compute_ms
    r4 = r3 + tau_p_ms

    t1 = slave.clock.local_at(r1)
    t2 = master.clock.local_at(r2)
    t3 = master.clock.local_at(r3)
    t4 = slave.clock.local_at(r4)

    phi1 = slave.phase_at_local(t1)
    phi4 = slave.phase_at_local(t4)
    phi2 = master.phase_at_local(t2)
    phi3 = master.phase_at_local(t3)

    reply2 = SyncMessage("reply2", t2=t2, t3=t3, phi2=phi2, phi3=phi3)
    reply2.validate_phases(master.comb_period())

    # the slave folds the phase differences against its own comb's period
    period = slave.comb_period()
    theta_q = rounded_phase_diff(phi2, phi1, period)
    theta_p = rounded_phase_diff(phi4, phi3, period)
    rtt = (t4 - t1) - (t3 - t2)

    epsilon = slave.comb_shift_ms - master.comb_shift_ms
    delta_gt = slave.clock.local_at(r1) - master.clock.local_at(r1)
    i_true = int(round((tau_q_ms + epsilon - theta_q) / period))
    j_true = int(round((tau_p_ms - epsilon - theta_p) / period))
    truth = SessionTruth(tau_q_ms, tau_p_ms, i_true, j_true, epsilon, delta_gt)

    return SessionRecord(k, t1, t2, t3, t4, phi1, phi2, phi3, phi4,
                         theta_q, theta_p, rtt, truth)


def make_ideal_session(tau_q_ms: float, tau_p_ms: float, *,
                       delta_gt_ms: float = 0.0, epsilon_ms: float = 0.0,
                       period_ms: float = 20.0, t1_ref_ms: float = 1000.0,
                       compute_ms: float = 5.0, k: int = 1,
                       slave_drift_ppm: float = 0.0,
                       master_drift_ppm: float = 0.0) -> SessionRecord:
    """Construct one analytically exact session with known ground truth.

    The independent oracle for the protocol algebra: timestamps and phases
    are computed directly from the clock and ideal-comb models, with the
    given one-way delays.
    """
    slave = Node(NodeClock(delta_gt_ms, slave_drift_ppm),
                 comb_shift_ms=epsilon_ms, period_ms=period_ms, clock_id="slave")
    master = Node(NodeClock(0.0, master_drift_ppm),
                  comb_shift_ms=0.0, period_ms=period_ms, clock_id="master")
    return run_session(slave, master, constant_preset(1.0),
                       t1_ref_ms=t1_ref_ms, compute_ms=compute_ms, k=k,
                       tau_q_ms=tau_q_ms, tau_p_ms=tau_p_ms)


def ntp_offset(rec: SessionRecord) -> float:
    """Classic symmetric-link offset estimate, t4 - (t3 + rtt / 2)."""
    return rec.t4 - (rec.t3 + rec.rtt / 2.0)


class Candidate(NamedTuple):
    i: int
    j: int
    delta: float


def default_ambiguity_bound(rec: SessionRecord, period_ms: float,
                            match_tol_ms: float) -> int:
    """Largest period count consistent with the measured round trip."""
    return max(0, int(math.floor(
        (rec.rtt - rec.theta_q - rec.theta_p + match_tol_ms) / period_ms + 1e-9)))


def candidate_offsets(rec: SessionRecord, period_ms: float,
                      i_range: tuple[int, int] | None = None,
                      j_range: tuple[int, int] | None = None,
                      match_tol_ms: float | None = None) -> list[Candidate]:
    """All (i, j, delta) consistent with the session's round trip.

    A pair is admitted when theta_q + theta_p + (i + j) * T matches the RTT
    within ``match_tol_ms`` (default T/4, which absorbs comb displacement
    and phase noise while rejecting wrong period sums). Each admitted pair
    yields delta = t4 - t3 - theta_p - j * T. Without prior knowledge the
    ranges default to [0, (rtt - theta_q - theta_p) / T]. The result can be
    empty when no period sum is consistent.
    """
    if match_tol_ms is None:
        match_tol_ms = period_ms / 4.0
    bound = default_ambiguity_bound(rec, period_ms, match_tol_ms)
    if i_range is None:
        i_range = (0, bound)
    if j_range is None:
        j_range = (0, bound)
    i_min, i_max = i_range
    j_min, j_max = j_range
    if i_min < 0 or j_min < 0 or i_max < i_min or j_max < j_min:
        raise ValueError("ambiguity ranges must be non-negative and ordered")

    # The consistency check constrains only the sum i + j, so enumerate
    # admissible sums and split each into its in-range (i, j) pairs.
    base = rec.theta_q + rec.theta_p
    offset = rec.t4 - rec.t3 - rec.theta_p
    out: list[Candidate] = []
    for total in range(i_min + j_min, i_max + j_max + 1):
        if abs(base + total * period_ms - rec.rtt) > match_tol_ms:
            continue
        for j in range(max(j_min, total - i_max),
                       min(j_max, total - i_min) + 1):
            out.append(Candidate(total - j, j, offset - j * period_ms))
    out.sort(key=lambda c: (c.i, c.j))
    return out
