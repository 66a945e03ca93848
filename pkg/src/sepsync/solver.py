"""Integer ambiguity solver: fuse candidate offsets across sessions.

Each session yields a small set of candidate clock offsets spaced one comb
period apart. Intersecting these sets session after session eliminates the
wrong candidates as the ambiguous period counts vary with the network
delays. Two candidates closer than half a period are the same solution
observed through comb displacement, so matching is T/2-tolerant and the
final offset is the running mean of the matched values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from sepsync.protocol import SessionRecord, candidate_offsets


class EmptySolutionSpaceError(RuntimeError):
    """Every cluster was eliminated; the process must restart."""


@dataclass
class Cluster:
    """One surviving candidate: its absorbed values and their mean."""

    members: list[float]
    representative: float

    @classmethod
    def seed(cls, delta: float) -> "Cluster":
        return cls([delta], delta)

    def absorbed(self, delta: float) -> "Cluster":
        members = self.members + [delta]
        return Cluster(members, sum(members) / len(members))


@dataclass
class SolutionSpace:
    """Candidate clusters carried across the sessions of one process."""

    clusters: list[Cluster] = field(default_factory=list)
    sessions_seen: int = 0

    def representatives(self) -> list[float]:
        return [c.representative for c in self.clusters]

    def is_converged(self) -> bool:
        return len(self.clusters) == 1 and self.sessions_seen >= 1

    def solution(self) -> float:
        if not self.is_converged():
            raise ValueError("solution space has not converged")
        return self.clusters[0].representative


def intersect(space: SolutionSpace, new_candidates: Iterable[float],
              period_ms: float) -> SolutionSpace:
    """T/2-tolerant intersection of the space with a session's candidates.

    The first session seeds one cluster per candidate. Afterwards a cluster
    survives only if some new candidate lies within T/2 of its
    representative; survivors absorb the matched value into their running
    mean. Matching is nearest-first and one-to-one, which preserves the
    invariant that representatives stay at least T/2 apart. Raises
    :class:`EmptySolutionSpaceError` when nothing survives.
    """
    deltas = sorted(new_candidates)
    if not deltas:
        raise ValueError("a session must contribute at least one candidate")
    half = period_ms / 2.0

    if space.sessions_seen == 0:
        clusters = [Cluster.seed(d) for d in deltas]
        return SolutionSpace(clusters, 1)

    pairs = []
    for ci, cluster in enumerate(space.clusters):
        for di, delta in enumerate(deltas):
            dist = abs(delta - cluster.representative)
            if dist < half:
                pairs.append((dist, ci, di))
    pairs.sort()

    used_clusters: set[int] = set()
    used_deltas: set[int] = set()
    survivors: list[tuple[int, Cluster]] = []
    for dist, ci, di in pairs:
        if ci in used_clusters or di in used_deltas:
            continue
        used_clusters.add(ci)
        used_deltas.add(di)
        survivors.append((ci, space.clusters[ci].absorbed(deltas[di])))

    if not survivors:
        raise EmptySolutionSpaceError(
            f"no candidate within {half} ms of any of "
            f"{[round(r, 3) for r in space.representatives()]}")
    survivors.sort()
    return SolutionSpace([c for _, c in survivors], space.sessions_seen + 1)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of one synchronization process."""

    period_ms: float = 20.0
    i_bounds: tuple[int, int] | None = None
    j_bounds: tuple[int, int] | None = None
    match_tol_ms: float | None = None
    max_sessions: int = 50
    retry_budget: int = 3
    widen_on_restart: bool = False

    def __post_init__(self):
        if self.max_sessions < 1:
            raise ValueError("max_sessions must be >= 1")
        for bounds in (self.i_bounds, self.j_bounds):
            if bounds is not None and (bounds[0] < 0 or bounds[1] < bounds[0]):
                raise ValueError("ambiguity bounds must be non-negative and ordered")


@dataclass
class SolveResult:
    converged: bool
    delta_ms: float | None
    sessions_used: int
    restarts: int
    reason: str
    candidate_history: list[list[float]] = field(default_factory=list)


def solve(sessions: Iterable[SessionRecord] | Iterator[SessionRecord],
          config: SolverConfig = SolverConfig(),
          record_history: bool = False) -> SolveResult:
    """Run sessions until the solution space collapses to a single cluster.

    Pulls records from ``sessions`` on demand. An empty intersection (or a
    session with no consistent candidates) restarts the process with fresh
    state, consuming one retry; bounds optionally widen to the
    no-prior-knowledge default on restart. Hitting ``max_sessions`` in one
    attempt, exhausting retries, or running out of sessions reports
    non-convergence.
    """
    stream = iter(sessions)
    space = SolutionSpace()
    restarts = 0
    history: list[list[float]] = []
    i_bounds, j_bounds = config.i_bounds, config.j_bounds

    def restart(reason_if_exhausted: str) -> SolveResult | None:
        nonlocal space, restarts, i_bounds, j_bounds
        restarts += 1
        if restarts > config.retry_budget:
            return SolveResult(False, None, space.sessions_seen, restarts - 1,
                               reason_if_exhausted, history)
        if config.widen_on_restart:
            i_bounds, j_bounds = None, None
        space = SolutionSpace()
        return None

    while True:
        try:
            rec = next(stream)
        except StopIteration:
            return SolveResult(False, None, space.sessions_seen, restarts,
                               "session stream exhausted", history)

        deltas = [c.delta for c in candidate_offsets(
            rec, config.period_ms, i_bounds, j_bounds, config.match_tol_ms)]
        if record_history:
            history.append(sorted(deltas))

        if not deltas:
            result = restart("retry budget exhausted (inconsistent session)")
            if result is not None:
                return result
            continue

        try:
            space = intersect(space, deltas, config.period_ms)
        except EmptySolutionSpaceError:
            result = restart("retry budget exhausted (empty intersection)")
            if result is not None:
                return result
            continue

        if space.is_converged():
            return SolveResult(True, space.solution(), space.sessions_seen,
                               restarts, "converged", history)
        if space.sessions_seen >= config.max_sessions:
            return SolveResult(False, None, space.sessions_seen, restarts,
                               "max sessions reached", history)


@dataclass
class StudyResult:
    """Per-trial convergence counts plus summary statistics."""

    i_max: int
    j_max: int
    trials: int
    seed: int
    k_values: np.ndarray
    converged: np.ndarray
    delta_errors: np.ndarray

    def summary(self) -> dict:
        ks = self.k_values[self.converged]
        if ks.size == 0:
            ks = np.array([float("nan")])
        return {
            "trials": int(self.trials),
            "convergence_rate": float(self.converged.mean()),
            "mean_k": float(ks.mean()),
            "median_k": float(np.median(ks)),
            "p25_k": float(np.percentile(ks, 25)),
            "p75_k": float(np.percentile(ks, 75)),
            "max_k": int(ks.max()),
            "max_abs_delta_error": float(np.abs(self.delta_errors).max()),
        }


def _study_session_stream(rng: np.random.Generator, i_max: int, j_max: int,
                          period_ms: float, delta_gt: float) -> Iterator[SessionRecord]:
    """Synthesize consistent sessions with uniformly drawn ambiguities.

    Per session i ~ U{0..i_max}, j ~ U{0..j_max}, theta_q, theta_p ~ U[0, T),
    no comb displacement. Timestamps are built so every derived quantity is
    exact: rtt = theta_q + theta_p + (i + j) T and t4 - t3 = theta_p + j T
    + delta_gt.
    """
    k = 0
    base = 10_000.0
    while True:
        k += 1
        i = int(rng.integers(0, i_max + 1))
        j = int(rng.integers(0, j_max + 1))
        theta_q = float(rng.uniform(0.0, period_ms))
        theta_p = float(rng.uniform(0.0, period_ms))
        tau_q = theta_q + i * period_ms
        tau_p = theta_p + j * period_ms
        t1 = base + k * 1000.0
        t2 = t1 + tau_q - delta_gt
        t3 = t2 + 5.0
        t4 = t3 + tau_p + delta_gt
        yield SessionRecord(k, t1, t2, t3, t4,
                            0.0, theta_q, 0.0, theta_p,
                            theta_q, theta_p,
                            theta_q + theta_p + (i + j) * period_ms)


def convergence_study(i_max: int, j_max: int, trials: int, seed: int,
                      period_ms: float = 20.0, max_sessions: int = 200,
                      use_bounds: bool = True) -> StudyResult:
    """Measure the session count K needed to converge, over seeded trials.

    Every trial draws its own ground truth offset and runs the real solver.
    By default the solver searches within the generating ranges
    [0, i_max] x [0, j_max], the setup whose convergence statistics the
    study reproduces; ``use_bounds=False`` drops that knowledge and searches
    [0, (rtt - theta_q - theta_p) / T], which converges more slowly. Trials
    use independent seed streams derived from (seed, trial), so results do
    not depend on execution order.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ks = np.zeros(trials, dtype=int)
    conv = np.zeros(trials, dtype=bool)
    errs = np.zeros(trials, dtype=float)
    config = SolverConfig(
        period_ms=period_ms, max_sessions=max_sessions,
        i_bounds=(0, i_max) if use_bounds else None,
        j_bounds=(0, j_max) if use_bounds else None)
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence((seed, trial)))
        delta_gt = float(rng.uniform(-500.0, 500.0))
        stream = _study_session_stream(rng, i_max, j_max, period_ms, delta_gt)
        result = solve(stream, config)
        ks[trial] = result.sessions_used
        conv[trial] = result.converged
        errs[trial] = (result.delta_ms - delta_gt) if result.converged else np.nan
    return StudyResult(i_max, j_max, trials, seed, ks, conv,
                       np.nan_to_num(errs, nan=0.0))
