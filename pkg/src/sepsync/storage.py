"""CSV readers/writers and plain-text summaries for every artifact.

All data outputs are delimited text (RFC-4180-style quoting via the csv
module) or key = value summaries. Formats:

  trace    time_ms,amplitude
  zcs      zc_time_ms
  comb     impulse_time_ms
  sessions k,t1,t2,t3,t4,phi1,phi2,phi3,phi4,thetaq,thetap,rtt  (3 decimals)
  study    trial,K,converged,delta_error_ms
  trials   per-trial e2e rows
  session_errors  per-session baseline comparison rows

Nothing here writes timestamps or environment details, so outputs are
byte-reproducible for a fixed seed.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from sepsync.comb import DiracComb
from sepsync.protocol import SessionRecord
from sepsync.signals import SepTrace, ZcStream


def _fmt(value: float, decimals: int) -> str:
    return f"{value:.{decimals}f}"


def write_trace_csv(path: str | Path, trace: SepTrace) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_ms", "amplitude"])
        for t, a in zip(trace.times_ms(), trace.samples):
            writer.writerow([_fmt(t, 3), _fmt(a, 8)])


def read_trace_csv(path: str | Path, centered: bool = False) -> SepTrace:
    times, amps = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["time_ms", "amplitude"]:
            raise ValueError(f"not a trace file: header {header}")
        for row in reader:
            times.append(float(row[0]))
            amps.append(float(row[1]))
    if len(times) < 2:
        raise ValueError("trace file needs at least two samples")
    # Timestamps are exported at 0.001 ms resolution, so successive
    # differences wobble by up to one rounding step.
    mean_dt = (times[-1] - times[0]) / (len(times) - 1)
    if np.max(np.abs(np.diff(times) - mean_dt)) > 2e-3:
        raise ValueError("trace samples are not uniformly spaced")
    rate = 1000.0 / mean_dt
    if abs(rate - round(rate)) < 0.01:
        rate = float(round(rate))
    return SepTrace(times[0], rate, np.array(amps), centered=centered)


def write_zcs_csv(path: str | Path, zcs: ZcStream) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["zc_time_ms"])
        for t in zcs.crossings:
            writer.writerow([_fmt(t, 6)])


def read_zcs_csv(path: str | Path, clock_id: str = "") -> ZcStream:
    times = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:1] != ["zc_time_ms"]:
            raise ValueError(f"not a crossing file: header {header}")
        times = [float(row[0]) for row in reader]
    return ZcStream(np.array(times), clock_id)


def write_comb_csv(path: str | Path, comb: DiracComb) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["impulse_time_ms"])
        for t in comb.impulses:
            writer.writerow([_fmt(t, 6)])


def read_comb_csv(path: str | Path) -> DiracComb:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:1] != ["impulse_time_ms"]:
            raise ValueError(f"not a comb file: header {header}")
        times = [float(row[0]) for row in reader]
    return DiracComb(np.array(times))


SESSION_COLUMNS = ["k", "t1", "t2", "t3", "t4", "phi1", "phi2", "phi3",
                   "phi4", "thetaq", "thetap", "rtt"]


def write_sessions_csv(path: str | Path, records: list[SessionRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SESSION_COLUMNS)
        for r in records:
            writer.writerow([r.k] + [_fmt(v, 3) for v in (
                r.t1, r.t2, r.t3, r.t4, r.phi1, r.phi2, r.phi3, r.phi4,
                r.theta_q, r.theta_p, r.rtt)])


def read_sessions_csv(path: str | Path) -> list[SessionRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SESSION_COLUMNS:
            raise ValueError(f"not a session log: header {header}")
        for row in reader:
            vals = [float(v) for v in row[1:]]
            records.append(SessionRecord(int(row[0]), *vals))
    return records


def write_study_csv(path: str | Path, k_values, converged, delta_errors) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "K", "converged", "delta_error_ms"])
        for trial, (k, conv, err) in enumerate(zip(k_values, converged,
                                                   delta_errors)):
            writer.writerow([trial, int(k), int(conv), _fmt(err, 6)])


def write_trials_csv(path: str | Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "converged", "K", "restarts", "drops",
                         "delta_est_ms", "delta_gt_ms", "delta_error_ms",
                         "epsilon_ms"])
        for r in rows:
            writer.writerow([
                r.trial, int(r.converged), r.k, r.restarts, r.drops,
                "" if r.delta_est_ms is None else _fmt(r.delta_est_ms, 6),
                _fmt(r.delta_gt_ms, 6),
                "" if r.delta_error_ms is None else _fmt(r.delta_error_ms, 6),
                _fmt(r.epsilon_ms, 6)])


def write_session_errors_csv(path: str | Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "k", "rtt_ms", "ntp_error_ms"])
        for r in rows:
            writer.writerow([r.trial, r.k, _fmt(r.rtt_ms, 3),
                             _fmt(r.ntp_error_ms, 6)])


def write_sweep_csv(path: str | Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scale_factor", "strength", "zc_count", "mae_ms",
                         "failure"])
        for r in rows:
            writer.writerow([
                _fmt(r.scale_factor, 8), _fmt(r.strength, 8), r.zc_count,
                "" if r.mae_ms is None else _fmt(r.mae_ms, 6),
                int(r.failure)])


def write_summary(path: str | Path, summary: dict) -> None:
    """key = value lines, insertion-ordered; the machine-checkable block."""
    with open(path, "w") as fh:
        fh.write("format_version = 1\n")
        for key, value in summary.items():
            if isinstance(value, float):
                fh.write(f"{key} = {value:.6g}\n")
            else:
                fh.write(f"{key} = {value}\n")


def read_summary(path: str | Path) -> dict:
    out: dict = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            try:
                out[key] = int(value)
            except ValueError:
                try:
                    out[key] = float(value)
                except ValueError:
                    out[key] = value
    return out
