"""Flat key = value experiment configuration files.

INI-style sections, versioned with a required ``format_version`` key in
[experiment]. Every scenario has a complete annotated example under
configs/ in the repository. Command-line flags override file values.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from sepsync.experiments import EpsilonModel, ExperimentConfig
from sepsync.links import constant_preset, preset_by_name
from sepsync.signals import SepSynthesisConfig
from sepsync.solver import SolverConfig
from sepsync.comb import PllConfig

FORMAT_VERSION = "1"


class ConfigError(ValueError):
    """Malformed or unsupported configuration file."""


def parse_config(path: str | Path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    found = parser.read(path)
    if not found:
        raise ConfigError(f"cannot read config file {path}")
    if "experiment" not in parser:
        raise ConfigError("missing [experiment] section")
    version = parser["experiment"].get("format_version")
    if version != FORMAT_VERSION:
        raise ConfigError(f"unsupported format_version {version!r}; "
                          f"expected {FORMAT_VERSION}")
    return parser


def _get(section, key, cast, default):
    if section is None or key not in section:
        return default
    try:
        if cast is bool:
            return section.getboolean(key)
        return cast(section[key])
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {section[key]!r}") from exc


def sep_from_config(section) -> SepSynthesisConfig:
    base = SepSynthesisConfig()
    return SepSynthesisConfig(
        mains_frequency_hz=_get(section, "mains_frequency_hz", float,
                                base.mains_frequency_hz),
        signal_strength=_get(section, "signal_strength", float,
                             base.signal_strength),
        dc_drift=_get(section, "dc_drift", float, base.dc_drift),
        amplitude_mod_depth=_get(section, "amplitude_mod_depth", float,
                                 base.amplitude_mod_depth),
        noise_sigma=_get(section, "noise_sigma", float, base.noise_sigma),
        phase_offset_ms=_get(section, "phase_offset_ms", float,
                             base.phase_offset_ms),
        quantization_bits=_get(section, "quantization_bits", int,
                               base.quantization_bits),
        rng_seed=_get(section, "rng_seed", int, base.rng_seed),
        sample_rate_hz=_get(section, "sample_rate_hz", float,
                            base.sample_rate_hz),
    )


def _link(parser, seed: int):
    section = parser["link"] if "link" in parser else None
    preset = _get(section, "preset", str, "ble")
    drop = _get(section, "drop_probability", float, 0.0)
    if preset == "constant":
        return constant_preset(_get(section, "delay_ms", float, 10.0),
                               _get(section, "delay_back_ms", float, None),
                               seed=seed, drop_probability=drop)
    try:
        return preset_by_name(preset, seed=seed, drop_probability=drop)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _bounds(section, lo_key, hi_key):
    if section is None:
        return None
    lo = _get(section, lo_key, int, None)
    hi = _get(section, hi_key, int, None)
    if lo is None and hi is None:
        return None
    if lo is None or hi is None:
        raise ConfigError(f"{lo_key} and {hi_key} must be given together")
    return (lo, hi)


def solver_from_config(parser) -> SolverConfig:
    section = parser["solver"] if "solver" in parser else None
    period = _get(section, "period_ms", float, 20.0)
    return SolverConfig(
        period_ms=period,
        i_bounds=_bounds(section, "i_min", "i_max"),
        j_bounds=_bounds(section, "j_min", "j_max"),
        match_tol_ms=_get(section, "match_tol_ms", float, None),
        max_sessions=_get(section, "max_sessions", int, 50),
        retry_budget=_get(section, "retry_budget", int, 3),
        widen_on_restart=_get(section, "widen_on_restart", bool, False),
    )


def experiment_from_config(parser, scenario: str | None = None,
                           seed: int | None = None,
                           trials: int | None = None,
                           out_dir: str | None = None) -> ExperimentConfig:
    exp = parser["experiment"]
    scenario = scenario or _get(exp, "scenario", str, "e2e_sync")
    seed = seed if seed is not None else _get(exp, "seed", int, 0)
    trials = trials if trials is not None else _get(exp, "trials", int, 100)
    out_dir = out_dir or _get(exp, "out", str, None)

    eps_section = parser["epsilon"] if "epsilon" in parser else None
    epsilon = EpsilonModel(
        constant_ms=_get(eps_section, "constant_ms", float, 0.0),
        draw_max_ms=_get(eps_section, "draw_max_ms", float, 0.0),
        wander_amplitude_ms=_get(eps_section, "wander_amplitude_ms", float, 0.0),
        wander_period_s=_get(eps_section, "wander_period_s", float, 3600.0),
    )

    sep_slave = sep_from_config(parser["sep"] if "sep" in parser else None)
    sep_master = sep_from_config(parser["sep_master"] if "sep_master" in parser
                                 else (parser["sep"] if "sep" in parser else None))

    clock = parser["clock"] if "clock" in parser else None
    proto = parser["protocol"] if "protocol" in parser else None
    sweep = parser["sweep"] if "sweep" in parser else None

    factors_raw = _get(sweep, "factors", str, None)
    base = ExperimentConfig()
    factors = (tuple(float(f.strip()) for f in factors_raw.split(","))
               if factors_raw else base.sweep_factors)

    try:
        return ExperimentConfig(
            scenario=scenario,
            link=_link(parser, seed),
            sep_slave=sep_slave,
            sep_master=sep_master,
            epsilon=epsilon,
            trials=trials,
            seed=seed,
            solver=solver_from_config(parser),
            pll=PllConfig(),
            filter_kind=_get(exp, "filter", str, "bpf"),
            compute_ms=_get(proto, "compute_ms", float, 5.0),
            offset_range_ms=(
                _get(clock, "offset_min_ms", float, -500.0),
                _get(clock, "offset_max_ms", float, 500.0)),
            slave_drift_ppm=_get(clock, "slave_drift_ppm", float, 0.0),
            master_drift_ppm=_get(clock, "master_drift_ppm", float, 0.0),
            sessions=_get(exp, "sessions", int, 1000),
            sweep_strength=_get(sweep, "strength", float, 0.34),
            sweep_factors=factors,
            sweep_duration_s=_get(sweep, "duration_s", float, 12.0),
            out_dir=out_dir,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def study_params_from_config(parser) -> dict:
    section = parser["study"] if "study" in parser else None
    return {
        "i_max": _get(section, "i_max", int, 10),
        "j_max": _get(section, "j_max", int, 10),
        "period_ms": _get(section, "period_ms", float, 20.0),
        "max_sessions": _get(section, "max_sessions", int, 200),
    }
