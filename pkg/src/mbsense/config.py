"""Experiment configuration: strict JSON parsing and figure presets.

Unknown keys are rejected everywhere, each experiment declares its
required blocks, and serialize(parse(text)) is semantically identical to
the input.
"""

import json

__all__ = ["ConfigError", "EXPERIMENTS", "PRESETS", "parse_config",
           "load_config", "serialize_config", "preset"]


class ConfigError(ValueError):
    """Configuration text is malformed or violates the schema."""


EXPERIMENTS = ("roc", "coop-roc", "mb-metrics", "edges", "cs", "throughput",
               "tradeoff-tau", "tradeoff-tau-k", "sampling-cost", "waterfill",
               "bandwidth-sweep")

_TOP_KEYS = {"experiment", "seed", "trials", "output", "scenario", "detector",
             "fusion", "throughput", "edges", "cs", "assignment", "waterfill"}

_BLOCK_KEYS = {
    "scenario": {"num_bands", "band_bandwidth", "idle_prior", "snr",
                 "sample_rate", "noise_var", "n_samples"},
    "detector": {"kind", "kinds", "n", "pfa_grid", "nd", "ncp", "n_blocks",
                 "cov_dim", "cyclic_alpha", "cyclic_freq", "max_lag"},
    "fusion": {"rules", "users", "vote_k"},
    "throughput": {"bandwidth", "power_idle", "power_busy", "noise_var",
                   "interference_dbw", "idle_prior", "pfa", "pd", "num_bands",
                   "accessed", "frame_duration", "sensing_time", "sample_rate",
                   "access_mode", "sense_snr", "min_pd", "accessed_list",
                   "users"},
    "edges": {"nfft", "num_scales", "delta", "num_edges", "min_width",
              "noise_floor", "scenes"},
    "cs": {"n", "sparsity_list", "measurements_list", "seeds"},
    "assignment": {"users", "users_list", "num_bands", "num_bands_list",
                   "diversity_list", "band_bandwidth"},
    "waterfill": {"gains", "budget", "noise_var"},
}

_REQUIRED_BLOCKS = {
    "roc": ("scenario", "detector"),
    "coop-roc": ("scenario", "detector", "fusion"),
    "mb-metrics": ("scenario", "detector"),
    "edges": ("edges",),
    "cs": ("cs",),
    "throughput": ("throughput",),
    "tradeoff-tau": ("throughput",),
    "tradeoff-tau-k": ("throughput",),
    "sampling-cost": ("assignment",),
    "waterfill": ("waterfill",),
    "bandwidth-sweep": ("throughput",),
}


def _check_keys(mapping, allowed, where):
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _positive(cfg, block, key, strict=True):
    value = cfg.get(block, {}).get(key)
    if value is None:
        return
    bad = value <= 0 if strict else value < 0
    if bad:
        raise ConfigError(f"{block}.{key} must be {'positive' if strict else 'non-negative'}")


def parse_config(text: str) -> dict:
    """Parse and validate a JSON experiment configuration."""
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(cfg, _TOP_KEYS, "the top level")
    experiment = cfg.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
    for block, keys in _BLOCK_KEYS.items():
        if block in cfg:
            if not isinstance(cfg[block], dict):
                raise ConfigError(f"{block!r} must be an object")
            _check_keys(cfg[block], keys, f"the {block} block")
    for block in _REQUIRED_BLOCKS[experiment]:
        if block not in cfg:
            raise ConfigError(f"experiment {experiment!r} needs a {block!r} block")
    if "seed" in cfg and (not isinstance(cfg["seed"], int) or cfg["seed"] < 0):
        raise ConfigError("seed must be a non-negative integer")
    if "trials" in cfg and (not isinstance(cfg["trials"], int) or cfg["trials"] < 1):
        raise ConfigError("trials must be a positive integer")
    for block, key in (("scenario", "n_samples"), ("scenario", "num_bands"),
                       ("scenario", "band_bandwidth"), ("scenario", "sample_rate"),
                       ("scenario", "noise_var"), ("detector", "n"),
                       ("throughput", "bandwidth"), ("throughput", "frame_duration"),
                       ("throughput", "sample_rate"), ("waterfill", "budget"),
                       ("edges", "nfft"), ("cs", "n")):
        _positive(cfg, block, key)
    _positive(cfg, "scenario", "snr", strict=False)
    for key in ("idle_prior", "pfa", "pd", "min_pd"):
        value = cfg.get("throughput", {}).get(key)
        if value is not None and not 0 <= value <= 1:
            raise ConfigError(f"throughput.{key} must lie in [0, 1]")
    grid = cfg.get("detector", {}).get("pfa_grid")
    if grid is not None:
        if not all(0 < g < 1 for g in grid) or sorted(grid) != list(grid):
            raise ConfigError("detector.pfa_grid must be increasing inside (0, 1)")
    return cfg


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Figure presets
# ---------------------------------------------------------------------------

def preset(name: str) -> dict:
    """Paper-parameterized configuration for a named figure preset."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return json.loads(json.dumps(PRESETS[name]))  # deep copy


_PFA_GRID = [0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5]

PRESETS = {
    # three single-band detectors at -15 dB
    "fig8": {
        "experiment": "roc",
        "seed": 20240817,
        "trials": 20000,
        "scenario": {"snr": 0.0316227766016838, "noise_var": 1.0,
                     "n_samples": 500},
        "detector": {"kinds": ["coherent", "energy", "cp"], "n": 500,
                     "nd": 64, "ncp": 16, "n_blocks": 500,
                     "pfa_grid": _PFA_GRID},
    },
    # cooperative energy detection, -10 dB, N=125
    "fig9": {
        "experiment": "coop-roc",
        "seed": 20240909,
        "trials": 20000,
        "scenario": {"snr": 0.1, "noise_var": 1.0, "n_samples": 125},
        "detector": {"kind": "energy", "n": 125, "pfa_grid": _PFA_GRID},
        "fusion": {"rules": ["or", "and", "majority"], "users": [1, 2, 4, 8]},
    },
    # throughput vs accessed bands, 6 MHz subchannels
    "fig10": {
        "experiment": "throughput",
        "seed": 20241010,
        "throughput": {"bandwidth": 6e6, "power_idle": 1.0, "power_busy": 0.4,
                       "noise_var": 1.0, "interference_dbw": -20.0,
                       "idle_prior": 0.7, "pfa": 0.1, "pd": 0.9,
                       "num_bands": 10, "accessed_list": [1, 5, 10],
                       "frame_duration": 0.1, "sensing_time": 0.002,
                       "sample_rate": 1e4, "sense_snr": 0.1},
    },
    # sensing-time / throughput tradeoff
    "fig12": {
        "experiment": "tradeoff-tau",
        "seed": 20241212,
        "throughput": {"bandwidth": 6e6, "power_idle": 1.0, "power_busy": 0.4,
                       "noise_var": 1.0, "interference_dbw": -20.0,
                       "idle_prior": 0.7, "num_bands": 10, "accessed": 10,
                       "frame_duration": 0.1, "sensing_time": 0.002,
                       "sample_rate": 1e4, "sense_snr": 0.1, "min_pd": 0.9},
    },
    # sampling cost vs diversity
    "fig13": {
        "experiment": "sampling-cost",
        "seed": 20241313,
        "assignment": {"users_list": [4, 8, 12], "num_bands": 12,
                       "diversity_list": [1, 2, 3, 4], "band_bandwidth": 6e6},
    },
    # sampling cost vs number of cooperating users
    "fig14": {
        "experiment": "sampling-cost",
        "seed": 20241414,
        "assignment": {"users_list": [2, 4, 6, 8, 10, 12],
                       "num_bands_list": [12, 24],
                       "diversity_list": [2],
                       "band_bandwidth": 6e6},
    },
}
