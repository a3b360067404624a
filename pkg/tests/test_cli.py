import json
from pathlib import Path

import pytest

from mbsense.cli import main
from mbsense.config import (ConfigError, parse_config, preset,
                            serialize_config)
from mbsense.experiments import SCHEMAS


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


TINY_ROC = {
    "experiment": "roc",
    "seed": 7,
    "trials": 200,
    "scenario": {"snr": 0.1, "noise_var": 1.0, "n_samples": 64},
    "detector": {"kinds": ["energy"], "n": 64, "pfa_grid": [0.1, 0.5]},
}


def test_preset_fig9_parameters():
    cfg = preset("fig9")
    parse_config(json.dumps(cfg))
    assert cfg["fusion"]["users"] == [1, 2, 4, 8]
    assert set(cfg["fusion"]["rules"]) == {"or", "and", "majority"}
    assert cfg["scenario"]["snr"] == 0.1
    assert cfg["detector"]["n"] == 125


def test_preset_fig10_parameters():
    cfg = preset("fig10")
    block = cfg["throughput"]
    assert block["bandwidth"] == 6e6
    assert block["power_busy"] == pytest.approx(0.4 * block["power_idle"])
    assert block["interference_dbw"] == -20.0
    assert block["idle_prior"] == 0.7
    assert block["accessed_list"] == [1, 5, 10]


def test_preset_fig13_parameters():
    cfg = preset("fig13")
    assert cfg["experiment"] == "sampling-cost"
    assert cfg["assignment"]["band_bandwidth"] == 6e6
    with pytest.raises(ConfigError):
        preset("fig99")


def test_preset_round_trip():
    for name in ("fig8", "fig9", "fig10", "fig12", "fig13", "fig14"):
        cfg = preset(name)
        text = serialize_config(cfg)
        assert parse_config(text) == cfg


def test_parse_rejects_unknown_keys():
    bad = dict(TINY_ROC)
    bad["surprise"] = 1
    with pytest.raises(ConfigError):
        parse_config(json.dumps(bad))
    bad = json.loads(json.dumps(TINY_ROC))
    bad["detector"]["colour"] = "blue"
    with pytest.raises(ConfigError):
        parse_config(json.dumps(bad))


def test_parse_validates_values():
    bad = json.loads(json.dumps(TINY_ROC))
    bad["detector"]["n"] = -5
    with pytest.raises(ConfigError):
        parse_config(json.dumps(bad))
    bad = json.loads(json.dumps(TINY_ROC))
    bad["trials"] = 0
    with pytest.raises(ConfigError):
        parse_config(json.dumps(bad))
    bad = json.loads(json.dumps(TINY_ROC))
    bad["detector"]["pfa_grid"] = [0.5, 0.1]
    with pytest.raises(ConfigError):
        parse_config(json.dumps(bad))
    with pytest.raises(ConfigError):
        parse_config("not json")
    with pytest.raises(ConfigError):
        parse_config(json.dumps({"experiment": "warp"}))
    with pytest.raises(ConfigError):
        parse_config(json.dumps({"experiment": "roc"}))  # missing blocks


def test_run_roc_schema(tmp_path):
    cfg_path = _write(tmp_path, TINY_ROC)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg_path), "--out", str(out),
                 "--no-figures"]) == 0
    lines = (out / "roc.csv").read_text().splitlines()
    assert lines[0] == "detector,pfa,pd,ci_lo,ci_hi"
    assert len(lines) == 1 + 2  # one row per (detector, grid point)
    for line in lines[1:]:
        fields = line.split(",")
        assert fields[0] == "energy"
        assert all(0.0 <= float(v) <= 1.0 for v in fields[1:])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["series_rows"]["roc"] == 2
    assert manifest["seed"] == 7


def test_run_is_byte_deterministic(tmp_path):
    cfg_path = _write(tmp_path, TINY_ROC)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg_path), "--out", str(out1),
                 "--no-figures"]) == 0
    assert main(["run", "--config", str(cfg_path), "--out", str(out2),
                 "--no-figures"]) == 0
    assert (out1 / "roc.csv").read_bytes() == (out2 / "roc.csv").read_bytes()


def test_seed_override_changes_rows(tmp_path):
    cfg_path = _write(tmp_path, TINY_ROC)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["run", "--config", str(cfg_path), "--out", str(out1), "--no-figures"])
    main(["run", "--config", str(cfg_path), "--out", str(out2), "--seed", "8",
          "--no-figures"])
    assert (out1 / "roc.csv").read_bytes() != (out2 / "roc.csv").read_bytes()
    manifest = json.loads((out2 / "manifest.json").read_text())
    assert manifest["seed"] == 8


def test_bad_config_exits_2_without_partial_files(tmp_path, capsys):
    bad = json.loads(json.dumps(TINY_ROC))
    bad["detector"]["n"] = -64
    cfg_path = _write(tmp_path, bad)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 2
    assert not out.exists()


def test_unreadable_config_exits_4(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 4


def test_infeasible_parameters_exit_3(tmp_path):
    cfg = {
        "experiment": "cs",
        "seed": 1,
        "cs": {"n": 64, "sparsity_list": [32], "measurements_list": [16],
               "seeds": 2},
    }
    cfg_path = _write(tmp_path, cfg)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 3
    assert not out.exists()


def test_unknown_preset_exits_2(capsys):
    assert main(["preset", "--name", "fig99"]) == 2


def test_preset_command_emits_parseable_config(capsys):
    assert main(["preset", "--name", "fig13"]) == 0
    printed = capsys.readouterr().out
    assert parse_config(printed)["experiment"] == "sampling-cost"


def test_figures_rendered_alongside_csv(tmp_path):
    cfg_path = _write(tmp_path, TINY_ROC)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert (out / "roc.png").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert "roc.png" in manifest["figures"]


def test_outputs_stay_inside_output_directory(tmp_path):
    cfg = {
        "experiment": "waterfill",
        "seed": 3,
        "waterfill": {"gains": [1.0, 0.5, 2.0], "budget": 2.0},
    }
    cfg_path = _write(tmp_path, cfg)
    out = tmp_path / "only_here"
    before = set(p.name for p in tmp_path.iterdir())
    assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
    after = set(p.name for p in tmp_path.iterdir())
    assert after - before == {"only_here"}
    names = {p.name for p in out.iterdir()}
    assert names == {"waterfill.csv", "waterfill.png", "manifest.json"}


def test_all_experiments_produce_schema_headers(tmp_path):
    configs = {
        "coop-roc": {
            "experiment": "coop-roc", "seed": 5,
            "scenario": {"snr": 0.1, "n_samples": 125},
            "detector": {"kind": "energy", "n": 125, "pfa_grid": [0.1, 0.3]},
            "fusion": {"rules": ["or", "and"], "users": [1, 2]},
        },
        "throughput": {
            "experiment": "throughput", "seed": 5,
            "throughput": {"num_bands": 4, "accessed_list": [1, 2, 4]},
        },
        "tradeoff-tau": {
            "experiment": "tradeoff-tau", "seed": 5,
            "throughput": {"num_bands": 4, "accessed": 4, "min_pd": 0.9},
        },
        "tradeoff-tau-k": {
            "experiment": "tradeoff-tau-k", "seed": 5,
            "throughput": {"num_bands": 4, "accessed": 4, "min_pd": 0.9,
                           "users": 3},
        },
        "mb-metrics": {
            "experiment": "mb-metrics", "seed": 5,
            "scenario": {"snr": 0.1, "num_bands": 4, "idle_prior": 0.7},
            "detector": {"kind": "energy", "n": 125},
        },
        "edges": {
            "experiment": "edges", "seed": 5,
            "edges": {"nfft": 512, "num_scales": 2, "scenes": 2,
                      "num_edges": 3, "noise_floor": 0.01},
        },
        "cs": {
            "experiment": "cs", "seed": 5,
            "cs": {"n": 64, "sparsity_list": [2, 4],
                   "measurements_list": [16, 32], "seeds": 5},
        },
        "bandwidth-sweep": {
            "experiment": "bandwidth-sweep", "seed": 5,
            "throughput": {"num_bands": 6},
        },
    }
    series_of = {
        "coop-roc": "coop_roc", "throughput": "throughput",
        "tradeoff-tau": "tradeoff", "tradeoff-tau-k": "tradeoff",
        "mb-metrics": "mb_metrics", "edges": "edges", "cs": "cs",
        "bandwidth-sweep": "bandwidth",
    }
    for name, cfg in configs.items():
        cfg_path = _write(tmp_path, cfg, name=f"{name}.json")
        out = tmp_path / f"out_{name}"
        assert main(["run", "--config", str(cfg_path), "--out", str(out),
                     "--no-figures"]) == 0, name
        series = series_of[name]
        lines = (out / f"{series}.csv").read_text().splitlines()
        assert lines[0] == ",".join(SCHEMAS[series]), name
        assert len(lines) > 1
        if name == "tradeoff-tau-k":
            tau_k = (out / "tau_k.csv").read_text().splitlines()
            assert tau_k[0] == "k,tau_s,C_bps"
            assert len(tau_k) == 1 + 3
