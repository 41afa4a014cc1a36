import json
import math

import pytest

from kklattice.cli import RunConfig, main

CONFIGS = __import__("pathlib").Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, cfg, name="run.cfg"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def base_cfg(**over):
    cfg = {
        "lattice": {"n_min": -100, "n_max": 100},
        "potential": {"V0_im": 1.0, "omega_a": 10.0, "alpha": 0.3, "m": 1, "v_over_kappa_a": 0.4},
        "packet": {"q0_a": math.pi / 2, "d_over_a": -50.0, "w_over_a": 5.0, "side": "left"},
    }
    cfg.update(over)
    return cfg


def test_shipped_configs_parse():
    for name in ("fig1c", "fig3", "fig4", "fig5", "scan", "born", "potential_m2"):
        RunConfig.load(CONFIGS / f"{name}.cfg")


def test_dispersion_above_critical(capsys):
    assert main(["dispersion", "--config", str(CONFIGS / "fig1c.cfg")]) == 0
    out = capsys.readouterr().out
    assert "Q set: empty" in out


def test_dispersion_rest_frame(tmp_path, capsys):
    cfg = base_cfg(potential={"omega_a": 10.0, "alpha": 0.3, "v_over_kappa_a": 0.0})
    assert main(["dispersion", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "q set: 1.57079632679" in out and "Q set: -1.57079632679" in out
    lines = (tmp_path / "dispersion.csv").read_text().splitlines()
    assert lines[0].startswith("#") and len(lines) == 4


def test_validation_errors_are_field_level(tmp_path, capsys):
    cfg = base_cfg()
    cfg["potential"]["alpha"] = -1
    assert main(["scatter", "--config", write(tmp_path, cfg)]) == 2
    assert "potential.alpha" in capsys.readouterr().err
    cfg = base_cfg()
    cfg["packet"]["side"] = "top"
    assert main(["scatter", "--config", write(tmp_path, cfg)]) == 2
    cfg = base_cfg()
    cfg["lattice"]["bogus"] = 1
    assert main(["scatter", "--config", write(tmp_path, cfg)]) == 2
    assert "unknown keys" in capsys.readouterr().err


def test_missing_or_broken_config(tmp_path):
    assert main(["dispersion", "--config", str(tmp_path / "nope.cfg")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("{not json")
    assert main(["dispersion", "--config", str(bad)]) == 2
    assert main(["unknown-command", "--config", str(bad)]) == 2


def test_scan_rejects_supercritical(tmp_path, capsys):
    cfg = base_cfg(scan={"v_over_kappa_a": [0.4, 2.0], "omega_a": [10.0]})
    assert main(["scan", "--config", write(tmp_path, cfg)]) == 2
    assert "critical" in capsys.readouterr().err


def test_scan_empty_grid(tmp_path):
    cfg = base_cfg(scan={"v_over_kappa_a": [], "omega_a": [10.0]})
    assert main(["scan", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "scan.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("v_over_kappa_a,")


def test_scatter_writes_report_and_snapshots(tmp_path):
    cfg = base_cfg(
        lattice={"n_min": -200, "n_max": 200},
        output={"t_final_kappa": 50.0},
    )
    path = write(tmp_path, cfg)
    assert main(["scatter", "--config", path, "--out", str(tmp_path), "--snapshots", "0,25,50"]) == 0
    assert main(["scatter", "--config", path, "--out", str(tmp_path)]) == 0
    report = (tmp_path / "report.csv").read_text().splitlines()
    assert report[0].startswith("#") and len(report) == 4  # header appended once
    snaps = (tmp_path / "snapshots_left.csv").read_text().splitlines()
    assert len(snaps) == 2 + 3 * 401
    assert (tmp_path / "reference_left.csv").exists()


def test_scatter_edge_leak_exit_code(tmp_path):
    cfg = base_cfg(lattice={"n_min": -60, "n_max": 60}, packet={"d_over_a": -30.0, "side": "left"})
    assert main(["scatter", "--config", write(tmp_path, cfg)]) == 3


def test_bad_snapshot_flag(tmp_path):
    path = write(tmp_path, base_cfg())
    assert main(["scatter", "--config", path, "--snapshots", "1,x"]) == 2
    assert main(["scatter", "--config", path, "--snapshots", "80"]) == 2


def test_born_refuses_rest_frame(tmp_path, capsys):
    cfg = base_cfg(potential={"V0_im": 1.0, "omega_a": 10.0, "alpha": 0.3, "v_over_kappa_a": 0.0})
    assert main(["born", "--config", write(tmp_path, cfg)]) == 3
    assert "pole in integration range" in capsys.readouterr().err


def test_born_csv(tmp_path):
    cfg = base_cfg(potential={"V0_im": 1.0, "omega_a": 4.0, "alpha": 0.3, "v_over_kappa_a": 0.4},
                   born={"deltas": [4.0, 8.0], "decay_deltas": [2.0, 4.0]})
    assert main(["born", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "born.csv").read_text().splitlines()
    assert lines[1] == "delta,root,kind,re,im,mapped_re0,mapped_im0"
    assert len(lines) == 2 + 2 * 5


def test_potential_check(capsys):
    assert main(["potential-check", "--config", str(CONFIGS / "potential_m2.cfg")]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 3


def test_table_potential(tmp_path):
    import numpy as np

    from kklattice.potentials import save_table

    save_table(tmp_path / "v.txt", np.arange(-3, 4), 0.1 * np.ones(7))
    cfg = base_cfg(potential={"table": "v.txt"})
    rc = RunConfig.from_dict(cfg, tmp_path)
    pot = rc.potential.build(rc.lattice.spec())
    assert pot.values == pytest.approx(0.1 * np.ones(7))
    cfg["potential"]["v_over_kappa_a"] = 0.4
    with pytest.raises(ValueError):
        RunConfig.from_dict(cfg, tmp_path)
