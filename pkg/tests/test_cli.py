import json

import numpy as np

from swflow.cli import main

DISK = {"kind": "sliced_uniform_disk"}
DIRS32 = {"kind": "equispaced", "L": 32, "phase": 0.0}


def run(tmp_path, command, cfg, extra=(), name="run"):
    cfg_path = tmp_path / f"{name}.json"
    out_dir = tmp_path / f"{name}_out"
    cfg_path.write_text(json.dumps(cfg))
    code = main([command, "--config", str(cfg_path), "--out", str(out_dir),
                 *extra])
    return code, out_dir


def test_malformed_json_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    assert main(["descend", "--config", str(cfg),
                 "--out", str(tmp_path / "o")]) == 2
    assert "bad config" in capsys.readouterr().err


def test_unknown_field_exits_2(tmp_path):
    cfg = {"target": DISK, "dirs": DIRS32, "step_multiple": 2, "iters": 3,
           "init": {"kind": "uniform_box", "N": 10, "lo": -1, "hi": 1},
           "bogus_field": 1}
    code, _ = run(tmp_path, "descend", cfg)
    assert code == 2
    cfg2 = {"target": {"kind": "sliced_uniform_disk", "wat": 3},
            "dirs": DIRS32, "step_multiple": 2, "iters": 3,
            "init": {"kind": "uniform_box", "N": 10, "lo": -1, "hi": 1}}
    code, _ = run(tmp_path, "descend", cfg2, name="run2")
    assert code == 2


def test_on_diagonal_init_exits_3(tmp_path):
    cfg = {"target": DISK, "dirs": DIRS32, "step_multiple": 2, "iters": 3,
           "init": {"kind": "explicit",
                    "points": [[0.1, 0.1], [0.1, 0.1], [0.5, 0.0]]}}
    code, _ = run(tmp_path, "descend", cfg)
    assert code == 3


def test_descend_outputs(tmp_path):
    cfg = {"target": DISK, "dirs": DIRS32, "step_multiple": 2.0, "iters": 15,
           "init": {"kind": "uniform_box", "N": 20, "lo": -1, "hi": 1},
           "seed": 4}
    code, out = run(tmp_path, "descend", cfg)
    assert code == 0
    trace = (out / "trace.csv").read_text()
    assert trace.startswith("# format_version=1 config_sha256=")
    assert "convention=F" in trace.splitlines()[0]
    assert trace.splitlines()[1] == "k,energy,grad_norm,min_sep,lemma_slack"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["stop_reason"] in {"converged", "max_iters"}
    assert summary["separation_bound_satisfied"] in {True, False}
    cloud = np.loadtxt(out / "cloud.csv", delimiter=",", comments="#",
                       skiprows=2)
    assert cloud.shape == (20, 2)
    # energies monotone at the theoretical step
    rows = [ln.split(",") for ln in trace.splitlines()[2:]]
    energies = [float(r[1]) for r in rows]
    assert all(b <= a + 1e-12 for a, b in zip(energies, energies[1:]))


def test_perturb_vector_field_verdict(tmp_path):
    cfg = {"target": DISK, "dirs": {"kind": "equispaced", "L": 64,
                                    "phase": "pi/2"},
           "mode": "vector_field", "cloud": {"kind": "segment", "N": 50},
           "ts": [-0.05, -0.02, -0.01, 0.0, 0.01, 0.02, 0.05]}
    code, out = run(tmp_path, "perturb", cfg)
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["local_max"] is True
    first = (out / "curve.csv").read_text().splitlines()[0]
    assert "convention=sw2_squared" in first


def test_perturb_kink_needs_zero(tmp_path):
    cfg = {"target": DISK, "dirs": {"kind": "equispaced", "L": 10,
                                    "phase": "pi/2"},
           "mode": "kink", "cloud": {"kind": "segment", "N": 10},
           "ts": [-0.02, -0.01, 0.01, 0.02]}
    code, _ = run(tmp_path, "perturb", cfg)
    assert code == 2


def test_perturb_kink_slope_jump(tmp_path):
    cfg = {"target": DISK, "dirs": {"kind": "equispaced", "L": 10,
                                    "phase": "pi/2"},
           "mode": "kink", "cloud": {"kind": "segment", "N": 10},
           "ts": [-0.01, -0.0001, 0.0, 0.0001, 0.01]}
    code, out = run(tmp_path, "perturb", cfg)
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["slope_jump"] < -0.1


def test_criticality_verdicts(tmp_path):
    base = {"target": DISK,
            "dirs": {"kind": "equispaced", "L": 500, "phase": "pi/2+pi/500"},
            "cloud": {"kind": "segment", "N": 100}}
    code, out = run(tmp_path, "criticality", base)
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["critical_at_tol"] is True
    assert summary["max_residual"] <= 1e-2
    rnd = {"target": DISK, "dirs": DIRS32,
           "cloud": {"kind": "uniform_box", "N": 30, "lo": -1, "hi": 1},
           "seed": 3}
    code, out = run(tmp_path, "criticality", rnd, name="rnd")
    summary = json.loads((out / "summary.json").read_text())
    assert summary["critical_at_tol"] is False


def test_sweep_outputs(tmp_path):
    cfg = {"target": DISK, "dirs": DIRS32, "multiples": [0.5, 2.0],
           "iters": 10,
           "init": {"kind": "uniform_box", "N": 30, "lo": -1, "hi": 1},
           "seed": 2}
    code, out = run(tmp_path, "sweep", cfg)
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[1] == "multiple,k,energy,grad_norm,min_sep,lemma_slack"
    summary = json.loads((out / "summary.json").read_text())
    finals = {r["multiple"]: r["final_energy"] for r in summary["runs"]}
    assert finals[2.0] < finals[0.5]


def test_cells_output_and_tie(tmp_path):
    cfg = {"target": DISK, "dirs": {"kind": "sampled", "L": 20, "dim": 2,
                                    "seed": 5},
           "cloud": {"kind": "uniform_box", "N": 8, "lo": -1, "hi": 1},
           "seed": 6}
    code, out = run(tmp_path, "cells", cfg)
    assert code == 0
    payload = json.loads((out / "cell.json").read_text())
    assert payload["strictly_convex"] is True
    assert payload["decomposition_gap"] < 1e-9
    tie = {"target": DISK, "dirs": {"kind": "equispaced", "L": 4,
                                    "phase": 0.0},
           "cloud": {"kind": "segment", "N": 5}}
    code, _ = run(tmp_path, "cells", tie, name="tie")
    assert code == 2


def test_seed_flag_overrides_config(tmp_path):
    cfg = {"target": DISK, "dirs": DIRS32, "step_multiple": 2.0, "iters": 5,
           "init": {"kind": "uniform_box", "N": 15, "lo": -1, "hi": 1},
           "seed": 1}
    _, out_a = run(tmp_path, "descend", cfg, name="a")
    _, out_b = run(tmp_path, "descend", cfg, extra=["--seed", "1"], name="b")
    _, out_c = run(tmp_path, "descend", cfg, extra=["--seed", "99"], name="c")
    assert (out_a / "cloud.csv").read_text() == (out_b / "cloud.csv").read_text()
    assert (out_a / "cloud.csv").read_text() != (out_c / "cloud.csv").read_text()


def test_env_threads_fallback(tmp_path, monkeypatch):
    cfg = {"target": DISK, "dirs": DIRS32, "step_multiple": 2.0, "iters": 5,
           "init": {"kind": "uniform_box", "N": 15, "lo": -1, "hi": 1},
           "seed": 1}
    monkeypatch.setenv("SWFLOW_THREADS", "3")
    code, out_env = run(tmp_path, "descend", cfg, name="env")
    assert code == 0
    monkeypatch.delenv("SWFLOW_THREADS")
    code, out_one = run(tmp_path, "descend", cfg, name="one")
    assert (out_env / "trace.csv").read_text() == (out_one / "trace.csv").read_text()
    monkeypatch.setenv("SWFLOW_THREADS", "oops")
    code, _ = run(tmp_path, "descend", cfg, name="badenv")
    assert code == 2


def test_plot_flag_renders_figures(tmp_path):
    cfg = {"target": DISK, "dirs": DIRS32, "step_multiple": 2.0, "iters": 5,
           "init": {"kind": "uniform_box", "N": 15, "lo": -1, "hi": 1},
           "seed": 1}
    code, out = run(tmp_path, "descend", cfg, extra=["--plot"], name="plot")
    assert code == 0
    assert (out / "descent.png").exists()
    pcfg = {"target": DISK, "dirs": {"kind": "equispaced", "L": 16,
                                     "phase": "pi/2"},
            "mode": "vector_field", "cloud": {"kind": "segment", "N": 20},
            "ts": [-0.02, -0.01, 0.0, 0.01, 0.02]}
    code, out = run(tmp_path, "perturb", pcfg, extra=["--plot"], name="pplot")
    assert code == 0
    assert (out / "curve.png").exists()


def test_shell_target_spec(tmp_path):
    cfg = {"target": {"kind": "empirical", "sampler": "shell", "r_in": 1.0,
                      "r_out": 2.0, "M": 500, "seed": 8},
           "dirs": {"kind": "equispaced", "L": 32, "phase": "pi/2"},
           "mode": "vector_field", "cloud": {"kind": "segment", "N": 30},
           "ts": [-0.02, -0.01, 0.0, 0.01, 0.02], "deltas": [0.01, 0.02]}
    code, out = run(tmp_path, "perturb", cfg)
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["local_max"] in {True, False}
