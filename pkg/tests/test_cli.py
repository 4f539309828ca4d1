import json

import numpy as np
import pytest

from inbetween.cli import main
from inbetween.fixtures import make_fixture


def test_fixtures_then_generate(tmp_path, capsys):
    fx = tmp_path / "fx"
    assert main(["fixtures", "--out", str(fx), "--frames", "9", "--size", "12"]) == 0
    assert (fx / "manifest.jsonl").exists()

    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dit": {"n_blocks": 2, "n_heads": 2, "head_dim": 4,
                                       "n_steps": 2, "grid_h": 2, "grid_w": 2, "cond_dim": 6}}))
    out = tmp_path / "run"
    code = main([
        "generate", "--manifest", str(fx / "manifest.jsonl"), "--config", str(cfg),
        "--out", str(out), "--seed", "7",
    ])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["kind"] == "generate"
    assert report["seed"] == 7
    assert len(report["entries"]) == 4
    assert report["flags"] == {"fusion": "kab", "retro_enabled": True}


def test_generate_flag_combinations(tmp_path):
    fx = tmp_path / "fx"
    main(["fixtures", "--out", str(fx), "--frames", "9", "--size", "12"])
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dit": {"n_blocks": 2, "n_heads": 2, "head_dim": 4,
                                       "n_steps": 1, "grid_h": 2, "grid_w": 2, "cond_dim": 6}}))
    base = ["generate", "--manifest", str(fx / "manifest.jsonl"), "--config", str(cfg)]

    out_a = tmp_path / "a"
    assert main(base + ["--out", str(out_a), "--no-kab", "--no-retro"]) == 0
    flags = json.loads((out_a / "report.json").read_text())["flags"]
    assert flags == {"fusion": "triple", "retro_enabled": False}

    out_b = tmp_path / "b"
    assert main(base + ["--out", str(out_b), "--baseline-fusion"]) == 0
    flags = json.loads((out_b / "report.json").read_text())["flags"]
    assert flags == {"fusion": "baseline", "retro_enabled": True}


def test_ablate_and_probe_commands(tmp_path):
    fx = tmp_path / "fx"
    main(["fixtures", "--out", str(fx), "--frames", "9", "--size", "12"])
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "dit": {"n_blocks": 2, "n_heads": 2, "head_dim": 4, "n_steps": 1,
                "grid_h": 2, "grid_w": 2, "cond_dim": 6},
        "probe": {"n_seeds": 5, "f": 9},
    }))
    out = tmp_path / "abl"
    assert main(["ablate", "--manifest", str(fx / "manifest.jsonl"), "--config", str(cfg),
                 "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert len(report["cells"]) == 4

    out_p = tmp_path / "probe"
    assert main(["probe", "--config", str(cfg), "--out", str(out_p)]) == 0
    probe = json.loads((out_p / "report.json").read_text())
    assert probe["kind"] == "probe"
    assert len(probe["profiles"]["vanilla"]["local_mass"]) == 9


def test_metrics_command(tmp_path):
    video = make_fixture("dynamic_motion", F=9, size=12, seed=0)
    np.save(tmp_path / "v.npy", video)
    out = tmp_path / "m"
    assert main(["metrics", "--video", str(tmp_path / "v.npy"),
                 "--reference", str(tmp_path / "v.npy"), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["ssim_mean"] == 1.0
    assert report["psnr_mean"] == "+inf"


def test_negative_seed_is_accepted(tmp_path):
    fx = tmp_path / "fx"
    main(["fixtures", "--out", str(fx), "--frames", "9", "--size", "12"])
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dit": {"n_blocks": 2, "n_heads": 2, "head_dim": 4,
                                       "n_steps": 1, "grid_h": 2, "grid_w": 2, "cond_dim": 6}}))
    out = tmp_path / "neg"
    code = main(["generate", "--manifest", str(fx / "manifest.jsonl"), "--config", str(cfg),
                 "--out", str(out), "--seed", "-3"])
    assert code == 0
    assert json.loads((out / "report.json").read_text())["seed"] == -3


def test_exit_code_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"retro": {"twist": 2}}))
    code = main(["probe", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "retro.twist" in capsys.readouterr().err


def test_exit_code_manifest_error(tmp_path, capsys):
    code = main(["generate", "--manifest", str(tmp_path / "nope.jsonl"),
                 "--out", str(tmp_path / "o")])
    assert code == 3
    assert "manifest" in capsys.readouterr().err


def test_exit_code_numeric_error(tmp_path, capsys):
    # frames smaller than the SSIM window force a numeric failure at run time
    tiny = np.zeros((2, 4, 4))
    tiny[:, 1, 1] = 0.5
    np.save(tmp_path / "t.npy", tiny)
    code = main(["metrics", "--video", str(tmp_path / "t.npy"),
                 "--reference", str(tmp_path / "t.npy"), "--out", str(tmp_path / "o")])
    assert code == 4
    assert "numeric" in capsys.readouterr().err


def test_console_entry_point_runs():
    import subprocess
    import sys

    proc = subprocess.run(
        [sys.executable, "-m", "inbetween.cli", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    for sub in ("generate", "ablate", "probe", "metrics", "fixtures"):
        assert sub in proc.stdout
