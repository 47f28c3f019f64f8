import json
import subprocess
import sys

import numpy as np
import pytest

from gmp.cli import main
from gmp.command import CommandEncoder
from gmp.cvae import Cvae, CvaeConfig
from gmp.dataset import load_clip, save_clip, synth_gait
from gmp.model import default_model, keypoints_local


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory, model):
    d = tmp_path_factory.mktemp("clips")
    for i, speed in enumerate((0.6, 1.1)):
        clip = synth_gait(speed, duration=11.0, seed=20 + i, model=model)
        save_clip(d / f"walk{i}.gmpclip", clip)
    return d


@pytest.fixture(scope="module")
def tiny_ckpts(tmp_path_factory, data_dir):
    d = tmp_path_factory.mktemp("ckpts")
    gmp_ckpt, cmd_ckpt = d / "gmp.ckpt", d / "cmd.ckpt"
    assert main(["train-gmp", "--data", str(data_dir), "--out", str(gmp_ckpt),
                 "--epochs", "2", "--window", "4", "--seed", "5"]) == 0
    assert main(["train-cmd", "--gmp", str(gmp_ckpt), "--data", str(data_dir),
                 "--out", str(cmd_ckpt), "--epochs", "1", "--seed", "5"]) == 0
    return gmp_ckpt, cmd_ckpt


# ---------------------------------------------------------------------------
# exit codes


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_missing_required_flag_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["retarget", "--out", "x.gmpclip"])
    assert exc.value.code == 1
    assert "--input" in capsys.readouterr().err


def test_bad_flag_value_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["retarget", "--input", "a", "--out", "b", "--iters", "many"])
    assert exc.value.code == 1


def test_missing_input_file_reports_error(tmp_path, capsys):
    rc = main(["retarget", "--input", str(tmp_path / "nope.gmpclip"),
               "--out", str(tmp_path / "o.gmpclip")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_console_script_is_installed():
    proc = subprocess.run(["gmp", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "retarget" in proc.stdout
    proc = subprocess.run(["gmp", "frobnicate"], capture_output=True, text=True)
    assert proc.returncode == 2


# ---------------------------------------------------------------------------
# end-to-end on tiny budgets


def test_retarget_end_to_end(tmp_path, model, capsys):
    src = tmp_path / "src.gmpclip"
    save_clip(src, synth_gait(0.8, duration=0.4, seed=3, model=model))
    out = tmp_path / "robot.gmpclip"
    rc = main(["retarget", "--input", str(src), "--out", str(out),
               "--scale", "1.1", "--iters", "40"])
    assert rc == 0
    assert "reduction" in capsys.readouterr().out
    assert len(load_clip(out)) == 20


def test_train_generate_eval_pipeline(tmp_path, data_dir, tiny_ckpts, capsys):
    gmp_ckpt, cmd_ckpt = tiny_ckpts
    decoder = Cvae.load(gmp_ckpt)
    assert decoder.config.latent == 32
    CommandEncoder.load(cmd_ckpt)

    gen = tmp_path / "gen"
    gen.mkdir()
    capsys.readouterr()
    rc = main(["generate", "--gmp", str(gmp_ckpt), "--out", str(gen / "a.gmpclip"),
               "--n", "30", "--seed", "1"])
    assert rc == 0
    assert len(load_clip(gen / "a.gmpclip")) == 30
    rc = main(["generate", "--gmp", str(gmp_ckpt), "--cmd", str(cmd_ckpt),
               "--command", "0.5,0,0", "--out", str(gen / "b.gmpclip"), "--n", "30"])
    assert rc == 0

    report = tmp_path / "report.txt"
    rc = main(["eval", "--robot", str(gen), "--ref", str(data_dir), "--out", str(report)])
    assert rc == 0
    out = capsys.readouterr().out
    for col in ("JFID", "KFID", "JDTW", "KDTW", "MELV"):
        assert col in out
    assert report.read_text().strip()


def test_generate_command_requires_encoder(tmp_path, tiny_ckpts, capsys):
    gmp_ckpt, _ = tiny_ckpts
    capsys.readouterr()
    rc = main(["generate", "--gmp", str(gmp_ckpt), "--command", "0.5,0,0",
               "--out", str(tmp_path / "x.gmpclip")])
    assert rc == 1
    assert "requires --cmd" in capsys.readouterr().err


def test_eval_reward_on_standing_state(tmp_path, model, capsys):
    state = tmp_path / "state.json"
    state.write_text("{}")
    q0 = np.zeros(21)
    ref = tmp_path / "ref.json"
    ref.write_text(json.dumps({"q_ref": q0.tolist(),
                               "p_ref": keypoints_local(model, q0).tolist()}))
    rc = main(["eval-reward", "--state", str(state), "--ref", str(ref),
               "--command", "0,0,0"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "8.3" in out
    assert "no_fly" in out


def test_bad_command_string_reports_error(tmp_path, tiny_ckpts, capsys):
    gmp_ckpt, cmd_ckpt = tiny_ckpts
    capsys.readouterr()
    rc = main(["generate", "--gmp", str(gmp_ckpt), "--cmd", str(cmd_ckpt),
               "--command", "0.5 0 0", "--out", str(tmp_path / "x.gmpclip")])
    assert rc == 1
    assert "vx,vy,yaw_rate" in capsys.readouterr().err


def test_serve_parses_address(tmp_path, monkeypatch):
    cvae = Cvae(CvaeConfig(hidden=(8, 8)), rng=np.random.default_rng(0))
    enc = CommandEncoder(rng=np.random.default_rng(1))
    gmp_ckpt, cmd_ckpt = tmp_path / "g.ckpt", tmp_path / "c.ckpt"
    cvae.save(gmp_ckpt)
    enc.save(cmd_ckpt)
    seen = {}

    def fake_run(config, **kwargs):
        seen["config"] = config
        seen.update(kwargs)

    monkeypatch.setattr("gmp.cli.run_service", fake_run)
    rc = main(["serve", "--gmp", str(gmp_ckpt), "--cmd", str(cmd_ckpt),
               "--addr", "0.0.0.0:9001", "--rate", "80"])
    assert rc == 0
    assert seen["host"] == "0.0.0.0" and seen["port"] == 9001
    assert seen["config"].rate == 80.0
    assert seen["config"].gmp_checkpoint == str(gmp_ckpt)
