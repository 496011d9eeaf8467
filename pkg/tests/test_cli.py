import os
import sys

import pytest

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
sys.path.insert(0, ROOT)  # noqa: E402
import main  # noqa: E402

TINY_CONFIG = """\
# tiny walsh autoencoder for command tests
model.n=8
model.k=4
model.q=8
model.v=1
train.batch=64
train.t_enc=2
train.t_dec=4
train.epochs=2
train.validation_size=200
eval.snr_grid=0:4:8
eval.min_errors=10
eval.max_blocks=2000
eval.batch=1000
seed=5
"""


def write_config(tmp_path, text=TINY_CONFIG, name="tiny.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read(path):
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def output_values(text):
    return dict(line.split("=", 1) for line in text.strip().splitlines() if "=" in line)


def test_bound_prints_thresholds(capsys):
    assert main.run(["bound", "--rate", "0.5", "--n", "32", "--pe", "1e-3"]) == 0
    values = output_values(capsys.readouterr().out)
    assert float(values["shannon_snr_db"]) == pytest.approx(0.0, abs=1e-3)
    assert float(values["fbl_threshold_snr_db"]) == pytest.approx(2.99, abs=0.02)


def test_bound_table(capsys):
    assert main.run(["bound", "--rates", "0.5,1,2"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "rate,shannon_snr_db,fbl_threshold_snr_db"
    assert len(lines) == 4


def test_bound_rejects_bad_arguments():
    assert main.run(["bound", "--pe", "2"]) == 1
    assert main.run(["bound", "--rate", "-1"]) == 1


def test_power_for_pareto_config(capsys):
    config = os.path.join(ROOT, "configs", "wh_q500_v4.cfg")
    assert main.run(["power", "--config", config]) == 0
    values = output_values(capsys.readouterr().out)
    assert int(values["ops"]) == 3_112_032
    assert values["converters"] == "walsh"
    assert 3.37e9 <= float(values["ee_bit_per_joule"]) <= 3.73e9


def test_power_polar_writes_csv(tmp_path, capsys):
    out = str(tmp_path / "power")
    config = os.path.join(ROOT, "configs", "polar_l8.cfg")
    assert main.run(["power", "--config", config, "--kind", "polar", "--out", out]) == 0
    values = output_values(capsys.readouterr().out)
    assert values["converters"] == "ti"
    assert "provenance" in values
    assert read(os.path.join(out, "power.csv")).startswith("component,watts")


def test_power_polar_energies_from_config(tmp_path, capsys):
    config = write_config(
        tmp_path,
        "polar.n=32\npolar.k_info=16\npolar.list_size=8\n"
        "power.polar_energy.8=1e-8\npower.polar_energy.16=4e-8\n"
        "power.polar_provenance=vendor datasheet\n",
        name="polar-energy.cfg",
    )
    assert main.run(["power", "--config", config, "--kind", "polar"]) == 0
    values = output_values(capsys.readouterr().out)
    assert float(values["p_bb_w"]) == pytest.approx(1e-8 * 32 / 256 * 5e9 / 32, rel=1e-5)
    assert values["provenance"] == "vendor datasheet"

    assert main.run(["power", "--config", config, "--kind", "polar", "--list-size", "16"]) == 0
    values = output_values(capsys.readouterr().out)
    assert float(values["p_bb_w"]) == pytest.approx(4e-8 * 32 / 256 * 5e9 / 32, rel=1e-5)
    assert main.run(["power", "--config", config, "--kind", "polar", "--list-size", "32"]) == 1


def test_unknown_config_key_is_rejected(tmp_path):
    config = write_config(tmp_path, TINY_CONFIG + "model.width=3\n", name="bad.cfg")
    assert main.run(["--quiet", "train", "--config", config, "--out", str(tmp_path / "x")]) == 1
    assert not os.path.exists(tmp_path / "x" / "model.ckpt")


def test_missing_config_is_rejected(tmp_path):
    assert main.run(["power", "--config", str(tmp_path / "missing.cfg")]) == 1


def test_threshold_command(tmp_path, capsys):
    csv_path = tmp_path / "bler.csv"
    csv_path.write_text(
        "# seed=0\nsnr_db,blocks,block_errors,bler\n2,10000,100,0.01\n3,1000000,100,0.0001\n"
    )
    assert main.run(["threshold", "--bler-csv", str(csv_path), "--target", "1e-3"]) == 0
    assert capsys.readouterr().out.strip() == "threshold_snr_db=2.5000"


def test_threshold_unbracketed_exit_code(tmp_path):
    csv_path = tmp_path / "bler.csv"
    csv_path.write_text("snr_db,blocks,block_errors,bler\n0,1000,500,0.5\n1,1000,100,0.1\n")
    assert main.run(["threshold", "--bler-csv", str(csv_path), "--target", "1e-3"]) == 2


def test_train_and_evaluate_are_reproducible(tmp_path):
    config = write_config(tmp_path)
    runs = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        assert main.run(["--quiet", "train", "--config", config, "--out", out]) == 0
        checkpoint = os.path.join(out, "model.ckpt")
        eval_out = str(tmp_path / f"{name}-eval")
        code = main.run(
            [
                "--quiet",
                "evaluate",
                "--config",
                config,
                "--checkpoint",
                checkpoint,
                "--workers",
                "1",
                "--out",
                eval_out,
            ]
        )
        assert code == 0
        runs.append(
            (
                read(checkpoint),
                read(os.path.join(out, "train_log.csv")),
                read(os.path.join(eval_out, "bler.csv")),
            )
        )
    assert runs[0] == runs[1]
    meta = read(str(tmp_path / "a" / "run_meta.cfg"))
    assert "seed=5" in meta
    assert "command=train" in meta


def test_seed_override_changes_training(tmp_path):
    config = write_config(tmp_path)
    assert main.run(["--quiet", "train", "--config", config, "--out", str(tmp_path / "a")]) == 0
    code = main.run(
        ["--quiet", "train", "--config", config, "--seed", "6", "--out", str(tmp_path / "b")]
    )
    assert code == 0
    assert read(str(tmp_path / "a" / "model.ckpt")) != read(str(tmp_path / "b" / "model.ckpt"))
    assert "seed=6" in read(str(tmp_path / "b" / "config.cfg"))


def test_train_aborts_with_exit_code_three(tmp_path):
    config = write_config(tmp_path, TINY_CONFIG + "train.lr=1e300\nmodel.batch_norm=false\n")
    assert main.run(["--quiet", "train", "--config", config, "--out", str(tmp_path / "x")]) == 3


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(main.OUTPUT_ROOT_ENV, str(tmp_path / "runs"))
    config = write_config(tmp_path)
    assert main.run(["--quiet", "train", "--config", config]) == 0
    assert os.path.isfile(tmp_path / "runs" / "train-tiny" / "model.ckpt")
    assert main.run(["--quiet", "train", "--config", config]) == 0
    assert os.path.isfile(tmp_path / "runs" / "train-tiny (1)" / "model.ckpt")


def test_polar_sim_writes_curve(tmp_path):
    config = write_config(
        tmp_path,
        "polar.n=16\npolar.k_info=6\npolar.crc_len=0\npolar.list_size=2\n"
        "eval.snr_grid=0,2\neval.min_errors=10\neval.max_blocks=1000\neval.batch=500\n",
        name="polar.cfg",
    )
    out = str(tmp_path / "polar")
    code = main.run(
        ["--quiet", "polar-sim", "--config", config, "--workers", "1", "--out", out]
    )
    assert code == 0
    lines = read(os.path.join(out, "bler.csv")).splitlines()
    assert "snr_db,blocks,block_errors,bler" in lines
    assert lines[-1].startswith("2,")


def test_sweep_writes_summary(tmp_path):
    config = write_config(
        tmp_path, TINY_CONFIG + "sweep.model.q=4,8\nsweep.model.v=1,2\n", name="sweep.cfg"
    )
    out = str(tmp_path / "sweep")
    assert main.run(["--quiet", "sweep", "--config", config, "--workers", "1", "--out", out]) == 0
    lines = read(os.path.join(out, "summary.csv")).splitlines()
    assert lines[0] == "point,model.q,model.v,threshold_snr,ops,params,ee"
    assert len(lines) == 5
    assert lines[1].startswith("point-000,4,1,")
    assert os.path.isfile(os.path.join(out, "point-003", "model.ckpt"))


def test_sweep_needs_sweep_keys(tmp_path):
    config = write_config(tmp_path)
    assert main.run(["--quiet", "sweep", "--config", config, "--out", str(tmp_path / "s")]) == 1


def test_sweep_is_reproducible(tmp_path):
    config = write_config(tmp_path, TINY_CONFIG + "sweep.model.q=4,8\n", name="sweep.cfg")
    artifacts = []
    for name, workers in (("a", "1"), ("b", "2")):
        out = str(tmp_path / name)
        args = ["--quiet", "sweep", "--config", config, "--workers", workers, "--out", out]
        assert main.run(args) == 0
        files = [os.path.join(out, "summary.csv")]
        for point in ("point-000", "point-001"):
            for leaf in ("model.ckpt", "train_log.csv", "bler.csv"):
                files.append(os.path.join(out, point, leaf))
        artifacts.append([read(path) for path in files])
    assert artifacts[0] == artifacts[1]
