"""Command-line pipeline: artifacts, exit codes, determinism, flag overrides."""

import json

import pytest

from amvdsn import load_checkpoint, load_dataset
from amvdsn.cli import main


def write_config(path, **overrides):
    cfg = {
        "synth": {
            "clusters": 3,
            "views": 2,
            "view_dims": [12, 9],
            "subspace_dim": 2,
            "samples_per_cluster": 10,
            "noise_std": 0.01,
        },
        "model": {
            "hidden_dim": 8,
            "encoder_depth": 2,
            "lambda1": 10.0,
            "lambda2": 20.0,
            "lambda3": 0.001,
            "weight_reg": "l2",
        },
        "train": {
            "learning_rate": 3e-3,
            "max_epochs": 40,
            "pretrain_max_epochs": 60,
            "pretrain_patience": 30,
        },
        "affinity": {"mode": "plain"},
        "normalize": "minmax",
        "k": 3,
        "out": "run",
        "seed": 0,
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg, indent=2))
    return path


@pytest.fixture
def config_path(tmp_path):
    return write_config(tmp_path / "config.json")


def test_synth_writes_loadable_dataset(tmp_path):
    cfg = write_config(tmp_path / "config.json", out="data")
    assert main(["synth", "--config", str(cfg)]) == 0
    ds = load_dataset(tmp_path / "data")
    assert ds.n_samples == 30
    assert ds.view_dims == [12, 9]
    assert (tmp_path / "data" / "synth_spec.json").exists()


def test_synth_noiseless_output_keeps_subspace_rank(tmp_path):
    raw = json.loads(write_config(tmp_path / "base.json").read_text())
    raw["synth"]["noise_std"] = 0.0
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(raw))
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "data")]) == 0
    ds = load_dataset(tmp_path / "data")
    import numpy as np

    for x in ds.views:
        for c in range(3):
            block = x[:, c * 10 : (c + 1) * 10]
            s = np.linalg.svd(block, compute_uv=False)
            assert (s[2:] < 1e-10).all()


def test_synth_is_byte_deterministic(tmp_path):
    cfg = write_config(tmp_path / "config.json")
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    for name in ("meta", "view_0.csv", "view_1.csv", "labels.csv", "synth_spec.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_full_pipeline_and_artifacts(tmp_path, config_path):
    out = tmp_path / "run"
    assert main(["pretrain", "--config", str(config_path)]) == 0
    assert (out / "pretrain.ckpt").exists()
    log0 = (out / "pretrain_view0.log").read_text().splitlines()
    ckpt = load_checkpoint(out / "pretrain.ckpt")
    assert ckpt.config["kind"] == "pretrain"
    # one log line per epoch actually run
    assert len(log0) == int(log0[-1].split(",")[0])

    assert (
        main(
            [
                "train",
                "--config",
                str(config_path),
                "--from-pretrain",
                str(out / "pretrain.ckpt"),
            ]
        )
        == 0
    )
    assert (out / "model.ckpt").exists()
    assert len((out / "train.log").read_text().splitlines()) == 40

    assert main(["cluster", "--config", str(config_path)]) == 0
    labels = (out / "labels_pred.csv").read_text().splitlines()
    assert len(labels) == 30
    assert all(line in {"0", "1", "2"} for line in labels)

    assert main(["eval", "--config", str(config_path)]) == 0
    text = (out / "metrics.txt").read_text()
    assert text.splitlines()[0].startswith("acc=")
    assert "n_samples=30" in text


def test_eval_identical_files_all_ones(tmp_path, config_path):
    truth = tmp_path / "truth.csv"
    truth.write_text("".join(f"{i % 3}\n" for i in range(9)))
    out = main(
        [
            "eval",
            "--config",
            str(config_path),
            "--pred",
            str(truth),
            "--true",
            str(truth),
        ]
    )
    assert out == 0
    text = (tmp_path / "run" / "metrics.txt").read_text()
    for key in ("acc", "nmi", "ari", "precision", "recall", "f_score"):
        assert f"{key}=1.000000" in text


def test_eval_relabeled_prediction_all_ones(tmp_path, config_path):
    truth = tmp_path / "truth.csv"
    pred = tmp_path / "pred.csv"
    truth.write_text("".join(f"{i % 3}\n" for i in range(9)))
    pred.write_text("".join(f"{(i + 1) % 3}\n" for i in range(9)))
    assert main(["eval", "--config", str(config_path), "--pred", str(pred), "--true", str(truth)]) == 0
    assert "acc=1.000000" in (tmp_path / "run" / "metrics.txt").read_text()


def test_eval_report_matches_library_metrics(tmp_path, config_path):
    import numpy as np

    from amvdsn import evaluate_clustering

    truth = tmp_path / "truth.csv"
    pred = tmp_path / "pred.csv"
    rng = np.random.default_rng(4)
    y_true = rng.integers(0, 3, size=20)
    y_true[:3] = [0, 1, 2]
    y_pred = rng.integers(0, 3, size=20)
    y_pred[:3] = [0, 1, 2]
    truth.write_text("".join(f"{c}\n" for c in y_true))
    pred.write_text("".join(f"{c}\n" for c in y_pred))
    assert main(["eval", "--config", str(config_path), "--pred", str(pred), "--true", str(truth)]) == 0
    report = evaluate_clustering(y_true, y_pred)
    text = (tmp_path / "run" / "metrics.txt").read_text()
    assert text == report.to_text()


def test_cluster_recovers_exact_blocks_from_crafted_checkpoint(tmp_path):
    import numpy as np

    from amvdsn import evaluate_clustering, load_dataset
    from amvdsn.training import Checkpoint, save_checkpoint

    cfg = write_config(tmp_path / "config.json", out="run")
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "data")]) == 0
    raw = json.loads(cfg.read_text())
    del raw["synth"]
    raw["dataset"] = str(tmp_path / "data")
    cfg.write_text(json.dumps(raw))
    ds = load_dataset(tmp_path / "data")
    # a self-expression matrix with exact blocks aligned to the true clusters
    c = np.zeros((30, 30))
    for k in range(3):
        c[k * 10 : (k + 1) * 10, k * 10 : (k + 1) * 10] = 1.0
    np.fill_diagonal(c, 0.0)
    ckpt = Checkpoint(
        config={"kind": "model", "model": {}, "train": {}, "n_samples": 30},
        tensors={"self_expression": c},
        epoch=0,
        history=[],
    )
    out = tmp_path / "run"
    out.mkdir()
    save_checkpoint(ckpt, out / "model.ckpt")
    assert main(["cluster", "--config", str(cfg)]) == 0
    labels = np.array([int(line) for line in (out / "labels_pred.csv").read_text().splitlines()])
    assert evaluate_clustering(ds.labels, labels).acc == 1.0


def test_cluster_reduction_plain_equals_enhanced_identity(tmp_path):
    cfg_plain = write_config(tmp_path / "plain.json", out="run")
    cfg_enh = write_config(
        tmp_path / "enh.json",
        out="run2",
        affinity={"mode": "enhanced", "energy_fraction": 1.0, "power": 1.0},
    )
    assert main(["pretrain", "--config", str(cfg_plain)]) == 0
    assert main(
        [
            "train",
            "--config",
            str(cfg_plain),
            "--from-pretrain",
            str(tmp_path / "run" / "pretrain.ckpt"),
        ]
    ) == 0
    assert main(["cluster", "--config", str(cfg_plain)]) == 0
    ckpt = tmp_path / "run" / "model.ckpt"
    assert main(["cluster", "--config", str(cfg_enh), "--checkpoint", str(ckpt)]) == 0
    a = (tmp_path / "run" / "labels_pred.csv").read_bytes()
    b = (tmp_path / "run2" / "labels_pred.csv").read_bytes()
    assert a == b


def test_train_rerun_reproduces_checkpoint(tmp_path, config_path):
    out = tmp_path / "run"
    assert main(["train", "--config", str(config_path)]) == 0
    first = (out / "model.ckpt").read_bytes()
    assert main(["train", "--config", str(config_path)]) == 0
    assert (out / "model.ckpt").read_bytes() == first


def test_ablation_flags_change_the_model(tmp_path, config_path):
    out = tmp_path / "run"
    assert main(["train", "--config", str(config_path), "--no-shortcut"]) == 0
    ckpt = load_checkpoint(out / "model.ckpt")
    assert ckpt.config["model"]["use_shortcut"] is False
    assert "shortcut_enc_0" not in ckpt.tensors
    assert main(["train", "--config", str(config_path), "--no-consistent"]) == 0
    ckpt = load_checkpoint(out / "model.ckpt")
    assert ckpt.config["model"]["use_consistent_layer"] is False
    assert "consistent_w" not in ckpt.tensors


def test_uci_digit_shaped_config_validates_on_synthetic_standin(tmp_path):
    # hidden 512, depth 2, lambdas [0.5, 0.5, 0.1], l1 regularization
    cfg = write_config(
        tmp_path / "config.json",
        synth={
            "clusters": 3,
            "views": 3,
            "view_dims": [216, 76, 64],
            "subspace_dim": 2,
            "samples_per_cluster": 5,
        },
        model={
            "hidden_dim": 512,
            "encoder_depth": 2,
            "lambda1": 0.5,
            "lambda2": 0.5,
            "lambda3": 0.1,
            "weight_reg": "l1",
        },
        train={"max_epochs": 2},
        k=3,
    )
    assert main(["train", "--config", str(cfg)]) == 0
    ckpt = load_checkpoint(tmp_path / "run" / "model.ckpt")
    assert ckpt.config["model"]["hidden_dim"] == 512
    assert ckpt.config["model"]["weight_reg"] == "l1"


def test_ablate_writes_summary(tmp_path):
    cfg = write_config(
        tmp_path / "config.json",
        train={"max_epochs": 15, "pretrain_max_epochs": 20, "pretrain_patience": 10},
    )
    assert main(["ablate", "--config", str(cfg)]) == 0
    out = tmp_path / "run"
    summary = (out / "ablation_summary.csv").read_text().splitlines()
    assert summary[0] == "variant,final_loss,acc,nmi,ari"
    assert len(summary) == 4
    names = [line.split(",")[0] for line in summary[1:]]
    assert names == ["full", "no_shortcut", "no_consistent"]
    for name in names:
        assert (out / f"ablate_{name}" / "model.ckpt").exists()
        assert (out / f"ablate_{name}" / "labels_pred.csv").exists()


# ---------------------------------------------------------------------------
# exit codes


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "config.json"
    raw = json.loads(write_config(tmp_path / "base.json").read_text())
    raw["mystery_knob"] = 1
    cfg.write_text(json.dumps(raw))
    assert main(["train", "--config", str(cfg)]) == 2
    assert "mystery_knob" in capsys.readouterr().err


def test_both_dataset_and_synth_exits_2(tmp_path):
    cfg = tmp_path / "config.json"
    raw = json.loads(write_config(tmp_path / "base.json").read_text())
    raw["dataset"] = "somewhere"
    cfg.write_text(json.dumps(raw))
    assert main(["train", "--config", str(cfg)]) == 2


def test_bad_k_exits_2(tmp_path):
    cfg = write_config(tmp_path / "config.json", k=1)
    assert main(["train", "--config", str(cfg)]) == 2


def test_missing_dataset_dir_exits_4(tmp_path):
    raw = json.loads(write_config(tmp_path / "base.json").read_text())
    del raw["synth"]
    raw["dataset"] = "no_such_dir"
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(raw))
    assert main(["train", "--config", str(cfg)]) == 4


@pytest.mark.filterwarnings("ignore:overflow", "ignore:invalid value")
def test_divergence_exits_3_without_checkpoint(tmp_path):
    cfg = write_config(
        tmp_path / "config.json",
        train={"learning_rate": 1e12, "max_epochs": 300, "optimizer": "sgd"},
    )
    assert main(["train", "--config", str(cfg)]) == 3
    assert not (tmp_path / "run" / "model.ckpt").exists()


@pytest.mark.filterwarnings("ignore:overflow", "ignore:invalid value")
def test_pretrain_divergence_exits_3_without_checkpoint(tmp_path):
    cfg = write_config(
        tmp_path / "config.json",
        train={"learning_rate": 1e160, "max_epochs": 10, "pretrain_max_epochs": 300,
               "pretrain_patience": 300},
    )
    assert main(["pretrain", "--config", str(cfg)]) == 3
    assert not (tmp_path / "run" / "pretrain.ckpt").exists()


def test_shape_mismatched_pretrain_checkpoint_exits_2(tmp_path, config_path):
    out = tmp_path / "run"
    assert main(["pretrain", "--config", str(config_path)]) == 0
    other = write_config(tmp_path / "other.json", model={"hidden_dim": 5}, out="run2")
    code = main(
        [
            "train",
            "--config",
            str(other),
            "--from-pretrain",
            str(out / "pretrain.ckpt"),
        ]
    )
    assert code == 2
    assert not (tmp_path / "run2" / "model.ckpt").exists()


def test_corrupt_checkpoint_exits_4(tmp_path, config_path):
    out = tmp_path / "run"
    out.mkdir()
    (out / "model.ckpt").write_bytes(b"garbage")
    assert main(["cluster", "--config", str(config_path)]) == 4
