"""Command-line pipeline: synth, pretrain, train, cluster, eval, ablate.

Every command is driven by one JSON run-config file; command-line flags
override file values. Commands are idempotent for a fixed seed: rerunning
rewrites its outputs with identical bytes. Exit status: 0 on success, 2 for
configuration errors, 3 for numeric failures, 4 for file problems.

Run-config keys::

    {
      "dataset": "path/to/dataset/dir",      # exactly one of dataset/synth
      "synth": {"clusters": ..., "views": ..., "view_dims": [...],
                "subspace_dim": ..., "samples_per_cluster": ...,
                "noise_std": ..., "seed": ...},   # seed defaults to top seed
      "model": {"hidden_dim": ..., "encoder_depth": ..., "lambda1": ...,
                "lambda2": ..., "lambda3": ..., "weight_reg": "l1"|"l2",
                "use_shortcut": true, "use_consistent_layer": true},
      "train": {"learning_rate": ..., "max_epochs": ...,
                "pretrain_patience": ..., "pretrain_max_epochs": ...,
                "optimizer": "adam"|"sgd", "freeze_encoders": true,
                "log_every": 1},
      "affinity": {"mode": "plain"|"enhanced", "energy_fraction": 1.0,
                   "power": 1.0},
      "normalize": "minmax"|"unit_sample"|"none",
      "k": <clusters for the spectral step, >= 2>,
      "out": "output/dir",
      "seed": <int>
    }
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import clustering, data, metrics, model, training
from .errors import CheckpointError, ConfigError, DataFormatError, NumericError

__all__ = ["main", "RunConfig", "load_run_config"]

PRETRAIN_CKPT = "pretrain.ckpt"
MODEL_CKPT = "model.ckpt"
LABELS_PRED = "labels_pred.csv"
METRICS_FILE = "metrics.txt"

_SYNTH_KEYS = {
    "clusters",
    "views",
    "view_dims",
    "subspace_dim",
    "samples_per_cluster",
    "noise_std",
    "seed",
}
_MODEL_KEYS = {
    "hidden_dim",
    "encoder_depth",
    "lambda1",
    "lambda2",
    "lambda3",
    "weight_reg",
    "use_shortcut",
    "use_consistent_layer",
}
_TRAIN_KEYS = {
    "learning_rate",
    "max_epochs",
    "pretrain_patience",
    "pretrain_max_epochs",
    "optimizer",
    "freeze_encoders",
    "log_every",
}
_AFFINITY_KEYS = {"mode", "energy_fraction", "power"}
_TOP_KEYS = {"dataset", "synth", "model", "train", "affinity", "normalize", "k", "out", "seed"}


@dataclass
class RunConfig:
    dataset: str | None
    synth: dict | None
    model: dict
    train: dict
    affinity: dict
    normalize: str
    k: int
    out: str
    seed: int
    config_dir: Path = field(default_factory=Path)

    def validate(self):
        if (self.dataset is None) == (self.synth is None):
            raise ConfigError("exactly one of 'dataset' and 'synth' must be present")
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if self.normalize not in ("minmax", "unit_sample", "none"):
            raise ConfigError(f"unknown normalize mode {self.normalize!r}")
        if "hidden_dim" not in self.model:
            raise ConfigError("model section must set 'hidden_dim'")
        return self

    def out_dir(self):
        out = Path(self.out)
        if not out.is_absolute():
            out = self.config_dir / out
        return out

    def synth_spec(self):
        kwargs = dict(self.synth)
        kwargs.setdefault("seed", self.seed)
        return data.SynthSpec(**kwargs).validate()

    def load_data(self):
        if self.dataset is not None:
            path = Path(self.dataset)
            if not path.is_absolute():
                path = self.config_dir / path
            ds = data.load_dataset(path)
        else:
            ds = data.synth_subspaces(self.synth_spec())
        return data.normalize(ds, self.normalize)

    def model_config(self, view_dims):
        return model.ModelConfig(view_dims=view_dims, seed=self.seed, **self.model).validate()

    def train_config(self):
        return training.TrainConfig(**self.train).validate()

    def affinity_options(self):
        return clustering.AffinityOptions(**self.affinity).validate()


def _reject_unknown(section, given, allowed, where):
    for key in given:
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}' in config section '{where}'")


def load_run_config(path):
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    _reject_unknown("top", raw, _TOP_KEYS, "top level")
    for section, allowed in (
        ("synth", _SYNTH_KEYS),
        ("model", _MODEL_KEYS),
        ("train", _TRAIN_KEYS),
        ("affinity", _AFFINITY_KEYS),
    ):
        if section in raw:
            if not isinstance(raw[section], dict):
                raise ConfigError(f"config section '{section}' must be an object")
            _reject_unknown(section, raw[section], allowed, section)
    if "k" not in raw:
        raise ConfigError("config must set 'k'")
    return RunConfig(
        dataset=raw.get("dataset"),
        synth=raw.get("synth"),
        model=raw.get("model", {}),
        train=raw.get("train", {}),
        affinity=raw.get("affinity", {}),
        normalize=raw.get("normalize", "minmax"),
        k=int(raw["k"]),
        out=raw.get("out", "."),
        seed=int(raw.get("seed", 0)),
        config_dir=path.parent,
    ).validate()


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.out = args.out
        cfg.config_dir = Path.cwd()
    if getattr(args, "no_shortcut", False):
        cfg.model["use_shortcut"] = False
    if getattr(args, "no_consistent", False):
        cfg.model["use_consistent_layer"] = False
    if getattr(args, "optimizer", None) is not None:
        cfg.train["optimizer"] = args.optimizer
    return cfg.validate()


def _write_pretrain_logs(out, result, log_every):
    for v, history in enumerate(result.histories):
        with open(out / f"pretrain_view{v}.log", "w", encoding="utf-8", newline="\n") as fh:
            last = history[-1]["epoch"]
            for entry in history:
                if entry["epoch"] % log_every == 0 or entry["epoch"] == last:
                    values = ",".join(repr(float(entry[k])) for k in training.LOG_FIELDS)
                    fh.write(f"{entry['epoch']},{values}\n")


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args):
    cfg = _apply_overrides(load_run_config(args.config), args)
    if cfg.synth is None:
        raise ConfigError("synth command needs a 'synth' section in the config")
    spec = cfg.synth_spec()
    dataset = data.synth_subspaces(spec)
    out = cfg.out_dir()
    data.save_dataset(dataset, out)
    with open(out / "synth_spec.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(
            {
                "clusters": spec.clusters,
                "views": spec.views,
                "view_dims": list(spec.view_dims),
                "subspace_dim": spec.subspace_dim,
                "samples_per_cluster": spec.samples_per_cluster,
                "noise_std": spec.noise_std,
                "seed": spec.seed,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    print(f"wrote dataset with N={dataset.n_samples} to {out}")
    return 0


def cmd_pretrain(args):
    cfg = _apply_overrides(load_run_config(args.config), args)
    dataset = cfg.load_data()
    model_config = cfg.model_config(dataset.view_dims)
    train_config = cfg.train_config()
    out = cfg.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    result = training.pretrain(dataset, model_config, train_config)
    ckpt = result.checkpoint(model_config, train_config)
    training.save_checkpoint(ckpt, out / PRETRAIN_CKPT)
    _write_pretrain_logs(out, result, train_config.log_every)
    finals = [h[-1]["total"] for h in result.histories]
    print(f"pretrained {model_config.n_views} views, final losses {finals}")
    print(f"wrote {out / PRETRAIN_CKPT}")
    return 0


def cmd_train(args):
    cfg = _apply_overrides(load_run_config(args.config), args)
    dataset = cfg.load_data()
    model_config = cfg.model_config(dataset.view_dims)
    train_config = cfg.train_config()
    out = cfg.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    init = None
    if args.from_pretrain is not None:
        loaded = training.load_checkpoint(args.from_pretrain)
        init = loaded.tensors
    ckpt = training.train(
        dataset, model_config, train_config, init=init, log_path=out / "train.log"
    )
    training.save_checkpoint(ckpt, out / MODEL_CKPT)
    print(f"trained {ckpt.epoch} epochs, final loss {ckpt.history[-1]['total']!r}")
    print(f"wrote {out / MODEL_CKPT}")
    return 0


def cmd_cluster(args):
    cfg = _apply_overrides(load_run_config(args.config), args)
    out = cfg.out_dir()
    ckpt_path = Path(args.checkpoint) if args.checkpoint else out / MODEL_CKPT
    ckpt = training.load_checkpoint(ckpt_path)
    if ckpt.config.get("kind") != "model":
        raise ConfigError(f"{ckpt_path} is not a trained model checkpoint")
    c = ckpt.tensors[model.SELF_EXPRESSION]
    dataset = cfg.load_data()
    if c.shape[0] != dataset.n_samples:
        raise ConfigError(
            f"checkpoint was trained on {c.shape[0]} samples, dataset has {dataset.n_samples}"
        )
    affinity = clustering.affinity_from_options(c, cfg.affinity_options())
    labels = clustering.spectral_cluster(affinity, cfg.k, seed=cfg.seed)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / LABELS_PRED, "w", encoding="utf-8", newline="\n") as fh:
        for label in labels:
            fh.write(f"{int(label)}\n")
    print(f"wrote {len(labels)} labels to {out / LABELS_PRED}")
    return 0


def _read_label_file(path):
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").split("\n")
    except FileNotFoundError:
        raise DataFormatError("missing labels file", path=path) from None
    if lines and lines[-1] == "":
        lines.pop()
    out = np.empty(len(lines), dtype=np.intp)
    for i, line in enumerate(lines):
        try:
            out[i] = int(line)
        except ValueError:
            raise DataFormatError(f"non-integer label {line!r}", path=path, line=i + 1) from None
    return out


def cmd_eval(args):
    cfg = _apply_overrides(load_run_config(args.config), args)
    out = cfg.out_dir()
    pred_path = Path(args.pred) if args.pred else out / LABELS_PRED
    if args.true:
        y_true = _read_label_file(args.true)
    else:
        dataset = cfg.load_data()
        if dataset.labels is None:
            raise ConfigError("dataset has no ground-truth labels; pass --true")
        y_true = dataset.labels
    y_pred = _read_label_file(pred_path)
    if y_true.size != y_pred.size:
        raise ConfigError(
            f"label files disagree: {y_true.size} true labels vs {y_pred.size} predicted"
        )
    report = metrics.evaluate_clustering(y_true, y_pred)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / METRICS_FILE, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_text())
    print(report.to_text(), end="")
    return 0


def cmd_ablate(args):
    """Train the full model and the two ablations from scratch and compare."""
    base = _apply_overrides(load_run_config(args.config), args)
    variants = [
        ("full", {}),
        ("no_shortcut", {"use_shortcut": False}),
        ("no_consistent", {"use_consistent_layer": False}),
    ]
    out = base.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for name, overrides in variants:
        cfg = _apply_overrides(load_run_config(args.config), args)
        cfg.model.update(overrides)
        dataset = cfg.load_data()
        model_config = cfg.model_config(dataset.view_dims)
        train_config = cfg.train_config()
        vdir = out / f"ablate_{name}"
        vdir.mkdir(parents=True, exist_ok=True)
        ckpt = training.train(
            dataset, model_config, train_config, init=None, log_path=vdir / "train.log"
        )
        training.save_checkpoint(ckpt, vdir / MODEL_CKPT)
        c = ckpt.tensors[model.SELF_EXPRESSION]
        affinity = clustering.affinity_from_options(c, cfg.affinity_options())
        labels = clustering.spectral_cluster(affinity, cfg.k, seed=cfg.seed)
        with open(vdir / LABELS_PRED, "w", encoding="utf-8", newline="\n") as fh:
            for label in labels:
                fh.write(f"{int(label)}\n")
        row = {"variant": name, "final_loss": ckpt.history[-1]["total"]}
        if dataset.labels is not None:
            report = metrics.evaluate_clustering(dataset.labels, labels)
            row.update(acc=report.acc, nmi=report.nmi, ari=report.ari)
        rows.append(row)
    with open(out / "ablation_summary.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("variant,final_loss,acc,nmi,ari\n")
        for row in rows:
            fh.write(
                "{},{!r},{},{},{}\n".format(
                    row["variant"],
                    float(row["final_loss"]),
                    "" if "acc" not in row else f"{row['acc']:.6f}",
                    "" if "nmi" not in row else f"{row['nmi']:.6f}",
                    "" if "ari" not in row else f"{row['ari']:.6f}",
                )
            )
    for row in rows:
        print(row)
    return 0


# ---------------------------------------------------------------------------
# argument parsing and exit-code mapping


def build_parser():
    parser = argparse.ArgumentParser(
        prog="amvdsn",
        description="Attentive multi-view deep subspace clustering pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="run-config JSON file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")

    p = sub.add_parser("synth", help="write a synthetic dataset directory")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pretrain", help="train per-view autoencoders")
    common(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="train the joint model")
    common(p)
    p.add_argument("--from-pretrain", default=None, help="pretraining checkpoint to start from")
    p.add_argument("--no-shortcut", action="store_true", help="disable shortcut connections")
    p.add_argument("--no-consistent", action="store_true", help="disable the consistent attentive layer")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cluster", help="affinity + spectral clustering from a checkpoint")
    common(p)
    p.add_argument("--checkpoint", default=None, help="model checkpoint (default: <out>/model.ckpt)")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("eval", help="score predicted labels against ground truth")
    common(p)
    p.add_argument("--pred", default=None, help="predicted labels file (default: <out>/labels_pred.csv)")
    p.add_argument("--true", default=None, help="ground-truth labels file (default: dataset labels)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="compare full / no-shortcut / no-consistent variants")
    common(p)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default=None)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except (DataFormatError, CheckpointError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
