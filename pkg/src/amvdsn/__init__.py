"""Attentive multi-view deep subspace clustering.

Per-view autoencoders with optional shortcut connections embed every view,
a consistent and a global attention stage fuse the embeddings into one
latent representation, a self-expressive layer learns the sample-by-sample
coefficient matrix, and normalized spectral clustering on its symmetrized
magnitudes yields the final labels. Training is full batch on a built-in
reverse-mode tape with Adam (or SGD), optionally preceded by per-view
autoencoder pretraining with frozen encoders afterwards.
"""

from .autodiff import Tape, Var, softmax_stable
from .clustering import AffinityOptions, affinity_enhanced, affinity_plain, spectral_cluster
from .data import (
    MultiViewDataset,
    SynthSpec,
    load_dataset,
    normalize,
    save_dataset,
    synth_subspaces,
)
from .errors import (
    AMVDSNError,
    CheckpointError,
    ConfigError,
    DataFormatError,
    NumericError,
    ShapeError,
)
from .estimator import AMVDSN, check_views
from .linalg import kmeans, sym_eig
from .metrics import (
    MetricsReport,
    ari,
    classification_metrics,
    evaluate_clustering,
    hungarian_match,
    nmi,
)
from .model import (
    LatentBundle,
    ModelConfig,
    ModelParams,
    consistent_attention,
    decode_view,
    encode_view,
    forward,
    global_attention,
    init_params,
    joint_loss,
    pretrain_loss,
    self_representation,
)
from .optim import AdamState, adam_step, sgd_step
from .training import (
    Checkpoint,
    TrainConfig,
    load_checkpoint,
    pretrain,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AMVDSN",
    "AMVDSNError",
    "AdamState",
    "AffinityOptions",
    "Checkpoint",
    "CheckpointError",
    "ConfigError",
    "DataFormatError",
    "LatentBundle",
    "MetricsReport",
    "ModelConfig",
    "ModelParams",
    "MultiViewDataset",
    "NumericError",
    "ShapeError",
    "SynthSpec",
    "Tape",
    "TrainConfig",
    "Var",
    "adam_step",
    "affinity_enhanced",
    "affinity_plain",
    "ari",
    "check_views",
    "classification_metrics",
    "consistent_attention",
    "decode_view",
    "encode_view",
    "evaluate_clustering",
    "forward",
    "global_attention",
    "hungarian_match",
    "init_params",
    "joint_loss",
    "kmeans",
    "load_checkpoint",
    "load_dataset",
    "nmi",
    "normalize",
    "pretrain",
    "pretrain_loss",
    "save_checkpoint",
    "save_dataset",
    "self_representation",
    "sgd_step",
    "softmax_stable",
    "spectral_cluster",
    "sym_eig",
    "synth_subspaces",
    "train",
]
