"""Scikit-learn style estimator wrapping the full pipeline.

``AMVDSN`` is a clustering estimator: ``fit`` takes a list of per-view data
matrices (rows are samples, as everywhere in the scikit-learn ecosystem; one
matrix per view, all with the same row count), trains the attentive
multi-view subspace model, and exposes ``labels_`` plus the learned
self-representation and affinity matrices.
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils import check_array

from .clustering import AffinityOptions, affinity_from_options, spectral_cluster
from .data import MultiViewDataset, normalize
from .model import SELF_EXPRESSION, ModelConfig, forward
from .training import TrainConfig, pretrain, train

__all__ = ["AMVDSN", "check_views"]


def check_views(views):
    """Validate a multi-view input: a sequence of 2-D arrays sharing rows.

    A single 2-D array is accepted as a one-view dataset. Returns the views
    as float64 arrays with samples as rows.
    """
    if isinstance(views, np.ndarray) and views.ndim == 2:
        views = [views]
    views = [check_array(v, dtype=np.float64) for v in views]
    if not views:
        raise ValueError("at least one view is required")
    n = views[0].shape[0]
    for i, v in enumerate(views):
        if v.shape[0] != n:
            raise ValueError(f"view {i} has {v.shape[0]} samples, view 0 has {n}")
    return views


class AMVDSN(BaseEstimator, ClusterMixin):
    """Attentive multi-view deep subspace clustering.

    Each view is embedded by its own fully connected autoencoder (with an
    optional linear shortcut), the embeddings are fused by a consistent and
    a global attention stage, and a self-expressive layer learns an N x N
    coefficient matrix whose symmetrized magnitudes feed normalized spectral
    clustering.

    Parameters
    ----------
    n_clusters : int, default 2
        Number of clusters for the spectral step.
    hidden_dim : int, default 32
        Width of every hidden layer and of the fused latent space.
    encoder_depth : int, default 2
        Layers per encoder (decoders mirror it).
    lambda1, lambda2, lambda3 : float
        Trade-offs: self-expression residual, reconstruction, weight penalty.
    weight_reg : {"l2", "l1"}, default "l2"
        Penalty type on encoder/decoder/shared-projection weights.
    use_shortcut : bool, default True
        Linear shortcut projections around the stacks plus the residual mean
        term in the global fusion.
    use_consistent_layer : bool, default True
        Enable the shared-weight consistent attention stage.
    pretrain : bool, default True
        Train per-view autoencoders first and freeze the encoders during the
        joint phase (the fine-tuned mode).
    learning_rate : float, default 1e-3
    max_epochs : int, default 200
        Joint-phase epoch budget (full batch, no early stopping).
    pretrain_max_epochs : int, default 2000
    pretrain_patience : int, default 200
        Pretraining stops once the best loss stalls for this many epochs.
    optimizer : {"adam", "sgd"}, default "adam"
    scaling : {"minmax", "unit_sample", "none"}, default "minmax"
        Input normalization applied per view before training.
    affinity : {"plain", "enhanced"}, default "plain"
    energy_fraction : float, default 1.0
    power : float, default 1.0
        Enhanced-affinity knobs; at their defaults the enhanced rule equals
        the plain one.
    kmeans_restarts : int, default 20
    random_state : int or None
        Seed for initialization and k-means. None draws a fresh seed.

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
    representation_matrix_ : ndarray of shape (n_samples, n_samples)
        The learned self-expression matrix C.
    affinity_matrix_ : ndarray of shape (n_samples, n_samples)
    latent_ : ndarray of shape (n_samples, hidden_dim)
        Fused latent representation, rows as samples.
    loss_history_ : list of per-epoch loss-term dicts from the joint phase.
    """

    def __init__(
        self,
        n_clusters=2,
        hidden_dim=32,
        encoder_depth=2,
        lambda1=0.5,
        lambda2=0.5,
        lambda3=0.1,
        weight_reg="l2",
        use_shortcut=True,
        use_consistent_layer=True,
        pretrain=True,
        learning_rate=1e-3,
        max_epochs=200,
        pretrain_max_epochs=2000,
        pretrain_patience=200,
        optimizer="adam",
        scaling="minmax",
        affinity="plain",
        energy_fraction=1.0,
        power=1.0,
        kmeans_restarts=20,
        random_state=None,
    ):
        self.n_clusters = n_clusters
        self.hidden_dim = hidden_dim
        self.encoder_depth = encoder_depth
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.lambda3 = lambda3
        self.weight_reg = weight_reg
        self.use_shortcut = use_shortcut
        self.use_consistent_layer = use_consistent_layer
        self.pretrain = pretrain
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.pretrain_max_epochs = pretrain_max_epochs
        self.pretrain_patience = pretrain_patience
        self.optimizer = optimizer
        self.scaling = scaling
        self.affinity = affinity
        self.energy_fraction = energy_fraction
        self.power = power
        self.kmeans_restarts = kmeans_restarts
        self.random_state = random_state

    def _seed(self):
        if self.random_state is None:
            return int(np.random.SeedSequence().entropy % (2**32))
        if isinstance(self.random_state, numbers.Integral):
            return int(self.random_state)
        raise ValueError("random_state must be an int or None")

    def fit(self, X, y=None):
        """Train the model and cluster the samples.

        Parameters
        ----------
        X : list of array-likes, each of shape (n_samples, n_features_v)
            One matrix per view; a single 2-D array means one view.
        y : ignored
        """
        views = check_views(X)
        seed = self._seed()
        dataset = MultiViewDataset(
            views=[v.T.copy() for v in views], labels=None, name="estimator-input"
        )
        dataset = normalize(dataset, self.scaling)
        model_config = ModelConfig(
            view_dims=dataset.view_dims,
            hidden_dim=self.hidden_dim,
            encoder_depth=self.encoder_depth,
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            lambda3=self.lambda3,
            weight_reg=self.weight_reg,
            use_shortcut=self.use_shortcut,
            use_consistent_layer=self.use_consistent_layer,
            seed=seed,
        ).validate()
        train_config = TrainConfig(
            learning_rate=self.learning_rate,
            max_epochs=self.max_epochs,
            pretrain_max_epochs=self.pretrain_max_epochs,
            pretrain_patience=self.pretrain_patience,
            optimizer=self.optimizer,
            freeze_encoders=True,
        ).validate()
        init = None
        self.pretrain_history_ = None
        if self.pretrain:
            result = pretrain(dataset, model_config, train_config)
            init = result.weights
            self.pretrain_history_ = result.histories
        checkpoint = train(dataset, model_config, train_config, init=init)
        params = checkpoint.model_params()
        bundle = forward(params, model_config, dataset)
        opts = AffinityOptions(
            mode=self.affinity, energy_fraction=self.energy_fraction, power=self.power
        ).validate()
        c = params[SELF_EXPRESSION]
        affinity = affinity_from_options(c, opts)
        self.labels_ = spectral_cluster(
            affinity, self.n_clusters, seed=seed, restarts=self.kmeans_restarts
        )
        self.representation_matrix_ = c
        self.affinity_matrix_ = affinity
        self.latent_ = bundle.latent.T.copy()
        self.loss_history_ = checkpoint.history
        self.n_iter_ = checkpoint.epoch
        return self
