"""The attentive multi-view subspace model.

Pipeline per forward pass, all matrices columns-as-samples:

1. Encode every view ``X^v`` (M_v x N) to a shared hidden size through an
   L-layer fully connected stack with ReLU after every layer, optionally
   adding a linear shortcut projection of the raw input:
   ``H^v = W_e^v X^v + relu(W_L ... relu(W_1 [X^v; 1]))``.
2. Consistent attentive fusion: project every ``H^v`` through one shared
   block ``W_c`` (no activation), score each view per sample with
   ``q_c' tanh(K_c^v [h; 1])``, softmax over views, and mix to ``H_c``.
3. Global attentive fusion: score the V view-specific sources (and the
   consistent source when enabled) with a second query/key set, softmax per
   sample, and mix into the joint latent ``Z``; with the shortcut enabled the
   mean of the view latents is added as a residual.
4. Self-expression: ``Z_s = Z @ C`` with the diagonal of ``C`` masked to zero
   (the mask is not differentiated, so the masked product gives the diagonal
   no gradient).
5. Decode ``Z_s`` back to every view through mirrored stacks, optionally with
   a linear shortcut ``W_d^v Z_s``.

The joint objective is
``||C||_F^2 + (l1/N) ||Z - Z_s||_F^2
  + l2 [ (1/(N V)) sum_v ||X^v - Xhat^v||_F^2 + l3 * Omega ]``
where ``Omega`` penalizes encoder blocks, decoder blocks and the shared
consistent block (l1 or squared l2); attention parameters and shortcut
projections are not regularized.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .autodiff import Tape
from .errors import ConfigError, NumericError, ShapeError

__all__ = [
    "ModelConfig",
    "ModelParams",
    "LatentBundle",
    "init_params",
    "encode_view",
    "consistent_attention",
    "global_attention",
    "self_representation",
    "decode_view",
    "forward",
    "joint_loss",
    "pretrain_loss",
    "loss_and_gradients",
    "pretrain_loss_and_gradients",
    "encoder_weight_names",
]


# ---------------------------------------------------------------------------
# configuration and parameter containers


@dataclass
class ModelConfig:
    view_dims: list
    hidden_dim: int
    encoder_depth: int = 2
    lambda1: float = 0.5
    lambda2: float = 0.5
    lambda3: float = 0.1
    weight_reg: str = "l2"
    use_shortcut: bool = True
    use_consistent_layer: bool = True
    seed: int = 0

    @property
    def n_views(self):
        return len(self.view_dims)

    def validate(self):
        if not self.view_dims or any(int(m) < 1 for m in self.view_dims):
            raise ConfigError("view_dims must list positive dimensions")
        if self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be >= 1")
        if self.encoder_depth < 1:
            raise ConfigError("encoder_depth must be >= 1")
        for key in ("lambda1", "lambda2", "lambda3"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key} must be >= 0")
        if self.weight_reg not in ("l1", "l2"):
            raise ConfigError(f"weight_reg must be 'l1' or 'l2', got {self.weight_reg!r}")
        return self

    def to_dict(self):
        d = asdict(self)
        d["view_dims"] = [int(m) for m in self.view_dims]
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d).validate()


def enc_name(v, layer):
    return f"enc_w_{v}_{layer}"


def dec_name(v, layer):
    return f"dec_w_{v}_{layer}"


def shortcut_enc_name(v):
    return f"shortcut_enc_{v}"


def shortcut_dec_name(v):
    return f"shortcut_dec_{v}"


CONSISTENT_W = "consistent_w"
CONSISTENT_QUERY = "consistent_query"
GLOBAL_QUERY = "global_query"
GLOBAL_KEY_CONSISTENT = "global_key_consistent"
SELF_EXPRESSION = "self_expression"


def consistent_key_name(v):
    return f"consistent_key_{v}"


def global_key_name(v):
    return f"global_key_{v}"


def encoder_weight_names(config):
    return [enc_name(v, l) for v in range(config.n_views) for l in range(config.encoder_depth)]


def decoder_weight_names(config):
    return [dec_name(v, l) for v in range(config.n_views) for l in range(config.encoder_depth)]


def regularized_names(config):
    """Blocks covered by the weight penalty: encoders, decoders, shared consistent block."""
    names = encoder_weight_names(config) + decoder_weight_names(config)
    if config.use_consistent_layer:
        names.append(CONSISTENT_W)
    return names


class ModelParams:
    """Named trainable tensors bound to one configuration and sample count."""

    def __init__(self, tensors):
        self.tensors = dict(tensors)

    def __getitem__(self, name):
        return self.tensors[name]

    def __setitem__(self, name, value):
        self.tensors[name] = value

    def __contains__(self, name):
        return name in self.tensors

    def names(self):
        return list(self.tensors)

    @property
    def n_samples(self):
        return self.tensors[SELF_EXPRESSION].shape[0]

    def copy(self):
        return ModelParams({k: v.copy() for k, v in self.tensors.items()})


def _lecun_block(rng, rows, cols, bias):
    """Block of shape (rows, cols) with entries N(0, 1/cols); when the block
    acts on [x; 1] the last column is the bias and starts at exactly zero."""
    block = rng.standard_normal((rows, cols)) / np.sqrt(cols)
    if bias:
        block[:, -1] = 0.0
    return block


def init_params(config, n_samples):
    """Fresh parameters: Lecun-normal weights, zero biases, all-zero C."""
    config.validate()
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    rng = np.random.default_rng(config.seed)
    h = config.hidden_dim
    tensors = {}
    for v, m in enumerate(config.view_dims):
        for l in range(config.encoder_depth):
            fan = (m if l == 0 else h) + 1
            tensors[enc_name(v, l)] = _lecun_block(rng, h, fan, bias=True)
    for v, m in enumerate(config.view_dims):
        for l in range(config.encoder_depth):
            out = m if l == config.encoder_depth - 1 else h
            tensors[dec_name(v, l)] = _lecun_block(rng, out, h + 1, bias=True)
    if config.use_shortcut:
        for v, m in enumerate(config.view_dims):
            tensors[shortcut_enc_name(v)] = _lecun_block(rng, h, m, bias=False)
            tensors[shortcut_dec_name(v)] = _lecun_block(rng, m, h, bias=False)
    if config.use_consistent_layer:
        tensors[CONSISTENT_W] = _lecun_block(rng, h, h + 1, bias=True)
        tensors[CONSISTENT_QUERY] = rng.standard_normal((h, 1)) / np.sqrt(h)
        for v in range(config.n_views):
            tensors[consistent_key_name(v)] = _lecun_block(rng, h, h + 1, bias=True)
    tensors[GLOBAL_QUERY] = rng.standard_normal((h, 1)) / np.sqrt(h)
    for v in range(config.n_views):
        tensors[global_key_name(v)] = _lecun_block(rng, h, h + 1, bias=True)
    if config.use_consistent_layer:
        tensors[GLOBAL_KEY_CONSISTENT] = _lecun_block(rng, h, h + 1, bias=True)
    tensors[SELF_EXPRESSION] = np.zeros((n_samples, n_samples))
    return ModelParams(tensors)


def init_pretrain_params(config, v, rng=None):
    """Plain per-view autoencoder parameters (encoder + decoder stacks only)."""
    config.validate()
    if rng is None:
        rng = np.random.default_rng([config.seed, v])
    h = config.hidden_dim
    m = config.view_dims[v]
    tensors = {}
    for l in range(config.encoder_depth):
        fan = (m if l == 0 else h) + 1
        tensors[enc_name(v, l)] = _lecun_block(rng, h, fan, bias=True)
    for l in range(config.encoder_depth):
        out = m if l == config.encoder_depth - 1 else h
        tensors[dec_name(v, l)] = _lecun_block(rng, out, h + 1, bias=True)
    return tensors


# ---------------------------------------------------------------------------
# taped graph builders


def _wrap(tape, params, trainable=None):
    """Turn a tensor dict into tape nodes; names outside ``trainable`` become
    constants, which is how frozen parameters are realized."""
    tensors = params.tensors if isinstance(params, ModelParams) else params
    nodes = {}
    for name, value in tensors.items():
        if trainable is None or name in trainable:
            nodes[name] = tape.leaf(value, name=name)
        else:
            nodes[name] = tape.constant(value, name=name)
    return nodes


def _stack(tape, weights, x):
    h = x
    for w in weights:
        h = tape.relu(tape.affine(w, h))
    return h


def _encode(tape, nodes, config, v, x):
    weights = [nodes[enc_name(v, l)] for l in range(config.encoder_depth)]
    h = _stack(tape, weights, x)
    if config.use_shortcut:
        h = tape.add(tape.matmul(nodes[shortcut_enc_name(v)], x), h)
    return h


def _decode(tape, nodes, config, v, z_s):
    weights = [nodes[dec_name(v, l)] for l in range(config.encoder_depth)]
    xhat = _stack(tape, weights, z_s)
    if config.use_shortcut:
        # the shortcut consumes the self-expressed code, like the stack
        xhat = tape.add(tape.matmul(nodes[shortcut_dec_name(v)], z_s), xhat)
    return xhat


def _attention_scores(tape, query, key, source):
    """Per-sample scores ``q' tanh(K [h; 1])`` as a 1 x N row."""
    return tape.matmul(tape.transpose(query), tape.tanh(tape.affine(key, source)))


def _consistent_attention(tape, nodes, h_views):
    hc_views = [tape.affine(nodes[CONSISTENT_W], h) for h in h_views]
    rows = [
        _attention_scores(tape, nodes[CONSISTENT_QUERY], nodes[consistent_key_name(v)], hc)
        for v, hc in enumerate(hc_views)
    ]
    alpha = tape.softmax_columns(tape.concat_rows(rows))
    mixed = None
    for v, hc in enumerate(hc_views):
        term = tape.scale_columns(hc, tape.take_row(alpha, v))
        mixed = term if mixed is None else tape.add(mixed, term)
    return hc_views, alpha, mixed


def _global_attention(tape, nodes, config, h_views, h_c):
    rows = [
        _attention_scores(tape, nodes[GLOBAL_QUERY], nodes[global_key_name(v)], h)
        for v, h in enumerate(h_views)
    ]
    sources = list(h_views)
    if config.use_consistent_layer:
        rows.append(_attention_scores(tape, nodes[GLOBAL_QUERY], nodes[GLOBAL_KEY_CONSISTENT], h_c))
        sources.append(h_c)
    alpha = tape.softmax_columns(tape.concat_rows(rows))
    z = None
    for i, src in enumerate(sources):
        term = tape.scale_columns(src, tape.take_row(alpha, i))
        z = term if z is None else tape.add(z, term)
    if config.use_shortcut:
        total = None
        for h in h_views:
            total = h if total is None else tape.add(total, h)
        z = tape.add(z, tape.scale(total, 1.0 / len(h_views)))
    return alpha, z


def _self_express(tape, nodes, z):
    c_masked = tape.zero_diag(nodes[SELF_EXPRESSION])
    return tape.matmul(z, c_masked)


class _Graph:
    """Var-level forward pass, kept around so losses can reuse the nodes."""

    __slots__ = (
        "x_views",
        "h_views",
        "hc_views",
        "alpha_consistent",
        "h_consistent",
        "alpha_global",
        "z",
        "z_s",
        "x_hat",
    )


def build_forward(tape, nodes, config, views):
    if len(views) != config.n_views:
        raise ShapeError(f"{len(views)} views given for a {config.n_views}-view config")
    for v, x in enumerate(views):
        if x.shape[0] != config.view_dims[v]:
            raise ShapeError(
                f"view {v} has dim {x.shape[0]}, config expects {config.view_dims[v]}"
            )
    g = _Graph()
    g.x_views = [tape.constant(x) for x in views]
    g.h_views = [_encode(tape, nodes, config, v, x) for v, x in enumerate(g.x_views)]
    if config.use_consistent_layer:
        g.hc_views, g.alpha_consistent, g.h_consistent = _consistent_attention(
            tape, nodes, g.h_views
        )
    else:
        g.hc_views = g.alpha_consistent = g.h_consistent = None
    g.alpha_global, g.z = _global_attention(tape, nodes, config, g.h_views, g.h_consistent)
    n = g.z.shape[1]
    if nodes[SELF_EXPRESSION].shape != (n, n):
        raise ShapeError(
            f"self-expression matrix is {nodes[SELF_EXPRESSION].shape}, dataset has {n} samples"
        )
    g.z_s = _self_express(tape, nodes, g.z)
    g.x_hat = [_decode(tape, nodes, config, v, g.z_s) for v in range(config.n_views)]
    return g


def _weight_penalty(tape, nodes, names, kind):
    total = None
    for name in names:
        term = tape.frob2(nodes[name]) if kind == "l2" else tape.abs_sum(nodes[name])
        total = term if total is None else tape.add(total, term)
    return total


def build_joint_loss(tape, nodes, config, views):
    """Taped joint objective; returns (graph, loss node, term values)."""
    g = build_forward(tape, nodes, config, views)
    n = g.z.shape[1]
    n_views = config.n_views
    reg_c = tape.frob2(nodes[SELF_EXPRESSION])
    selfexpr = tape.scale(tape.frob2(tape.sub(g.z, g.z_s)), config.lambda1 / n)
    recon_raw = None
    for x, xhat in zip(g.x_views, g.x_hat):
        term = tape.frob2(tape.sub(x, xhat))
        recon_raw = term if recon_raw is None else tape.add(recon_raw, term)
    recon = tape.scale(recon_raw, config.lambda2 / (n * n_views))
    omega = _weight_penalty(tape, nodes, regularized_names(config), config.weight_reg)
    reg_w = tape.scale(omega, config.lambda2 * config.lambda3)
    loss = tape.add(tape.add(reg_c, selfexpr), tape.add(recon, reg_w))
    terms = {
        "total": loss.item(),
        "selfexpr": selfexpr.item(),
        "recon": recon.item(),
        "reg_C": reg_c.item(),
        "reg_W": reg_w.item(),
    }
    return g, loss, terms


def build_pretrain_loss(tape, nodes, config, v, x_view):
    """Taped per-view autoencoder objective: mean squared reconstruction of
    the plain (no shortcut) stack plus the weight penalty at ``lambda3``."""
    n = x_view.shape[1]
    x = tape.constant(x_view)
    enc_weights = [nodes[enc_name(v, l)] for l in range(config.encoder_depth)]
    dec_weights = [nodes[dec_name(v, l)] for l in range(config.encoder_depth)]
    h = _stack(tape, enc_weights, x)
    xhat = _stack(tape, dec_weights, h)
    recon = tape.scale(tape.frob2(tape.sub(x, xhat)), 1.0 / n)
    names = [enc_name(v, l) for l in range(config.encoder_depth)]
    names += [dec_name(v, l) for l in range(config.encoder_depth)]
    reg_w = tape.scale(_weight_penalty(tape, nodes, names, config.weight_reg), config.lambda3)
    loss = tape.add(recon, reg_w)
    terms = {
        "total": loss.item(),
        "selfexpr": 0.0,
        "recon": recon.item(),
        "reg_C": 0.0,
        "reg_W": reg_w.item(),
    }
    return loss, terms


# ---------------------------------------------------------------------------
# value-level public operations


@dataclass
class LatentBundle:
    """All intermediates of one forward pass, as plain arrays."""

    view_latents: list
    consistent_view_latents: list | None
    consistent_weights: np.ndarray | None
    consistent_latent: np.ndarray | None
    fusion_weights: np.ndarray
    latent: np.ndarray
    self_expressed: np.ndarray
    reconstructions: list

    def validate(self):
        blocks = list(self.view_latents) + list(self.reconstructions)
        blocks += [self.fusion_weights, self.latent, self.self_expressed]
        if self.consistent_latent is not None:
            blocks += list(self.consistent_view_latents)
            blocks += [self.consistent_weights, self.consistent_latent]
        for b in blocks:
            if not np.all(np.isfinite(b)):
                raise NumericError("forward pass produced non-finite values")
        for w in (self.consistent_weights, self.fusion_weights):
            if w is not None and np.abs(w.sum(axis=0) - 1.0).max() > 1e-10:
                raise NumericError("attention weights do not sum to one")
        return self


def _bundle_from_graph(g):
    return LatentBundle(
        view_latents=[h.value for h in g.h_views],
        consistent_view_latents=None if g.hc_views is None else [h.value for h in g.hc_views],
        consistent_weights=None if g.alpha_consistent is None else g.alpha_consistent.value,
        consistent_latent=None if g.h_consistent is None else g.h_consistent.value,
        fusion_weights=g.alpha_global.value,
        latent=g.z.value,
        self_expressed=g.z_s.value,
        reconstructions=[x.value for x in g.x_hat],
    )


def forward(params, config, dataset):
    """Full forward pass over a dataset; returns a validated :class:`LatentBundle`."""
    tape = Tape()
    nodes = _wrap(tape, params)
    g = build_forward(tape, nodes, config, dataset.views)
    return _bundle_from_graph(g).validate()


def encode_view(params, config, v, x_view):
    """Embed one view: the encoder stack plus the optional shortcut projection."""
    x_view = np.asarray(x_view, dtype=np.float64)
    if x_view.shape[0] != config.view_dims[v]:
        raise ShapeError(
            f"view {v} input has dim {x_view.shape[0]}, config expects {config.view_dims[v]}"
        )
    tape = Tape()
    nodes = _wrap(tape, params)
    return _encode(tape, nodes, config, v, tape.constant(x_view)).value


def consistent_attention(params, h_views):
    """Shared-weight projection and view-weighted mix of the hidden views.

    Returns (per-view consistent latents, view weights (V, N), mixed latent).
    """
    if not h_views:
        raise ValueError("consistent attention needs at least one view")
    tape = Tape()
    nodes = _wrap(tape, params)
    hv = [tape.constant(h) for h in h_views]
    hc_views, alpha, mixed = _consistent_attention(tape, nodes, hv)
    return [h.value for h in hc_views], alpha.value, mixed.value


def global_attention(params, config, h_views, h_consistent=None):
    """Fuse view-specific (and optionally consistent) latents into Z.

    Returns (source weights, Z); the weight block has one row per view plus,
    when the consistent layer is enabled, a final row for the consistent
    source.
    """
    if config.use_consistent_layer and h_consistent is None:
        raise ValueError("consistent latent required when the consistent layer is enabled")
    tape = Tape()
    nodes = _wrap(tape, params)
    hv = [tape.constant(h) for h in h_views]
    hc = None if h_consistent is None else tape.constant(h_consistent)
    alpha, z = _global_attention(tape, nodes, config, hv, hc)
    return alpha.value, z.value


def self_representation(params, z):
    """``Z_s = Z @ C`` with the stored diagonal of C masked to zero."""
    c = params[SELF_EXPRESSION]
    if c.shape[0] != z.shape[1]:
        raise ShapeError(f"C is {c.shape} but Z has {z.shape[1]} samples")
    tape = Tape()
    nodes = _wrap(tape, params)
    return _self_express(tape, nodes, tape.constant(z)).value


def decode_view(params, config, v, z_s):
    """Reconstruct one view from the self-expressed code."""
    z_s = np.asarray(z_s, dtype=np.float64)
    if z_s.shape[0] != config.hidden_dim:
        raise ShapeError(
            f"code has dim {z_s.shape[0]}, config expects hidden_dim {config.hidden_dim}"
        )
    tape = Tape()
    nodes = _wrap(tape, params)
    return _decode(tape, nodes, config, v, tape.constant(z_s)).value


def joint_loss(params, config, dataset, bundle):
    """Joint objective evaluated from an existing bundle.

    Returns (total, term breakdown); the breakdown entries carry their
    trade-off multipliers so they sum to the total.
    """
    n = dataset.n_samples
    n_views = dataset.n_views
    c = params[SELF_EXPRESSION]
    reg_c = float(np.sum(c * c))
    diff = bundle.latent - bundle.self_expressed
    selfexpr = config.lambda1 / n * float(np.sum(diff * diff))
    recon_raw = sum(
        float(np.sum((x - xhat) ** 2))
        for x, xhat in zip(dataset.views, bundle.reconstructions)
    )
    recon = config.lambda2 / (n * n_views) * recon_raw
    omega = 0.0
    for name in regularized_names(config):
        w = params[name]
        omega += float(np.sum(w * w)) if config.weight_reg == "l2" else float(np.abs(w).sum())
    reg_w = config.lambda2 * config.lambda3 * omega
    total = reg_c + selfexpr + recon + reg_w
    return total, {
        "total": total,
        "selfexpr": selfexpr,
        "recon": recon,
        "reg_C": reg_c,
        "reg_W": reg_w,
    }


def pretrain_loss(params, config, v, dataset):
    """Per-view autoencoder objective used during pretraining."""
    tape = Tape()
    nodes = _wrap(tape, params)
    loss, _ = build_pretrain_loss(tape, nodes, config, v, dataset.views[v])
    return loss.item()


# ---------------------------------------------------------------------------
# gradient entry points shared by training and the gradient tests


def loss_and_gradients(params, config, dataset, trainable=None):
    """One taped forward/backward of the joint objective.

    Returns (term values, gradients keyed by name). ``trainable`` restricts
    which tensors receive gradients; the rest enter the graph as constants.
    """
    tape = Tape()
    nodes = _wrap(tape, params, trainable)
    _, loss, terms = build_joint_loss(tape, nodes, config, dataset.views)
    grads = tape.backward(loss)
    return terms, grads


def pretrain_loss_and_gradients(params, config, v, dataset, trainable=None):
    """One taped forward/backward of a per-view autoencoder objective."""
    tape = Tape()
    nodes = _wrap(tape, params, trainable)
    loss, terms = build_pretrain_loss(tape, nodes, config, v, dataset.views[v])
    grads = tape.backward(loss)
    return terms, grads
