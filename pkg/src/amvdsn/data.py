"""Multi-view datasets: container, on-disk format, normalization, synthesis.

In memory each view is an ``(M_v, N)`` matrix whose columns are samples, so
sample ``n`` is column ``n`` of every view. On disk the convention flips to
rows-as-samples: a dataset directory holds a ``meta`` descriptor (JSON) plus
one ``view_<v>.csv`` per view (N rows by M_v columns, no header) and an
optional ``labels.csv`` with one 0-based integer per line. All files use LF
line endings, and numeric parsing accepts scientific notation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError

__all__ = [
    "MultiViewDataset",
    "SynthSpec",
    "load_dataset",
    "save_dataset",
    "normalize",
    "synth_subspaces",
]

META_FILE = "meta"
LABELS_FILE = "labels.csv"


def _view_file(v):
    return f"view_{v}.csv"


@dataclass
class MultiViewDataset:
    """Per-view sample matrices plus optional ground-truth cluster ids.

    views : list of (M_v, N) float64 arrays, columns are samples
    labels : optional (N,) int array with every id in 0..C-1 present
    """

    views: list
    labels: np.ndarray | None = None
    name: str = "unnamed"

    @property
    def n_views(self):
        return len(self.views)

    @property
    def n_samples(self):
        return self.views[0].shape[1] if self.views else 0

    @property
    def view_dims(self):
        return [v.shape[0] for v in self.views]

    @property
    def n_clusters(self):
        return None if self.labels is None else int(self.labels.max()) + 1

    def validate(self):
        if not self.views:
            raise ConfigError("dataset has no views")
        n = self.views[0].shape[1]
        for v, x in enumerate(self.views):
            if x.ndim != 2:
                raise ConfigError(f"view {v} is not a matrix")
            if x.shape[0] < 1:
                raise ConfigError(f"view {v} has zero feature dimension")
            if x.shape[1] != n:
                raise ConfigError(
                    f"view {v} has {x.shape[1]} samples but view 0 has {n}"
                )
            if not np.all(np.isfinite(x)):
                raise ConfigError(f"view {v} contains non-finite values")
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (n,):
                raise ConfigError(
                    f"labels have length {labels.shape} but the dataset has {n} samples"
                )
            if labels.min() < 0:
                raise ConfigError("labels must be 0-based")
            present = np.unique(labels)
            expected = np.arange(labels.max() + 1)
            if present.size != expected.size:
                missing = sorted(set(expected.tolist()) - set(present.tolist()))
                raise ConfigError(f"label ids {missing} never occur")
        return self


def _parse_meta(path):
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataFormatError("missing dataset descriptor", path=path) from None
    try:
        meta = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"descriptor is not valid JSON: {exc.msg}", path=path, line=exc.lineno) from None
    required = {"name": str, "num_views": int, "n_samples": int, "view_dims": list, "has_labels": bool}
    for key, kind in required.items():
        if key not in meta:
            raise DataFormatError(f"descriptor is missing field '{key}'", path=path)
        if not isinstance(meta[key], kind):
            raise DataFormatError(f"descriptor field '{key}' should be {kind.__name__}", path=path)
    if meta["num_views"] < 1:
        raise DataFormatError("num_views must be >= 1", path=path)
    if len(meta["view_dims"]) != meta["num_views"]:
        raise DataFormatError(
            f"view_dims lists {len(meta['view_dims'])} entries for num_views={meta['num_views']}",
            path=path,
        )
    return meta


def _parse_matrix(path, n_rows, n_cols):
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataFormatError("missing view file", path=path) from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) != n_rows:
        raise DataFormatError(
            f"expected {n_rows} sample rows, found {len(lines)}", path=path
        )
    out = np.empty((n_rows, n_cols))
    for i, line in enumerate(lines):
        cells = line.split(",")
        if len(cells) != n_cols:
            raise DataFormatError(
                f"expected {n_cols} columns, found {len(cells)}", path=path, line=i + 1
            )
        try:
            out[i] = np.array(cells, dtype=np.float64)
        except ValueError:
            bad = next(c for c in cells if not _is_number(c))
            raise DataFormatError(
                f"non-numeric cell {bad!r}", path=path, line=i + 1
            ) from None
    return out


def _is_number(cell):
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _parse_labels(path, n_samples):
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataFormatError("missing labels file", path=path) from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) != n_samples:
        raise DataFormatError(
            f"expected {n_samples} label lines, found {len(lines)}", path=path
        )
    labels = np.empty(n_samples, dtype=np.intp)
    for i, line in enumerate(lines):
        try:
            labels[i] = int(line)
        except ValueError:
            raise DataFormatError(f"non-integer label {line!r}", path=path, line=i + 1) from None
        if labels[i] < 0:
            raise DataFormatError(f"negative label {labels[i]}", path=path, line=i + 1)
    present = set(np.unique(labels).tolist())
    for c in range(int(labels.max()) + 1):
        if c not in present:
            raise DataFormatError(f"label id {c} never occurs", path=path)
    return labels


def load_dataset(path):
    """Load a dataset directory, validating it against its ``meta`` descriptor."""
    path = Path(path)
    meta = _parse_meta(path / META_FILE)
    views = []
    for v in range(meta["num_views"]):
        raw = _parse_matrix(path / _view_file(v), meta["n_samples"], meta["view_dims"][v])
        views.append(raw.T.copy())  # disk is rows-as-samples, memory is columns
    labels = None
    if meta["has_labels"]:
        labels = _parse_labels(path / LABELS_FILE, meta["n_samples"])
    return MultiViewDataset(views=views, labels=labels, name=meta["name"]).validate()


def save_dataset(dataset, path):
    """Write a dataset directory in the on-disk format; floats use ``repr``
    so a save/load round trip is bit-exact."""
    dataset.validate()
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "name": dataset.name,
        "num_views": dataset.n_views,
        "n_samples": dataset.n_samples,
        "view_dims": dataset.view_dims,
        "has_labels": dataset.labels is not None,
    }
    with open(path / META_FILE, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for v, x in enumerate(dataset.views):
        rows = x.T
        with open(path / _view_file(v), "w", encoding="utf-8", newline="\n") as fh:
            for row in rows:
                fh.write(",".join(repr(float(c)) for c in row))
                fh.write("\n")
    if dataset.labels is not None:
        with open(path / LABELS_FILE, "w", encoding="utf-8", newline="\n") as fh:
            for c in dataset.labels:
                fh.write(f"{int(c)}\n")
    return path


def normalize(dataset, mode="minmax"):
    """Rescale a dataset; labels pass through untouched.

    minmax      : map each feature row of each view to [0, 1]; constant rows
                  become 0. Exactly idempotent.
    unit_sample : scale each sample column of each view to unit Euclidean
                  norm; zero columns stay zero, and columns already at unit
                  norm (within 1e-12) are left untouched so repeated
                  application is exact.
    none        : identity.
    """
    if mode == "none":
        views = [x.copy() for x in dataset.views]
    elif mode == "minmax":
        views = []
        for x in dataset.views:
            lo = x.min(axis=1, keepdims=True)
            hi = x.max(axis=1, keepdims=True)
            span = hi - lo
            safe = np.where(span > 0.0, span, 1.0)
            views.append(np.where(span > 0.0, (x - lo) / safe, 0.0))
    elif mode == "unit_sample":
        views = []
        for x in dataset.views:
            norms = np.linalg.norm(x, axis=0, keepdims=True)
            skip = (norms == 0.0) | (np.abs(norms - 1.0) <= 1e-12)
            views.append(np.where(skip, x, x / np.where(norms == 0.0, 1.0, norms)))
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    return MultiViewDataset(views=views, labels=dataset.labels, name=dataset.name)


@dataclass
class SynthSpec:
    """Recipe for a union-of-subspaces multi-view dataset.

    Every cluster is a random ``subspace_dim``-dimensional linear subspace in
    each view's ambient space; a sample is one latent coefficient vector
    shared by all views, projected through each view's basis, plus isotropic
    noise. Columns line up across views (same column, same object).
    """

    clusters: int
    views: int
    view_dims: list = field(default_factory=list)
    subspace_dim: int = 2
    samples_per_cluster: int = 20
    noise_std: float = 0.0
    seed: int = 0

    def validate(self):
        if self.clusters < 1:
            raise ConfigError("clusters must be >= 1")
        if self.views < 1 or len(self.view_dims) != self.views:
            raise ConfigError(
                f"view_dims lists {len(self.view_dims)} entries for views={self.views}"
            )
        if any(self.subspace_dim >= m for m in self.view_dims):
            raise ConfigError("subspace_dim must be smaller than every ambient dim")
        if self.samples_per_cluster < self.subspace_dim:
            raise ConfigError("samples_per_cluster must be >= subspace_dim")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        return self


def synth_subspaces(spec):
    """Generate a dataset from a :class:`SynthSpec`; deterministic given its seed."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    per = spec.samples_per_cluster
    n = spec.clusters * per
    views = [np.empty((m, n)) for m in spec.view_dims]
    for c in range(spec.clusters):
        cols = slice(c * per, (c + 1) * per)
        coeff = rng.standard_normal((spec.subspace_dim, per))
        for v, m in enumerate(spec.view_dims):
            basis, _ = np.linalg.qr(rng.standard_normal((m, spec.subspace_dim)))
            block = basis @ coeff
            if spec.noise_std > 0.0:
                block = block + spec.noise_std * rng.standard_normal(block.shape)
            views[v][:, cols] = block
    labels = np.repeat(np.arange(spec.clusters, dtype=np.intp), per)
    name = f"synth_c{spec.clusters}_v{spec.views}_d{spec.subspace_dim}"
    return MultiViewDataset(views=views, labels=labels, name=name).validate()
