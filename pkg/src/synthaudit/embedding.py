"""Principal-component feature transform, fitted on real data only.

The transform is classical PCA of the flattened pixels: top eigenvectors
of the sample covariance with 1/(N-1) normalization. It is computed from
a thin SVD of the centered data matrix, which gives the identical
spectrum without ever forming the D x D covariance (D is ~37k at full
image size) and stays orthonormal even when the data is rank deficient.

Two conventions make the output reproducible bit-for-bit:
- sign: each component row is negated if its largest-magnitude entry is
  negative (ties by lowest index),
- order: eigenvalues descend; exactly tied eigenvalues order their rows
  lexicographically after sign normalization.

The ``seed`` argument is accepted and ignored; the decomposition is
deterministic. Fitting refuses synthetic samples outright so leakage
audits in embedding space cannot be biased by the generator under test.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor_io
from .errors import (
    DegenerateData,
    DimTooLarge,
    IoFailure,
    ShapeMismatch,
    SyntheticContamination,
)
from .tensor_io import ImageSample, Origin

DEFAULT_DIM = 64
FORMAT_VERSION = 1


@dataclass
class EmbeddingModel:
    mean: np.ndarray         # (D,) float64
    components: np.ndarray   # (dim, D) float64, rows orthonormal
    eigenvalues: np.ndarray  # (dim,) float64, descending
    total_variance: float
    input_shape: tuple[int, ...]

    @property
    def dim(self) -> int:
        return self.components.shape[0]


def _as_samples(data) -> list[ImageSample]:
    if isinstance(data, tensor_io.LabeledDataset):
        return data.samples
    if isinstance(data, tensor_io.CandidateSet):
        return data.samples
    return list(data)


def _sample_matrix(samples: list[ImageSample]) -> tuple[np.ndarray, tuple[int, ...]]:
    shape = samples[0].pixels.shape
    x = np.stack([s.pixels for s in samples]).reshape(len(samples), -1)
    return x.astype(np.float64), shape


def _apply_sign_convention(components: np.ndarray) -> np.ndarray:
    out = components.copy()
    for row in out:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0.0:
            row *= -1.0
    return out


def _order_ties(components: np.ndarray, eigenvalues: np.ndarray) -> np.ndarray:
    """Reorder rows within groups of exactly equal eigenvalues, lexicographically."""
    out = components.copy()
    i = 0
    n = eigenvalues.size
    while i < n:
        j = i + 1
        while j < n and eigenvalues[j] == eigenvalues[i]:
            j += 1
        if j - i > 1:
            group = sorted(range(i, j), key=lambda r: out[r].tolist())
            out[i:j] = out[group]
        i = j
    return out


def fit(real_samples, dim: int = DEFAULT_DIM, seed: int = 0) -> EmbeddingModel:
    """Fit the transform on real samples only; ``seed`` is ignored."""
    del seed
    samples = _as_samples(real_samples)
    if len(samples) < 2:
        raise ValueError("need at least 2 samples to fit")
    for s in samples:
        if s.origin is Origin.SYNTHETIC:
            raise SyntheticContamination(f"sample {s.id!r} is synthetic")
    x, input_shape = _sample_matrix(samples)
    n, d = x.shape
    if not 1 <= dim <= min(n - 1, d):
        raise DimTooLarge(f"dim {dim} outside [1, min(N-1, D)] = [1, {min(n - 1, d)}]")
    mean = x.mean(axis=0)
    xc = x - mean
    total_variance = float(np.sum(xc * xc)) / (n - 1)
    if total_variance == 0.0:
        raise DegenerateData("zero total variance")
    # thin SVD: rows of vt are covariance eigenvectors, eigenvalue s^2/(N-1)
    _, s, vt = np.linalg.svd(xc, full_matrices=False)
    eigenvalues = (s[:dim] ** 2) / (n - 1)
    components = _apply_sign_convention(vt[:dim])
    components = _order_ties(components, eigenvalues)
    return EmbeddingModel(
        mean=mean,
        components=components,
        eigenvalues=eigenvalues,
        total_variance=total_variance,
        input_shape=tuple(input_shape),
    )


def _feature_input(model: EmbeddingModel, data) -> np.ndarray:
    if isinstance(data, np.ndarray):
        x = np.asarray(data, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        elif x.ndim > 2:
            x = x.reshape(x.shape[0], -1)
    else:
        samples = _as_samples(data)
        if not samples:
            return np.empty((0, model.mean.size))
        x, _ = _sample_matrix(samples)
    if x.shape[1] != model.mean.size:
        raise ShapeMismatch(
            f"flattened width {x.shape[1]}, model expects {model.mean.size}"
        )
    return x


def transform(model: EmbeddingModel, data) -> np.ndarray:
    """Project samples (dataset, sample list or array) to (N, dim) features."""
    x = _feature_input(model, data)
    return (x - model.mean) @ model.components.T


def inverse_transform(model: EmbeddingModel, features) -> np.ndarray:
    f = np.asarray(features, dtype=np.float64)
    if f.ndim == 1:
        f = f[None, :]
    if f.shape[1] != model.dim:
        raise ShapeMismatch(f"feature width {f.shape[1]}, model dim {model.dim}")
    return model.mean + f @ model.components


def explained_variance_ratio(model: EmbeddingModel) -> np.ndarray:
    if model.total_variance == 0.0:
        raise DegenerateData("zero total variance")
    return model.eigenvalues / model.total_variance


# ---------------------------------------------------------------------------
# persistence: one array file (mean | components | eigenvalues) + JSON sidecar


def save_model(model: EmbeddingModel, array_path, sidecar_path) -> None:
    flat = np.concatenate([model.mean, model.components.ravel(), model.eigenvalues])
    tensor_io.save_array(flat.astype(np.float32), array_path)
    sidecar = {
        "dim": model.dim,
        "input_shape": list(model.input_shape),
        "total_variance": model.total_variance,
        "format_version": FORMAT_VERSION,
    }
    try:
        Path(sidecar_path).write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        raise IoFailure(f"cannot write {sidecar_path}: {exc}") from exc


def load_model(array_path, sidecar_path) -> EmbeddingModel:
    try:
        sidecar = json.loads(Path(sidecar_path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read {sidecar_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(f"malformed sidecar {sidecar_path}: {exc}") from exc
    if sidecar.get("format_version") != FORMAT_VERSION:
        raise IoFailure(
            f"sidecar {sidecar_path}: unsupported format_version "
            f"{sidecar.get('format_version')!r}"
        )
    dim = int(sidecar["dim"])
    input_shape = tuple(int(v) for v in sidecar["input_shape"])
    d = 1
    for v in input_shape:
        d *= v
    flat = tensor_io.load_array(array_path).astype(np.float64)
    expected = d + dim * d + dim
    if flat.ndim != 1 or flat.size != expected:
        raise ShapeMismatch(
            f"model array has {flat.size} values, expected {expected}"
        )
    mean = flat[:d]
    components = flat[d:d + dim * d].reshape(dim, d)
    eigenvalues = flat[d + dim * d:]
    return EmbeddingModel(
        mean=mean,
        components=components,
        eigenvalues=eigenvalues,
        total_variance=float(sidecar["total_variance"]),
        input_shape=input_shape,
    )
