"""Condition vectors, morphing schedules, label sampling and toy generators.

A condition vector is a point on the class simplex; a morph between class
k and class k' walks n equal steps from one vertex to the other, with
step t carrying weight (n-t)/n on k and t/n on k'. The division happens
per step (never as a shared 1/n factor) so the two weights sum to exactly
1.0 in floating point.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateMorph,
    DimensionMismatch,
    IndexOutOfRange,
    StepOutOfRange,
)
from .tensor_io import LABEL_ORDER, ImageSample, LabeledDataset, Origin

N_CLASSES = 3
LATENT_DIM = 100


@dataclass
class ConditionVector:
    weights: np.ndarray  # (K,), non-negative, sums to 1 within 1e-12

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise ValueError("weights must be a vector")
        if np.any(w < 0.0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {float(w.sum())}, not 1")
        self.weights = w

    @property
    def n_classes(self) -> int:
        return self.weights.size

    def hard_label_index(self) -> int:
        return int(np.argmax(self.weights))


@dataclass
class LatentVector:
    values: np.ndarray  # (LATENT_DIM,) float64

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("latent values must be a finite vector")
        self.values = v


@dataclass
class LabelDistribution:
    probabilities: np.ndarray  # (K,), sums to 1 within 1e-12

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=np.float64)
        if p.ndim != 1 or np.any(p < 0.0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(float(p.sum()) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {float(p.sum())}, not 1")
        self.probabilities = p


@dataclass
class MorphSchedule:
    source: int
    target: int
    n_steps: int
    steps: list[ConditionVector] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)


def one_hot(k: int, n_classes: int = N_CLASSES) -> ConditionVector:
    if not 0 <= k < n_classes:
        raise IndexOutOfRange(f"class {k} outside [0, {n_classes})")
    w = np.zeros(n_classes)
    w[k] = 1.0
    return ConditionVector(weights=w)


def morph_step(k: int, k2: int, n: int, t: int, n_classes: int = N_CLASSES) -> ConditionVector:
    """Step t of n on the segment from class k to class k2."""
    if not 0 <= k < n_classes:
        raise IndexOutOfRange(f"class {k} outside [0, {n_classes})")
    if not 0 <= k2 < n_classes:
        raise IndexOutOfRange(f"class {k2} outside [0, {n_classes})")
    if k == k2:
        raise DegenerateMorph(f"source and target are both class {k}")
    if n < 1:
        raise ValueError(f"need at least 1 step, got n={n}")
    if not 0 <= t <= n:
        raise StepOutOfRange(f"step {t} outside [0, {n}]")
    w = np.zeros(n_classes)
    w[k] = (n - t) / n
    w[k2] = t / n
    return ConditionVector(weights=w)


def morph_schedule(k: int, k2: int, n: int, n_classes: int = N_CLASSES) -> MorphSchedule:
    """All n+1 steps from one_hot(k) to one_hot(k2)."""
    steps = [morph_step(k, k2, n, t, n_classes) for t in range(n + 1)]
    return MorphSchedule(source=k, target=k2, n_steps=n, steps=steps)


def empirical_distribution(labels, n_classes: int = N_CLASSES) -> LabelDistribution:
    """Class frequencies of an integer label vector."""
    y = np.asarray(labels, dtype=np.int64)
    if y.size == 0:
        raise ValueError("no labels")
    if np.any(y < 0) or np.any(y >= n_classes):
        raise IndexOutOfRange(f"label outside [0, {n_classes})")
    counts = np.bincount(y, minlength=n_classes)
    return LabelDistribution(probabilities=counts / y.size)


def sample_labels(dist: LabelDistribution, n: int, seed: int) -> np.ndarray:
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.default_rng(seed)
    return rng.choice(dist.probabilities.size, size=n, p=dist.probabilities)


def sample_latent(seed: int, dim: int = LATENT_DIM) -> LatentVector:
    rng = np.random.default_rng(seed)
    return LatentVector(values=rng.standard_normal(dim))


# ---------------------------------------------------------------------------
# toy generators
#
# Both generators map (latent, condition) -> image deterministically; the
# same pair always yields the same pixels. The private one never sees real
# data. The leaky one memorizes a training set and emits noisy copies,
# which is exactly the failure mode the attacks exist to catch.


class ToyPrivateGenerator:
    """Fixed random linear map squashed by tanh; independent of any dataset."""

    def __init__(self, shape=(9, 64, 64), n_classes: int = N_CLASSES,
                 latent_dim: int = LATENT_DIM, seed: int = 0):
        self.output_shape = tuple(shape)
        self.n_classes = n_classes
        self.latent_dim = latent_dim
        d = int(np.prod(self.output_shape))
        rng = np.random.default_rng(seed)
        self._w_latent = rng.normal(0.0, 1.0 / np.sqrt(latent_dim), size=(d, latent_dim))
        self._w_cond = rng.normal(0.0, 1.0, size=(d, n_classes))

    def render(self, z: LatentVector, c: ConditionVector) -> np.ndarray:
        pre = self._w_latent @ z.values + self._w_cond @ c.weights
        return np.tanh(pre).reshape(self.output_shape).astype(np.float32)


class ToyLeakyGenerator:
    """Memorizes training images; emits a stored image plus epsilon noise.

    epsilon=0 reproduces training pixels exactly. The noise stream is
    derived from the latent vector, so generation stays a pure function
    of (z, c).
    """

    def __init__(self, train: LabeledDataset, epsilon: float = 0.05, seed: int = 0):
        if len(train) == 0:
            raise ValueError("leaky generator needs a non-empty training set")
        if epsilon < 0.0:
            raise ValueError("epsilon must be non-negative")
        self.output_shape = train.image_shape
        self.n_classes = N_CLASSES
        self.latent_dim = LATENT_DIM
        self.epsilon = float(epsilon)
        self._seed = int(seed)
        self._by_class: dict[int, list[np.ndarray]] = {k: [] for k in range(N_CLASSES)}
        for s in train.samples:
            self._by_class[LABEL_ORDER.index(s.label)].append(s.pixels)

    def copy_with_noise(self, pixels: np.ndarray, noise_key: int) -> np.ndarray:
        out = pixels.astype(np.float64)
        if self.epsilon > 0.0:
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=self._seed, spawn_key=(noise_key,))
            )
            out = out + self.epsilon * rng.standard_normal(out.shape)
        return np.clip(out, -1.0, 1.0).astype(np.float32)

    def render(self, z: LatentVector, c: ConditionVector) -> np.ndarray:
        k = c.hard_label_index()
        pool = self._by_class[k]
        if not pool:
            raise ValueError(f"no training images for class {k}")
        key = zlib.crc32(np.ascontiguousarray(z.values).tobytes())
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=self._seed, spawn_key=(key, 0))
        )
        idx = int(rng.integers(len(pool)))
        return self.copy_with_noise(pool[idx], key)


def generate(generator, z: LatentVector, c: ConditionVector,
             sample_id: str | None = None) -> ImageSample:
    """Run a generator; output is a synthetic-origin sample clamped to [-1, 1]."""
    if z.values.size != generator.latent_dim:
        raise DimensionMismatch(
            f"latent size {z.values.size}, generator wants {generator.latent_dim}"
        )
    if c.n_classes != generator.n_classes:
        raise DimensionMismatch(
            f"condition size {c.n_classes}, generator wants {generator.n_classes}"
        )
    pixels = np.clip(generator.render(z, c), -1.0, 1.0).astype(np.float32)
    if sample_id is None:
        key = zlib.crc32(np.ascontiguousarray(z.values).tobytes())
        key = zlib.crc32(np.ascontiguousarray(c.weights).tobytes(), key)
        sample_id = f"gen-{key:08x}"
    label = LABEL_ORDER[c.hard_label_index()]
    return ImageSample(pixels=pixels, label=label, origin=Origin.SYNTHETIC, id=sample_id)
