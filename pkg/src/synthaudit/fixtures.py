"""Seeded toy worlds with known leakage ground truth.

Two families:

- private: real splits are i.i.d. draws from per-class blobs, synthetic
  data comes either from a generator that never saw the real data or
  (``matched_synthetic=True``) from fresh draws of the same blobs. Either
  way no real sample leaks, so a correct attack should score near chance.

- leaky: every real sample is a distinct prototype built from dyadic
  pixel values (a class strip plus one private signature pixel, both at
  0.5), and the synthetic set is round-robin copies of the training
  split plus optional epsilon noise. The dyadic construction makes every
  pairwise distance exact in floating point: a leak pair sits at 0 (for
  epsilon 0), same-class strangers at sqrt(0.5), cross-class pairs at
  sqrt(4.5). A low-percentile neighbor threshold therefore lands exactly
  on the same-class tie and strict comparison keeps only true copies, so
  the attacks have a clean, reproducible target. With continuous
  geometry the percentile threshold always admits a bulk of near ties
  that swamps one or two copies; the exact-tie world is what makes the
  copy signal observable at toy scale.

All randomness is drawn from one generator in a fixed documented order
(train labels, train pixels, val labels, val pixels, test labels, test
pixels, synthetic labels, synthetic latents/noise), so a seed pins the
entire world.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conditioning import (
    LabelDistribution,
    LatentVector,
    ToyPrivateGenerator,
    generate,
    one_hot,
)
from .tensor_io import (
    LABEL_ORDER,
    ImageSample,
    LabeledDataset,
    Origin,
)

DEFAULT_SHAPE = (9, 16, 16)
STRIP = 8
TRAIN_LABEL_PROBS = (0.25, 0.55, 0.2)
TEST_LABEL_PROBS = (0.23, 0.55, 0.22)
SYNTH_RATIO = 1.2


@dataclass
class Fixture:
    train: LabeledDataset
    val: LabeledDataset
    test: LabeledDataset
    synthetic: LabeledDataset
    meta: dict = field(default_factory=dict)

    def splits(self) -> dict[str, LabeledDataset]:
        return {
            "train": self.train,
            "val": self.val,
            "test": self.test,
            "synthetic": self.synthetic,
        }


def _class_patterns(shape, amplitude: float = 0.5) -> np.ndarray:
    """(K, D) strip patterns: class k lights pixels [k*STRIP, (k+1)*STRIP)."""
    d = int(np.prod(shape))
    if d < len(LABEL_ORDER) * STRIP:
        raise ValueError(f"shape {shape} too small for {len(LABEL_ORDER)} class strips")
    patterns = np.zeros((len(LABEL_ORDER), d))
    for k in range(len(LABEL_ORDER)):
        patterns[k, k * STRIP:(k + 1) * STRIP] = amplitude
    return patterns


def _sample_split_labels(rng: np.random.Generator, n: int, probs) -> np.ndarray:
    return rng.choice(len(LABEL_ORDER), size=n, p=np.asarray(probs, dtype=np.float64))


def _blob_samples(rng, labels, patterns, shape, noise, origin, prefix) -> list[ImageSample]:
    n = labels.shape[0]
    d = patterns.shape[1]
    pix = patterns[labels] + noise * rng.standard_normal((n, d))
    pix = np.clip(pix, -1.0, 1.0).astype(np.float32).reshape(n, *shape)
    return [
        ImageSample(pixels=pix[i], label=LABEL_ORDER[labels[i]], origin=origin,
                    id=f"{prefix}-{i:05d}")
        for i in range(n)
    ]


def make_private_fixture(
    n_train: int = 1000,
    n_val: int = 400,
    n_test: int = 400,
    n_synthetic: int | None = None,
    shape=DEFAULT_SHAPE,
    seed: int = 0,
    noise: float = 0.15,
    matched_synthetic: bool = False,
) -> Fixture:
    """Blob world without leakage.

    ``matched_synthetic=False`` draws synthetic images from a fixed
    tanh-linear generator (faithless but private); ``True`` draws them
    from the same class blobs as the real data (faithful and private),
    which is the regime where real- and synthetic-trained classifiers
    should transfer equally.
    """
    if n_synthetic is None:
        n_synthetic = round(SYNTH_RATIO * n_train)
    rng = np.random.default_rng(seed)
    patterns = _class_patterns(shape)
    datasets = {}
    for name, n, probs, origin in (
        ("train", n_train, TRAIN_LABEL_PROBS, Origin.TRAIN),
        ("val", n_val, TRAIN_LABEL_PROBS, Origin.VAL),
        ("test", n_test, TEST_LABEL_PROBS, Origin.TEST),
    ):
        labels = _sample_split_labels(rng, n, probs)
        samples = _blob_samples(rng, labels, patterns, shape, noise, origin, name)
        datasets[name] = LabeledDataset(samples=samples, name=name)

    synth_labels = _sample_split_labels(rng, n_synthetic, TRAIN_LABEL_PROBS)
    if matched_synthetic:
        samples = _blob_samples(rng, synth_labels, patterns, shape, noise,
                                Origin.SYNTHETIC, "syn")
        synthetic = LabeledDataset(samples=samples, name="synthetic")
        synth_mode = "matched_blobs"
    else:
        gen = ToyPrivateGenerator(shape=shape, seed=seed + 1)
        samples = []
        for i in range(n_synthetic):
            z = LatentVector(values=rng.standard_normal(gen.latent_dim))
            s = generate(gen, z, one_hot(int(synth_labels[i])), sample_id=f"syn-{i:05d}")
            samples.append(s)
        synthetic = LabeledDataset(samples=samples, name="synthetic")
        synth_mode = "generator"
    meta = {
        "kind": "private",
        "seed": seed,
        "shape": list(shape),
        "noise": noise,
        "sizes": {"train": n_train, "val": n_val, "test": n_test,
                  "synthetic": n_synthetic},
        "synthetic_provenance": synth_mode,
    }
    return Fixture(train=datasets["train"], val=datasets["val"],
                   test=datasets["test"], synthetic=synthetic, meta=meta)


def make_leaky_fixture(
    n_train: int = 1000,
    n_val: int = 400,
    n_test: int = 400,
    n_synthetic: int | None = None,
    shape=DEFAULT_SHAPE,
    seed: int = 0,
    epsilon: float = 0.05,
) -> Fixture:
    """Prototype world where the synthetic set copies the training split.

    Real sample g (counted across train, val, test) is its class strip
    plus signature pixel ``3*STRIP + g`` at 0.5; all values are dyadic so
    distances are exact. Synthetic sample j copies train sample
    ``j mod n_train`` and adds ``epsilon``-scaled noise (none for 0).
    """
    if n_synthetic is None:
        n_synthetic = round(SYNTH_RATIO * n_train)
    if epsilon < 0.0:
        raise ValueError("epsilon must be non-negative")
    d = int(np.prod(shape))
    n_real = n_train + n_val + n_test
    base = len(LABEL_ORDER) * STRIP
    if base + n_real > d:
        raise ValueError(
            f"shape {shape} has {d} pixels, need {base + n_real} "
            f"for {n_real} distinct prototypes"
        )
    rng = np.random.default_rng(seed)
    patterns = _class_patterns(shape)

    datasets = {}
    g = 0
    for name, n, probs, origin in (
        ("train", n_train, TRAIN_LABEL_PROBS, Origin.TRAIN),
        ("val", n_val, TRAIN_LABEL_PROBS, Origin.VAL),
        ("test", n_test, TEST_LABEL_PROBS, Origin.TEST),
    ):
        labels = _sample_split_labels(rng, n, probs)
        pix = patterns[labels].copy()
        for i in range(n):
            pix[i, base + g + i] = 0.5
        samples = [
            ImageSample(
                pixels=pix[i].astype(np.float32).reshape(shape),
                label=LABEL_ORDER[labels[i]],
                origin=origin,
                id=f"{name}-{i:05d}",
            )
            for i in range(n)
        ]
        datasets[name] = LabeledDataset(samples=samples, name=name)
        g += n

    train = datasets["train"]
    synth_samples = []
    for j in range(n_synthetic):
        src = train.samples[j % n_train]
        pix = src.pixels.astype(np.float64)
        if epsilon > 0.0:
            pix = pix + epsilon * rng.standard_normal(pix.shape)
        pix = np.clip(pix, -1.0, 1.0).astype(np.float32)
        synth_samples.append(
            ImageSample(pixels=pix, label=src.label, origin=Origin.SYNTHETIC,
                        id=f"syn-{j:05d}")
        )
    synthetic = LabeledDataset(samples=synth_samples, name="synthetic")
    meta = {
        "kind": "leaky",
        "seed": seed,
        "shape": list(shape),
        "epsilon": epsilon,
        "sizes": {"train": n_train, "val": n_val, "test": n_test,
                  "synthetic": n_synthetic},
        "synthetic_provenance": "synthetic j copies train (j mod n_train)",
    }
    return Fixture(train=train, val=datasets["val"], test=datasets["test"],
                   synthetic=synthetic, meta=meta)
