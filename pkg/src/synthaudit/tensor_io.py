"""Array-file and manifest I/O plus the dataset containers used everywhere else.

Array files follow the NPY version 1.0 layout: the 6-byte magic
``\\x93NUMPY``, one version byte pair, a little-endian u16 header length,
then an ASCII dict literal header padded with spaces so the payload starts
on a 64-byte boundary, terminated by a newline. Payloads are little-endian
float32, row-major. Files written by ``numpy.save`` with a float32 array
are accepted byte-for-byte, and files written here load with
``numpy.load``; the reader is still hand-rolled so format violations map
to typed errors instead of whatever numpy raises that week.

Manifests are CSV with header ``id,label,origin`` and lowercase enum
tokens. A dataset is the positional join of an array file and a manifest.
"""

from __future__ import annotations

import ast
import csv
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateId,
    InsufficientSamples,
    IoFailure,
    MagicMismatch,
    RowCountMismatch,
    TruncatedPayload,
    UnknownLabel,
    UnknownOrigin,
    UnsupportedDtype,
    UnsupportedOrder,
)

MAGIC = b"\x93NUMPY"
CANONICAL_SHAPE = (9, 64, 64)
MANIFEST_HEADER = ["id", "label", "origin"]


class Label(Enum):
    CERVICAL = "cervical"
    THORACIC = "thoracic"
    LUMBAR = "lumbar"


class Origin(Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"
    SYNTHETIC = "synthetic"


# class index convention used everywhere a label becomes an integer
LABEL_ORDER = (Label.CERVICAL, Label.THORACIC, Label.LUMBAR)
REAL_ORIGINS = (Origin.TRAIN, Origin.VAL, Origin.TEST)


def label_code(label: Label) -> int:
    return LABEL_ORDER.index(label)


@dataclass
class ImageSample:
    """One image with its class label, split origin and stable id."""

    pixels: np.ndarray  # (C, H, W) float32
    label: Label
    origin: Origin
    id: str


@dataclass
class LabeledDataset:
    """Homogeneous list of samples; shapes identical, ids unique."""

    samples: list[ImageSample]
    name: str = ""

    def __post_init__(self):
        if self.samples:
            shape = self.samples[0].pixels.shape
            for s in self.samples:
                if s.pixels.shape != shape:
                    raise ValueError(
                        f"dataset {self.name!r}: mixed sample shapes "
                        f"{shape} vs {s.pixels.shape}"
                    )
        seen = set()
        for s in self.samples:
            if s.id in seen:
                raise DuplicateId(f"dataset {self.name!r}: duplicate id {s.id!r}")
            seen.add(s.id)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def image_shape(self) -> tuple[int, ...]:
        if not self.samples:
            raise ValueError(f"dataset {self.name!r} is empty")
        return self.samples[0].pixels.shape

    def pixel_stack(self) -> np.ndarray:
        """(N, C, H, W) float32 view-stack of all samples."""
        return np.stack([s.pixels for s in self.samples]).astype(np.float32)

    def pixel_matrix(self) -> np.ndarray:
        """(N, C*H*W) float32, one flattened sample per row."""
        n = len(self.samples)
        return self.pixel_stack().reshape(n, -1)

    def label_codes(self) -> np.ndarray:
        return np.array([label_code(s.label) for s in self.samples], dtype=np.int64)

    def origins(self) -> list[Origin]:
        return [s.origin for s in self.samples]

    def ids(self) -> list[str]:
        return [s.id for s in self.samples]


@dataclass
class CandidateSet:
    """Attack candidates: equal counts per real origin, never synthetic."""

    samples: list[ImageSample]
    per_origin: int

    def __post_init__(self):
        counts = {o: 0 for o in REAL_ORIGINS}
        for s in self.samples:
            if s.origin is Origin.SYNTHETIC:
                raise ValueError("synthetic sample in candidate set")
            counts[s.origin] += 1
        if set(counts.values()) != {self.per_origin}:
            raise ValueError(f"unbalanced candidate counts {counts}")
        seen = set()
        for s in self.samples:
            if s.id in seen:
                raise DuplicateId(f"candidate set: duplicate id {s.id!r}")
            seen.add(s.id)

    def __len__(self) -> int:
        return len(self.samples)

    def pixel_matrix(self) -> np.ndarray:
        n = len(self.samples)
        return np.stack([s.pixels for s in self.samples]).reshape(n, -1).astype(np.float32)

    def origins(self) -> list[Origin]:
        return [s.origin for s in self.samples]

    def ids(self) -> list[str]:
        return [s.id for s in self.samples]


# ---------------------------------------------------------------------------
# array files


def _parse_header(data: bytes) -> tuple[dict, int]:
    """Return (header dict, payload offset) or raise a typed format error."""
    if len(data) < 10 or data[:6] != MAGIC:
        raise MagicMismatch("not an array file: bad magic")
    major = data[6]
    if major == 1:
        if len(data) < 10:
            raise MagicMismatch("header truncated")
        (hlen,) = struct.unpack("<H", data[8:10])
        start = 10
    elif major == 2:
        if len(data) < 12:
            raise MagicMismatch("header truncated")
        (hlen,) = struct.unpack("<I", data[8:12])
        start = 12
    else:
        raise MagicMismatch(f"unsupported format version {major}.{data[7]}")
    end = start + hlen
    if len(data) < end:
        raise MagicMismatch("header truncated")
    try:
        header = ast.literal_eval(data[start:end].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise MagicMismatch(f"malformed header: {exc}") from exc
    if not isinstance(header, dict) or not {"descr", "fortran_order", "shape"} <= set(header):
        raise MagicMismatch("malformed header: missing keys")
    return header, end


def load_array(path) -> np.ndarray:
    """Read an array file into float32.

    Accepts ``<f4`` payloads as-is and narrows ``<f8`` to float32 with
    round-to-nearest. Anything else is refused with a typed error.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    header, offset = _parse_header(data)
    descr = header["descr"]
    if descr not in ("<f4", "<f8"):
        raise UnsupportedDtype(f"dtype {descr!r} not supported (want <f4 or <f8)")
    if header["fortran_order"]:
        raise UnsupportedOrder("column-major payloads not supported")
    shape = tuple(int(d) for d in header["shape"])
    itemsize = 4 if descr == "<f4" else 8
    count = 1
    for d in shape:
        count *= d
    payload = data[offset:]
    if len(payload) != count * itemsize:
        raise TruncatedPayload(
            f"payload is {len(payload)} bytes, expected {count * itemsize}"
        )
    arr = np.frombuffer(payload, dtype=descr).reshape(shape)
    return arr.astype(np.float32)


def save_array(tensor, path) -> None:
    """Write a float32 array file (format version 1.0, 64-byte aligned header)."""
    arr = np.ascontiguousarray(np.asarray(tensor, dtype=np.float32))
    if arr.ndim > 4:
        raise ValueError(f"rank {arr.ndim} tensor: at most 4 axes supported")
    header = (
        "{'descr': '<f4', 'fortran_order': False, 'shape': "
        + repr(arr.shape)
        + ", }"
    )
    # pad with spaces so magic+version+length+header is a multiple of 64,
    # last header byte a newline
    base = len(MAGIC) + 2 + 2 + len(header) + 1
    pad = (64 - base % 64) % 64
    header_bytes = (header + " " * pad + "\n").encode("latin1")
    out = MAGIC + bytes([1, 0]) + struct.pack("<H", len(header_bytes)) + header_bytes
    try:
        with open(path, "wb") as fh:
            fh.write(out)
            fh.write(arr.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# manifests


def load_manifest(path) -> list[tuple[str, Label, Origin]]:
    """Read ``id,label,origin`` rows; enum tokens must be lowercase exact."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != MANIFEST_HEADER:
                raise ValueError(f"manifest {path}: bad header {header!r}")
            records = []
            seen = set()
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 3:
                    raise ValueError(f"manifest {path}:{lineno}: expected 3 fields")
                sample_id, label_s, origin_s = row
                try:
                    label = Label(label_s)
                except ValueError:
                    raise UnknownLabel(
                        f"manifest {path}:{lineno}: unknown label {label_s!r}"
                    ) from None
                try:
                    origin = Origin(origin_s)
                except ValueError:
                    raise UnknownOrigin(
                        f"manifest {path}:{lineno}: unknown origin {origin_s!r}"
                    ) from None
                if sample_id in seen:
                    raise DuplicateId(
                        f"manifest {path}:{lineno}: duplicate id {sample_id!r}"
                    )
                seen.add(sample_id)
                records.append((sample_id, label, origin))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return records


def save_manifest(records, path) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(MANIFEST_HEADER)
            for sample_id, label, origin in records:
                writer.writerow([sample_id, label.value, origin.value])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# datasets


def join_dataset(pixels: np.ndarray, records, name: str = "") -> LabeledDataset:
    """Join array row i to manifest record i."""
    arr = np.asarray(pixels, dtype=np.float32)
    if arr.ndim != 4:
        raise ValueError(f"dataset array must be (N, C, H, W), got rank {arr.ndim}")
    if arr.shape[0] != len(records):
        raise RowCountMismatch(
            f"array has {arr.shape[0]} rows, manifest has {len(records)}"
        )
    arr = arr.copy()
    arr.setflags(write=False)
    samples = [
        ImageSample(pixels=arr[i], label=rec[1], origin=rec[2], id=rec[0])
        for i, rec in enumerate(records)
    ]
    return LabeledDataset(samples=samples, name=name)


def load_dataset(array_path, manifest_path, name: str = "") -> LabeledDataset:
    return join_dataset(load_array(array_path), load_manifest(manifest_path), name=name)


def save_dataset(dataset: LabeledDataset, array_path, manifest_path) -> None:
    save_array(dataset.pixel_stack(), array_path)
    save_manifest(
        [(s.id, s.label, s.origin) for s in dataset.samples], manifest_path
    )


def build_candidate_set(
    train: LabeledDataset,
    val: LabeledDataset,
    test: LabeledDataset,
    per_origin: int,
    seed: int,
) -> CandidateSet:
    """Draw ``per_origin`` samples without replacement from each split.

    Selection is seeded; the drawn indices are sorted so candidate order
    within a split follows dataset order regardless of rng internals.
    """
    if per_origin < 1:
        raise ValueError("per_origin must be at least 1")
    rng = np.random.default_rng(seed)
    samples: list[ImageSample] = []
    for ds in (train, val, test):
        if len(ds) < per_origin:
            raise InsufficientSamples(
                f"split {ds.name!r} has {len(ds)} samples, need {per_origin}"
            )
        idx = np.sort(rng.choice(len(ds), size=per_origin, replace=False))
        samples.extend(ds.samples[i] for i in idx)
    return CandidateSet(samples=samples, per_origin=per_origin)


# ---------------------------------------------------------------------------
# validation


@dataclass
class Violation:
    sample_id: str
    kind: str  # "shape" | "nonfinite" | "range"
    detail: str
    pixel_index: tuple[int, ...] | None = None


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_dataset(
    dataset: LabeledDataset,
    expected_shape: tuple[int, int, int] | None = CANONICAL_SHAPE,
) -> ValidationReport:
    """Check shape, finiteness and the [-1, 1] pixel range.

    A non-finite pixel is reported once, as non-finite; the range check
    applies only to finite values. ``expected_shape=None`` skips the
    shape check for datasets that deliberately use another geometry.
    """
    report = ValidationReport()
    for s in dataset.samples:
        if expected_shape is not None and s.pixels.shape != tuple(expected_shape):
            report.violations.append(
                Violation(
                    sample_id=s.id,
                    kind="shape",
                    detail=f"shape {s.pixels.shape}, expected {tuple(expected_shape)}",
                )
            )
        finite = np.isfinite(s.pixels)
        for idx in np.argwhere(~finite):
            t = tuple(int(i) for i in idx)
            report.violations.append(
                Violation(
                    sample_id=s.id,
                    kind="nonfinite",
                    detail=f"value {s.pixels[t]!r}",
                    pixel_index=t,
                )
            )
        bad_range = finite & (np.abs(s.pixels) > 1.0)
        for idx in np.argwhere(bad_range):
            t = tuple(int(i) for i in idx)
            report.violations.append(
                Violation(
                    sample_id=s.id,
                    kind="range",
                    detail=f"value {float(s.pixels[t])} outside [-1, 1]",
                    pixel_index=t,
                )
            )
    return report
