"""Membership-inference attacks against a synthetic dataset.

Two attacks share one deterministic distance kernel:

- pairwise: each candidate's score is its minimum Euclidean distance to
  any synthetic sample (small = suspicious),
- distribution: a threshold is set at a low percentile of all
  candidate-synthetic distances, and each candidate's score is how many
  synthetic samples fall strictly below it (large = suspicious).

Distances are computed in candidate-major blocks with float64
accumulation; per-pair sums always reduce over the pixel axis in index
order, so results are bit-identical for any block size. Thresholding and
counting happen on distances (after the square root), never on squared
values, so a threshold that lands exactly on a tied distance excludes the
tie under strict comparison no matter which code path produced it.

Both attacks run in pixel space or in a fitted embedding space. Cut-off
tables report, for the top-k most suspicious candidates, what fraction
came from each real split; an attack that works concentrates training
data at small k.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import embedding, stats
from .errors import (
    CutoffTooLarge,
    EmptyReference,
    EmptySynthetic,
    MissingEmbeddingModel,
    MissingOrigin,
    ShapeMismatch,
)
from .tensor_io import CandidateSet, LabeledDataset, Origin, REAL_ORIGINS


class Space(Enum):
    PIXEL = "pixel"
    EMBEDDING = "embedding"


class Direction(Enum):
    SMALLEST_FIRST = "smallest_first"  # low score = suspicious (distances)
    LARGEST_FIRST = "largest_first"    # high score = suspicious (counts)


# default thresholds: 1st percentile of pixel distances, 0.1st in embedding space
DISTRIBUTION_PERCENTILE = {Space.PIXEL: 1.0, Space.EMBEDDING: 0.1}

# block sizes for the distance kernel; results do not depend on these
CANDIDATE_BLOCK = 64
BLOCK_ELEMS = 1 << 22


@dataclass
class PairwiseReport:
    ids: list[str]
    origins: list[Origin]
    min_distance: np.ndarray     # (N,) float64
    nearest_index: np.ndarray    # (N,) int64, first synthetic index at the minimum
    space: Space

    def ranks(self) -> np.ndarray:
        """1-based rank by ascending distance, ties by candidate order."""
        order = np.argsort(self.min_distance, kind="stable")
        r = np.empty(len(order), dtype=np.int64)
        r[order] = np.arange(1, len(order) + 1)
        return r

    def csv_rows(self):
        ranks = self.ranks()
        return [
            (self.ids[i], self.origins[i].value, float(self.min_distance[i]), int(ranks[i]))
            for i in range(len(self.ids))
        ]


@dataclass
class DistributionReport:
    ids: list[str]
    origins: list[Origin]
    neighbor_count: np.ndarray   # (N,) int64
    threshold: float
    space: Space

    def ranks(self) -> np.ndarray:
        """1-based rank by descending neighbor count, ties by candidate order."""
        order = np.argsort(-self.neighbor_count, kind="stable")
        r = np.empty(len(order), dtype=np.int64)
        r[order] = np.arange(1, len(order) + 1)
        return r

    def csv_rows(self):
        ranks = self.ranks()
        return [
            (self.ids[i], self.origins[i].value, int(self.neighbor_count[i]), int(ranks[i]))
            for i in range(len(self.ids))
        ]


@dataclass
class CutoffRow:
    cutoff: int
    p_train: float
    p_val: float
    p_test: float


@dataclass
class CutoffTable:
    rows: list[CutoffRow]

    def csv_rows(self):
        return [
            (r.cutoff, float(r.p_train), float(r.p_val), float(r.p_test))
            for r in self.rows
        ]


# ---------------------------------------------------------------------------
# feature extraction and the distance kernel


def _features(data, space: Space, model) -> np.ndarray:
    if space is Space.EMBEDDING:
        if model is None:
            raise MissingEmbeddingModel("embedding space requested without a model")
        return embedding.transform(model, data)
    if isinstance(data, (LabeledDataset, CandidateSet)):
        return data.pixel_matrix().astype(np.float64)
    x = np.asarray(data, dtype=np.float64)
    # explicit width: reshape(n, -1) cannot infer the axis when n == 0
    width = int(np.prod(x.shape[1:])) if x.ndim >= 2 else 1
    return x.reshape(x.shape[0], width)


def _check_widths(cand: np.ndarray, synth: np.ndarray) -> None:
    if cand.shape[1] != synth.shape[1]:
        raise ShapeMismatch(
            f"candidate width {cand.shape[1]} vs synthetic width {synth.shape[1]}"
        )


def _synth_block(width: int, cand_rows: int) -> int:
    return max(1, BLOCK_ELEMS // max(1, cand_rows * width))


def _block_sq_dists(cb: np.ndarray, sb: np.ndarray) -> np.ndarray:
    """(len(cb), len(sb)) squared distances, summed over pixels in index order."""
    diff = cb[:, None, :] - sb[None, :, :]
    return np.sum(diff * diff, axis=2)


def min_distances(candidates, synthetic, space: Space = Space.PIXEL,
                  model=None) -> PairwiseReport:
    """Minimum Euclidean distance from each candidate to the synthetic set."""
    if isinstance(synthetic, LabeledDataset) and len(synthetic) == 0:
        raise EmptySynthetic("no synthetic samples")
    cand = _features(candidates, space, model)
    synth = _features(synthetic, space, model)
    if synth.shape[0] == 0:
        raise EmptySynthetic("no synthetic samples")
    _check_widths(cand, synth)
    n = cand.shape[0]
    best = np.full(n, np.inf)
    best_idx = np.zeros(n, dtype=np.int64)
    sb_size = _synth_block(cand.shape[1], min(n, CANDIDATE_BLOCK))
    for ci in range(0, n, CANDIDATE_BLOCK):
        cb = cand[ci:ci + CANDIDATE_BLOCK]
        rows = slice(ci, ci + cb.shape[0])
        for si in range(0, synth.shape[0], sb_size):
            sq = _block_sq_dists(cb, synth[si:si + sb_size])
            block_min = sq.min(axis=1)
            block_arg = sq.argmin(axis=1) + si
            better = block_min < best[rows]
            best[rows] = np.where(better, block_min, best[rows])
            best_idx[rows] = np.where(better, block_arg, best_idx[rows])
    if isinstance(candidates, (LabeledDataset, CandidateSet)):
        ids, origins = candidates.ids(), candidates.origins()
    else:
        ids = [str(i) for i in range(n)]
        origins = [Origin.TEST] * n
    return PairwiseReport(
        ids=ids,
        origins=origins,
        min_distance=np.sqrt(best),
        nearest_index=best_idx,
        space=space,
    )


def _all_distances(cand: np.ndarray, synth: np.ndarray) -> np.ndarray:
    """All candidate-synthetic distances, candidate-major order."""
    n, m = cand.shape[0], synth.shape[0]
    out = np.empty(n * m, dtype=np.float64)
    sb_size = _synth_block(cand.shape[1], min(n, CANDIDATE_BLOCK))
    for ci in range(0, n, CANDIDATE_BLOCK):
        cb = cand[ci:ci + CANDIDATE_BLOCK]
        for si in range(0, m, sb_size):
            sq = _block_sq_dists(cb, synth[si:si + sb_size])
            d = np.sqrt(sq)
            for r in range(cb.shape[0]):
                row = (ci + r) * m + si
                out[row:row + d.shape[1]] = d[r]
    return out


def neighbor_threshold(candidates, synthetic, percentile: float | None = None,
                       space: Space = Space.PIXEL, model=None) -> float:
    """Low percentile of the full candidate-synthetic distance multiset."""
    cand = _features(candidates, space, model)
    synth = _features(synthetic, space, model)
    if synth.shape[0] == 0:
        raise EmptySynthetic("no synthetic samples")
    _check_widths(cand, synth)
    if percentile is None:
        percentile = DISTRIBUTION_PERCENTILE[space]
    if not 0.0 < percentile < 100.0:
        raise ValueError(f"percentile {percentile} outside (0, 100)")
    return stats.empirical_quantile(_all_distances(cand, synth), percentile)


def cluster_sizes(candidates, synthetic, threshold: float,
                  space: Space = Space.PIXEL, model=None) -> DistributionReport:
    """Count synthetic samples strictly below the distance threshold."""
    if threshold < 0.0 or not np.isfinite(threshold):
        raise ValueError(f"threshold must be finite and non-negative, got {threshold}")
    cand = _features(candidates, space, model)
    synth = _features(synthetic, space, model)
    if synth.shape[0] == 0:
        raise EmptySynthetic("no synthetic samples")
    _check_widths(cand, synth)
    n = cand.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    sb_size = _synth_block(cand.shape[1], min(n, CANDIDATE_BLOCK))
    for ci in range(0, n, CANDIDATE_BLOCK):
        cb = cand[ci:ci + CANDIDATE_BLOCK]
        rows = slice(ci, ci + cb.shape[0])
        for si in range(0, synth.shape[0], sb_size):
            d = np.sqrt(_block_sq_dists(cb, synth[si:si + sb_size]))
            counts[rows] += np.count_nonzero(d < threshold, axis=1)
    if isinstance(candidates, (LabeledDataset, CandidateSet)):
        ids, origins = candidates.ids(), candidates.origins()
    else:
        ids = [str(i) for i in range(n)]
        origins = [Origin.TEST] * n
    return DistributionReport(
        ids=ids,
        origins=origins,
        neighbor_count=counts,
        threshold=float(threshold),
        space=space,
    )


# ---------------------------------------------------------------------------
# cut-off analyses over suspicion scores


def _suspicion_order(scores: np.ndarray, direction: Direction) -> np.ndarray:
    if direction is Direction.SMALLEST_FIRST:
        return np.argsort(scores, kind="stable")
    return np.argsort(-scores, kind="stable")


def _origin_codes(origins) -> np.ndarray:
    codes = np.empty(len(origins), dtype=np.int64)
    for i, o in enumerate(origins):
        if o not in REAL_ORIGINS:
            raise ValueError(f"cut-off analysis expects real origins, got {o}")
        codes[i] = REAL_ORIGINS.index(o)
    return codes


def cutoff_table(scores, origins, cutoffs, direction: Direction) -> CutoffTable:
    """Origin proportions among the top-k most suspicious candidates."""
    s = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if s.shape[0] != len(origins):
        raise ValueError("scores and origins must align")
    codes = _origin_codes(origins)
    order = _suspicion_order(s, direction)
    rows = []
    for k in cutoffs:
        k = int(k)
        if k < 1:
            raise ValueError(f"cutoff {k} must be at least 1")
        if k > s.shape[0]:
            raise CutoffTooLarge(f"cutoff {k} exceeds {s.shape[0]} candidates")
        top = codes[order[:k]]
        counts = np.bincount(top, minlength=3)
        rows.append(CutoffRow(
            cutoff=k,
            p_train=float(counts[0] / k),
            p_val=float(counts[1] / k),
            p_test=float(counts[2] / k),
        ))
    return CutoffTable(rows=rows)


def cutoff_curve(scores, origins, direction: Direction) -> CutoffTable:
    """Cut-off table at every k from 1 to N, computed over one shared order."""
    s = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    codes = _origin_codes(origins)
    order = _suspicion_order(s, direction)
    sorted_codes = codes[order]
    rows = []
    cum = np.zeros(3, dtype=np.int64)
    for k in range(1, s.shape[0] + 1):
        cum[sorted_codes[k - 1]] += 1
        rows.append(CutoffRow(
            cutoff=k,
            p_train=float(cum[0] / k),
            p_val=float(cum[1] / k),
            p_test=float(cum[2] / k),
        ))
    return CutoffTable(rows=rows)


def anomaly_flags(report: PairwiseReport, reference_origin: Origin,
                  percentile: float = 5.0) -> np.ndarray:
    """Flag candidates whose distance sits below a low reference quantile.

    The reference distribution is the min-distance of candidates from
    ``reference_origin`` (normally the split the generator never saw).
    """
    ref_mask = np.array([o is reference_origin for o in report.origins])
    if not ref_mask.any():
        raise EmptyReference(f"no candidates from {reference_origin}")
    q = stats.empirical_quantile(report.min_distance[ref_mask], percentile)
    return report.min_distance < q


def attack_auc(scores, origins, positive_origin: Origin, negative_origin: Origin,
               direction: Direction) -> float:
    """AUC of suspicion scores for separating two origins.

    0.5 means the attack cannot tell the origins apart; 1.0 means the
    positive origin is always ranked more suspicious.
    """
    s = np.asarray(scores, dtype=np.float64)
    origins = list(origins)
    pos = np.array([o is positive_origin for o in origins])
    neg = np.array([o is negative_origin for o in origins])
    if not pos.any():
        raise MissingOrigin(f"no candidates from {positive_origin}")
    if not neg.any():
        raise MissingOrigin(f"no candidates from {negative_origin}")
    keep = pos | neg
    oriented = -s if direction is Direction.SMALLEST_FIRST else s
    return stats.roc_curve(oriented[keep], pos[keep].astype(np.int64)).auc
