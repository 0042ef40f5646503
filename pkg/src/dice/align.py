"""Semantic token alignment: cosine argmax matching against the anchor.

Positive and negative matrices are re-ordered so row i carries the patch
most similar to anchor patch i. Matching is with repetition; ties take the
lowest index; rows with norm < 1e-12 have similarity 0 everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ValidationError
from .tensor_io import FeatureMatrix


@dataclass
class AlignedTriplet:
    anchor: FeatureMatrix
    positive: FeatureMatrix
    negative: FeatureMatrix
    positive_indices: np.ndarray
    negative_indices: np.ndarray

    def __post_init__(self):
        n, d = self.anchor.n_tokens, self.anchor.dim
        for name, fm in (("positive", self.positive), ("negative", self.negative)):
            if fm.n_tokens != n or fm.dim != d:
                raise ValidationError(
                    f"{name} is {fm.n_tokens}x{fm.dim}, anchor is {n}x{d}"
                )
        for name, idx in (
            ("positive_indices", self.positive_indices),
            ("negative_indices", self.negative_indices),
        ):
            idx = np.asarray(idx)
            if idx.shape != (n,):
                raise ValidationError(f"{name} must have length {n}")
            if idx.min(initial=0) < 0 or idx.max(initial=0) >= n:
                raise ValidationError(f"{name} out of range [0, {n})")


def _mat(x) -> np.ndarray:
    if isinstance(x, FeatureMatrix):
        return x.data
    return FeatureMatrix(np.asarray(x)).data


def cosine_similarity_matrix(a, b) -> np.ndarray:
    """S[i, j] = cos(a_i, b_j), with zero-norm rows mapping to 0."""
    am, bm = _mat(a), _mat(b)
    if am.shape[1] != bm.shape[1]:
        raise ValidationError(f"dim mismatch: {am.shape[1]} vs {bm.shape[1]}")
    if am.shape[0] != bm.shape[0]:
        raise ValidationError(f"token count mismatch: {am.shape[0]} vs {bm.shape[0]}")
    return _kernels.cosine_matrix(am, bm)


def align_to_anchor(anchor, other):
    """Pick, for every anchor row, the most similar row of `other`.

    Returns (aligned FeatureMatrix, index vector); aligned[i] = other[idx[i]].
    """
    s = cosine_similarity_matrix(anchor, other)
    idx = _kernels.argmax_rows(s)
    om = _mat(other)
    tag = other.tag if isinstance(other, FeatureMatrix) else ""
    return FeatureMatrix(om[idx].copy(), tag=tag), idx


def align_triplet(f_a, f_p, f_n) -> AlignedTriplet:
    """Align positive and negative to the anchor; the anchor itself is untouched."""
    anchor = f_a if isinstance(f_a, FeatureMatrix) else FeatureMatrix(np.asarray(f_a))
    pos, pidx = align_to_anchor(anchor, f_p)
    neg, nidx = align_to_anchor(anchor, f_n)
    return AlignedTriplet(anchor, pos, neg, pidx, nidx)
