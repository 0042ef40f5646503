"""Adaptive erasure controller: per-token style scores to erasure strengths.

Chain: L2 norm of each token's style-subspace coordinates, per-component max
normalization, weighted fusion with w_q < w_k < w_v, sigmoid modulation
centered at tau, affine mapping into [alpha_min, alpha_max].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import _kernels
from .errors import ValidationError
from .tensor_io import FeatureMatrix


@dataclass
class AecParams:
    w_q: float = 0.2
    w_k: float = 0.3
    w_v: float = 0.5
    k_steepness: float = 10.0
    tau: float = 0.5
    alpha_min: float = 0.2
    alpha_max: float = 1.0

    def __post_init__(self):
        if not (0 <= self.w_q < self.w_k < self.w_v):
            raise ValidationError(
                f"need 0 <= w_q < w_k < w_v, got ({self.w_q}, {self.w_k}, {self.w_v})"
            )
        if abs(self.w_q + self.w_k + self.w_v - 1.0) > 1e-9:
            raise ValidationError("fusion weights must sum to 1")
        if self.k_steepness <= 0:
            raise ValidationError("k_steepness must be > 0")
        if not 0 <= self.tau <= 1:
            raise ValidationError(f"tau must be in [0, 1], got {self.tau}")
        if not 0 <= self.alpha_min <= self.alpha_max <= 1:
            raise ValidationError(
                f"need 0 <= alpha_min <= alpha_max <= 1, got "
                f"({self.alpha_min}, {self.alpha_max})"
            )


def _mat(x) -> np.ndarray:
    return x.data if isinstance(x, FeatureMatrix) else np.asarray(x)


def style_scores(m, sub) -> np.ndarray:
    """s_i = ||x_i U||_2, the style-coordinate norm of each token."""
    mm = _mat(m)
    if mm.shape[1] != sub.basis.shape[0]:
        raise ValidationError(
            f"token dim {mm.shape[1]} vs subspace dim {sub.basis.shape[0]}"
        )
    return _kernels.style_norms(mm, sub.basis)


def normalize_scores(s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if np.any(s < 0):
        raise ValidationError("scores must be non-negative")
    peak = s.max(initial=0.0)
    if peak == 0.0:
        return np.zeros_like(s)
    return s / peak


def combine_scores(nq, nk, nv, p: AecParams) -> np.ndarray:
    nq, nk, nv = (np.asarray(v, dtype=np.float64) for v in (nq, nk, nv))
    if not nq.shape == nk.shape == nv.shape:
        raise ValidationError("score vectors must share length")
    return p.w_q * nq + p.w_k * nk + p.w_v * nv


def modulation(s, p: AecParams) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    return expit(p.k_steepness * (s - p.tau))


def erasure_strength(m, p: AecParams) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    return p.alpha_min + (p.alpha_max - p.alpha_min) * m


def compute_gamma(t, sub, p: AecParams) -> np.ndarray:
    """Full chain over an attention triple's Q, K, V (pre-edit values)."""
    nq = normalize_scores(style_scores(t.q, sub))
    nk = normalize_scores(style_scores(t.k, sub))
    nv = normalize_scores(style_scores(t.v, sub))
    return erasure_strength(modulation(combine_scores(nq, nk, nv, p), p), p)
