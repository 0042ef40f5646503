"""Attention decoupling edit: style suppression on K/V, content boost on Q.

All operations are pure; apply_dice_edit computes per-token strengths from
the PRE-edit Q, K, V and returns a new triple.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, aec
from .aec import AecParams
from .errors import ValidationError
from .subspace import Subspace
from .tensor_io import FeatureMatrix


@dataclass
class AttentionTriple:
    q: FeatureMatrix
    k: FeatureMatrix
    v: FeatureMatrix
    d_model: int = 0

    def __post_init__(self):
        shapes = {m.data.shape for m in (self.q, self.k, self.v)}
        if len(shapes) != 1:
            raise ValidationError(f"q/k/v must share shape, got {sorted(shapes)}")
        if self.d_model == 0:
            self.d_model = self.q.dim
        if self.d_model < 1:
            raise ValidationError(f"d_model must be >= 1, got {self.d_model}")

    @property
    def n_tokens(self) -> int:
        return self.q.n_tokens


@dataclass
class EraseParams:
    lam: float = 1.0
    epsilon_rel: float = 1e-4
    epsilon_abs: float | None = None
    r_style: int = 18
    r_content: int = 18
    gamma_q: float = 0.25
    centered: bool = True
    aec: AecParams = field(default_factory=AecParams)

    def __post_init__(self):
        if self.lam < 0:
            raise ValidationError(f"lambda must be >= 0, got {self.lam}")
        if self.epsilon_rel <= 0:
            raise ValidationError(f"epsilon_rel must be > 0, got {self.epsilon_rel}")
        if self.epsilon_abs is not None and self.epsilon_abs <= 0:
            raise ValidationError("epsilon_abs must be > 0 when set")
        if self.gamma_q < 0:
            raise ValidationError(f"gamma_q must be >= 0, got {self.gamma_q}")
        if self.r_style < 1 or self.r_content < 1:
            raise ValidationError("subspace ranks must be >= 1")


def _mat(x) -> np.ndarray:
    return x.data if isinstance(x, FeatureMatrix) else np.asarray(x)


def _check_dim(m: np.ndarray, sub: Subspace) -> None:
    if m.shape[1] != sub.d:
        raise ValidationError(f"row dim {m.shape[1]} vs subspace dim {sub.d}")


def project_onto(x, sub: Subspace) -> np.ndarray:
    """(x U) U', the orthogonal projection of each row onto span(U)."""
    xm = _mat(x)
    _check_dim(xm, sub)
    return _kernels.project_rows(xm, sub.basis)


def suppress_style(m, sub: Subspace, gamma) -> np.ndarray:
    """Row i becomes m_i - gamma[i] * proj(m_i). Scalars broadcast."""
    mm = np.asarray(_mat(m), dtype=np.float64)
    _check_dim(mm, sub)
    g = np.asarray(gamma, dtype=np.float64)
    if g.ndim == 0:
        g = np.full(mm.shape[0], float(g))
    if g.shape != (mm.shape[0],):
        raise ValidationError(f"gamma length {g.shape} vs {mm.shape[0]} tokens")
    if np.any(g < 0) or np.any(g > 1):
        raise ValidationError("gamma entries must lie in [0, 1]")
    if np.all(g == 0.0):
        return mm.copy()
    return mm - g[:, None] * _kernels.project_rows(mm, sub.basis)


def enhance_content(q, sub: Subspace, gamma_q: float) -> np.ndarray:
    """Q + gamma_q * (Q U) U'; in-span components scale by 1 + gamma_q."""
    if sub.kind != "content":
        raise ValidationError("enhance_content needs a content subspace")
    if gamma_q < 0:
        raise ValidationError(f"gamma_q must be >= 0, got {gamma_q}")
    qm = np.asarray(_mat(q), dtype=np.float64)
    _check_dim(qm, sub)
    if gamma_q == 0.0:
        return qm.copy()
    return qm + gamma_q * _kernels.project_rows(qm, sub.basis)


def edited_attention(t: AttentionTriple) -> np.ndarray:
    """softmax(Q Kt / sqrt(d)) V with row-wise softmax."""
    return _kernels.softmax_attention(
        t.q.data, t.k.data, t.v.data, float(t.d_model)
    )


def apply_dice_edit(t: AttentionTriple, style: Subspace, content: Subspace,
                    params: EraseParams) -> AttentionTriple:
    """One-shot edit: gamma from pre-edit Q/K/V, then Q boost + K/V suppression."""
    if style.kind != "style":
        raise ValidationError("apply_dice_edit needs a style subspace first")
    gamma = aec.compute_gamma(t, style, params.aec)
    q_new = enhance_content(t.q, content, params.gamma_q)
    k_new = suppress_style(t.k, style, gamma)
    v_new = suppress_style(t.v, style, gamma)
    return AttentionTriple(
        q=FeatureMatrix(q_new, tag=t.q.tag),
        k=FeatureMatrix(k_new, tag=t.k.tag),
        v=FeatureMatrix(v_new, tag=t.v.tag),
        d_model=t.d_model,
    )
