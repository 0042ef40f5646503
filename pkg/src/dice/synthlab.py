"""Synthetic triplets with planted style/content subspaces.

The generator is the verification backbone: it produces triplets whose true
style and content spans are known, so fitted subspaces can be scored by
principal angles.

Construction notes. The planted bases come from one QR of a seeded Gaussian
matrix (mutually orthogonal by construction). Coefficients also start as a
seeded Gaussian block but are QR-orthogonalized against the all-ones vector
and each other, then scaled by sqrt(N-1): exactly centered, exactly
decorrelated, unit sample variance. Raw Gaussian coefficients carry
O(1/sqrt(N)) sample cross-correlations, which leak through the contrastive
penalty and tilt the noiseless solution by ~0.1 rad at N=256; the
orthogonalized draw makes noiseless recovery exact, which the recovery
thresholds rely on. Noise is isotropic Gaussian scaled to sigma * signal RMS.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .align import AlignedTriplet
from .errors import ValidationError
from .tensor_io import FeatureMatrix


@dataclass
class PlantedSpec:
    n_tokens: int
    dim: int
    r_style: int
    r_content: int
    noise_sigma: float = 0.0
    seed: int = 0
    ground_truth_style: np.ndarray | None = None
    ground_truth_content: np.ndarray | None = None

    def __post_init__(self):
        if self.r_style < 1 or self.r_content < 1:
            raise ValidationError("planted ranks must be >= 1")
        if self.r_style + self.r_content > self.dim:
            raise ValidationError(
                f"r_style + r_content = {self.r_style + self.r_content} "
                f"exceeds dim {self.dim}"
            )
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")
        width = 2 * (self.r_style + self.r_content)
        if self.n_tokens < width + 1:
            raise ValidationError(
                f"need at least {width + 1} tokens for rank "
                f"({self.r_style}, {self.r_content}), got {self.n_tokens}"
            )
        if self.ground_truth_style is not None and self.ground_truth_content is not None:
            cross = np.abs(self.ground_truth_style.T @ self.ground_truth_content).max()
            if cross > 1e-10:
                raise ValidationError("planted bases must be mutually orthogonal")


def generate_triplet(spec: PlantedSpec) -> tuple[AlignedTriplet, PlantedSpec]:
    """Deterministic planted triplet; returns the spec with ground truths filled."""
    rng = np.random.default_rng(spec.seed)
    n, d, rs, rc = spec.n_tokens, spec.dim, spec.r_style, spec.r_content

    basis = np.linalg.qr(rng.standard_normal((d, rs + rc)))[0]
    u_style, u_content = basis[:, :rs], basis[:, rs:]

    block = np.concatenate(
        [np.ones((n, 1)), rng.standard_normal((n, 2 * (rs + rc)))], axis=1
    )
    q = np.linalg.qr(block)[0][:, 1:] * np.sqrt(n - 1)
    style_co = q[:, :rs]
    content_a = q[:, rs:rs + rc]
    content_p = q[:, rs + rc:rs + 2 * rc]
    style_n = q[:, rs + 2 * rc:]

    anchor = style_co @ u_style.T + content_a @ u_content.T
    positive = style_co @ u_style.T + content_p @ u_content.T
    negative = style_n @ u_style.T + content_a @ u_content.T

    if spec.noise_sigma > 0:
        for f in (anchor, positive, negative):
            scale = spec.noise_sigma * np.sqrt(np.mean(f * f))
            f += scale * rng.standard_normal(f.shape)

    idx = np.arange(n, dtype=np.int64)
    triplet = AlignedTriplet(
        anchor=FeatureMatrix(anchor, tag="synthetic"),
        positive=FeatureMatrix(positive, tag="synthetic"),
        negative=FeatureMatrix(negative, tag="synthetic"),
        positive_indices=idx,
        negative_indices=idx.copy(),
    )
    filled = replace(
        spec, ground_truth_style=u_style, ground_truth_content=u_content
    )
    return triplet, filled


def principal_angles(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Ascending canonical angles between span(u) and span(v), in radians."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    for name, b in (("u", u), ("v", v)):
        if b.ndim != 2:
            raise ValidationError(f"{name} must be a D x r basis")
        err = np.abs(b.T @ b - np.eye(b.shape[1])).max()
        if err > 1e-8:
            raise ValidationError(f"{name} is not orthonormal (gram error {err:.2e})")
    if u.shape[0] != v.shape[0]:
        raise ValidationError(f"ambient dims differ: {u.shape[0]} vs {v.shape[0]}")
    # svd returns descending singular values, so arccos is already ascending
    sv = np.linalg.svd(u.T @ v, compute_uv=False)
    return np.arccos(np.clip(sv, 0.0, 1.0))
