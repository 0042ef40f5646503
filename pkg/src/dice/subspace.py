"""Contrastive covariance operators and the regularized generalized eigenproblem.

Style subspace: maximize the anchor/positive cross-covariance energy while
penalizing anchor/negative energy,

    rho(u) = u'(S_AP S_PA)u / u'(S_AA + lambda * S_AN S_NA + eps*I)u,

solved as A u = rho B u by Cholesky whitening. The content subspace swaps the
reward and penalty blocks. Bases are the QR-re-orthonormalized top-r
generalized eigenvectors with a deterministic sign convention.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .align import AlignedTriplet
from .errors import FormatError, NumericalError, ValidationError
from .tensor_io import (
    FeatureMatrix,
    _atomic_write_bytes,
    read_tensor,
    require_covariance_ready,
    write_tensor,
)


@dataclass
class CovarianceSet:
    sigma_aa: np.ndarray
    sigma_ap: np.ndarray
    sigma_an: np.ndarray
    n_samples: int
    centered: bool = True

    def __post_init__(self):
        d = self.sigma_aa.shape[0]
        for name, m in (("sigma_aa", self.sigma_aa), ("sigma_ap", self.sigma_ap),
                        ("sigma_an", self.sigma_an)):
            if m.shape != (d, d):
                raise ValidationError(f"{name} must be {d}x{d}, got {m.shape}")
        if np.abs(self.sigma_aa - self.sigma_aa.T).max() > 1e-8:
            raise ValidationError("sigma_aa must be symmetric within 1e-8")


@dataclass
class ContrastiveOperators:
    a_mat: np.ndarray
    b_mat: np.ndarray
    lam: float
    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon}")
        if self.lam < 0:
            raise ValidationError(f"lambda must be >= 0, got {self.lam}")
        d = self.a_mat.shape[0]
        if self.a_mat.shape != (d, d) or self.b_mat.shape != (d, d):
            raise ValidationError("operator blocks must be square and same-size")


@dataclass
class Subspace:
    basis: np.ndarray
    eigenvalues: np.ndarray
    kind: str
    raw_eigvecs: np.ndarray
    lam: float | None = None
    epsilon: float | None = None
    tag: str = ""

    def __post_init__(self):
        if self.kind not in ("style", "content"):
            raise ValidationError(f"kind must be style|content, got {self.kind!r}")
        b = np.asarray(self.basis)
        if b.ndim != 2:
            raise ValidationError("basis must be D x r")
        gram_err = np.abs(b.T @ b - np.eye(b.shape[1])).max()
        # 1e-5 admits f32 file round-trips; fresh fits are ~1e-14
        if gram_err > 1e-5:
            raise ValidationError(f"basis not orthonormal (gram error {gram_err:.2e})")
        ev = np.asarray(self.eigenvalues, dtype=np.float64)
        if ev.shape != (b.shape[1],):
            raise ValidationError("need one eigenvalue per basis column")
        if np.any(np.diff(ev) > 1e-12):
            raise ValidationError("eigenvalues must be sorted descending")
        self.eigenvalues = ev

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    @property
    def r(self) -> int:
        return self.basis.shape[1]


def center_columns(f: FeatureMatrix):
    """Subtract the column mean; returns (centered matrix, mean vector)."""
    fm = f if isinstance(f, FeatureMatrix) else FeatureMatrix(np.asarray(f))
    if fm.n_tokens < 2:
        raise ValidationError("centering needs N >= 2")
    data = np.asarray(fm.data, dtype=np.float64)
    mean = data.mean(axis=0)
    return FeatureMatrix(data - mean, tag=fm.tag), mean


def covariance(x, y) -> np.ndarray:
    """Sample cross-covariance X'Y/(N-1) of two centered matrices."""
    xm = x.data if isinstance(x, FeatureMatrix) else np.asarray(x)
    ym = y.data if isinstance(y, FeatureMatrix) else np.asarray(y)
    if xm.shape != ym.shape:
        raise ValidationError(f"covariance shape mismatch: {xm.shape} vs {ym.shape}")
    n = xm.shape[0]
    if n < 2:
        raise ValidationError("covariance needs N >= 2")
    xm = np.asarray(xm, dtype=np.float64)
    ym = np.asarray(ym, dtype=np.float64)
    return xm.T @ ym / (n - 1)


def compute_covariances(t: AlignedTriplet, centered: bool = True) -> CovarianceSet:
    for fm in (t.anchor, t.positive, t.negative):
        require_covariance_ready(fm)
    if centered:
        fa, _ = center_columns(t.anchor)
        fp, _ = center_columns(t.positive)
        fn, _ = center_columns(t.negative)
    else:
        fa, fp, fn = t.anchor, t.positive, t.negative
    return CovarianceSet(
        sigma_aa=covariance(fa, fa),
        sigma_ap=covariance(fa, fp),
        sigma_an=covariance(fa, fn),
        n_samples=t.anchor.n_tokens,
        centered=centered,
    )


def _operators(cov: CovarianceSet, lam: float, epsilon: float,
               swap: bool) -> ContrastiveOperators:
    reward, penalty = cov.sigma_ap, cov.sigma_an
    if swap:
        reward, penalty = penalty, reward
    a = reward @ reward.T
    b = cov.sigma_aa + lam * (penalty @ penalty.T) + epsilon * np.eye(cov.sigma_aa.shape[0])
    # absorb floating-point drift before factorization
    a = 0.5 * (a + a.T)
    b = 0.5 * (b + b.T)
    return ContrastiveOperators(a_mat=a, b_mat=b, lam=lam, epsilon=epsilon)


def build_operators(t: AlignedTriplet, lam: float, epsilon: float,
                    centered: bool = True) -> ContrastiveOperators:
    """Style-form operators: A = S_AP S_PA, B = S_AA + lambda*S_AN S_NA + eps*I."""
    return _operators(compute_covariances(t, centered), lam, epsilon, swap=False)


def rayleigh_quotient(u: np.ndarray, ops: ContrastiveOperators) -> float:
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    nrm = u @ u
    if nrm == 0.0 or not np.isfinite(nrm):
        raise ValidationError("rayleigh_quotient needs a nonzero finite vector")
    return float((u @ ops.a_mat @ u) / (u @ ops.b_mat @ u))


def solve_generalized_eig(ops: ContrastiveOperators):
    """A u = rho B u via Cholesky whitening.

    B = LL', C = inv(L) A inv(L'), eigh(C), u = inv(L') y. Eigenvalues are
    returned descending; eigenvectors are the columns, B-orthonormal.
    """
    try:
        low = sla.cholesky(ops.b_mat, lower=True)
    except sla.LinAlgError as e:
        raise NumericalError(
            "denominator operator is not positive definite; raise epsilon"
        ) from e
    half = sla.solve_triangular(low, ops.a_mat, lower=True)
    c = sla.solve_triangular(low, half.T, lower=True).T
    c = 0.5 * (c + c.T)
    w, y = np.linalg.eigh(c)
    u = sla.solve_triangular(low, y, lower=True, trans="T")
    order = np.argsort(w)[::-1]
    return w[order], u[:, order]


def _fix_signs(m: np.ndarray) -> np.ndarray:
    out = m.copy()
    for c in range(out.shape[1]):
        j = int(np.argmax(np.abs(out[:, c])))
        if out[j, c] < 0:
            out[:, c] = -out[:, c]
    return out


def _epsilon_for(cov: CovarianceSet, params) -> float:
    if params.epsilon_abs is not None:
        return float(params.epsilon_abs)
    d = cov.sigma_aa.shape[0]
    return float(params.epsilon_rel) * np.trace(cov.sigma_aa) / d


def _fit_from_cov(cov: CovarianceSet, params, swap: bool, kind: str,
                  tag: str) -> Subspace:
    r = params.r_content if swap else params.r_style
    d = cov.sigma_aa.shape[0]
    if not 1 <= r <= d:
        raise ValidationError(f"r must be in [1, {d}], got {r}")
    eps = _epsilon_for(cov, params)
    ops = _operators(cov, params.lam, eps, swap)
    w, u = solve_generalized_eig(ops)
    raw = _fix_signs(u[:, :r])
    basis, _ = np.linalg.qr(raw)
    basis = _fix_signs(basis)
    return Subspace(
        basis=basis,
        eigenvalues=w[:r],
        kind=kind,
        raw_eigvecs=raw,
        lam=params.lam,
        epsilon=eps,
        tag=tag,
    )


def fit_style_subspace(t: AlignedTriplet, params) -> Subspace:
    """Top-r style directions; params is an edit.EraseParams."""
    cov = compute_covariances(t, getattr(params, "centered", True))
    return _fit_from_cov(cov, params, swap=False, kind="style", tag=t.anchor.tag)


def fit_content_subspace(t: AlignedTriplet, params) -> Subspace:
    """Role-swapped fit rewarding anchor/negative correlation."""
    cov = compute_covariances(t, getattr(params, "centered", True))
    return _fit_from_cov(cov, params, swap=True, kind="content", tag=t.anchor.tag)


def fit_both_subspaces(t: AlignedTriplet, params):
    """Style and content fits sharing one covariance pass."""
    cov = compute_covariances(t, getattr(params, "centered", True))
    style = _fit_from_cov(cov, params, swap=False, kind="style", tag=t.anchor.tag)
    content = _fit_from_cov(cov, params, swap=True, kind="content", tag=t.anchor.tag)
    return style, content


def save_subspace(sub: Subspace, dtf_path: str | os.PathLike) -> None:
    """Persist as a D x r DTF1 tensor plus a JSON sidecar <path>.json."""
    dtf_path = os.fspath(dtf_path)
    write_tensor(np.asarray(sub.basis, dtype=np.float64), dtf_path)
    sidecar = {
        "kind": sub.kind,
        "r": int(sub.r),
        "lambda": sub.lam,
        "epsilon": sub.epsilon,
        "eigenvalues": [float(v) for v in sub.eigenvalues],
        "tag": sub.tag,
    }
    blob = json.dumps(sidecar, indent=2, sort_keys=True).encode() + b"\n"
    _atomic_write_bytes(dtf_path + ".json", blob)


def load_subspace(dtf_path: str | os.PathLike) -> Subspace:
    dtf_path = os.fspath(dtf_path)
    fm = read_tensor(dtf_path)
    if not isinstance(fm, FeatureMatrix):
        raise FormatError(f"{dtf_path}: subspace file must be a 2-axis tensor")
    try:
        with open(dtf_path + ".json", "rb") as fh:
            meta = json.load(fh)
    except OSError as e:
        raise FormatError(f"{dtf_path}.json: missing sidecar: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{dtf_path}.json: bad JSON: {e}") from e
    basis = np.asarray(fm.data, dtype=np.float64)
    return Subspace(
        basis=basis,
        eigenvalues=np.asarray(meta["eigenvalues"], dtype=np.float64),
        kind=meta["kind"],
        raw_eigvecs=basis,
        lam=meta.get("lambda"),
        epsilon=meta.get("epsilon"),
        tag=meta.get("tag", ""),
    )
