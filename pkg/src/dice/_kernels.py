"""Row-parallel numeric kernels with two interchangeable backends.

The numpy backend is the reference. The numba backend JIT-compiles the same
row-level loops with prange over rows only, so both are deterministic for a
fixed backend. Selection, via env var DICE_NUMBA:

    unset / "auto"      numba when importable, else numpy
    "0" / "numpy"       force numpy
    "1" / "numba"       require numba, raise if missing

numba is imported lazily: code paths that never touch these kernels
(e.g. subspace fitting, which is pure BLAS/LAPACK) pay no JIT or import cost.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

ZERO_NORM_TOL = 1e-12

_RESOLVED: SimpleNamespace | None = None


def _as_f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


# ---------------------------------------------------------------- numpy path

def _np_cosine_matrix(a, b):
    a, b = _as_f64(a), _as_f64(b)
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    sa = np.where(na < ZERO_NORM_TOL, 1.0, na)
    sb = np.where(nb < ZERO_NORM_TOL, 1.0, nb)
    s = (a / sa[:, None]) @ (b / sb[:, None]).T
    s[na < ZERO_NORM_TOL, :] = 0.0
    s[:, nb < ZERO_NORM_TOL] = 0.0
    return s


def _np_argmax_rows(s):
    return np.argmax(s, axis=1).astype(np.int64)


def _np_softmax_attention(q, k, v, d_model):
    q, k, v = _as_f64(q), _as_f64(k), _as_f64(v)
    logits = q @ k.T / np.sqrt(float(d_model))
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=1, keepdims=True)
    return w @ v


def _np_project_rows(m, u):
    m, u = _as_f64(m), _as_f64(u)
    return (m @ u) @ u.T


def _np_style_norms(m, u):
    m, u = _as_f64(m), _as_f64(u)
    return np.linalg.norm(m @ u, axis=1)


_NUMPY_IMPL = SimpleNamespace(
    name="numpy",
    cosine_matrix=_np_cosine_matrix,
    argmax_rows=_np_argmax_rows,
    softmax_attention=_np_softmax_attention,
    project_rows=_np_project_rows,
    style_norms=_np_style_norms,
)


# ---------------------------------------------------------------- numba path

def _build_numba_impl() -> SimpleNamespace:
    import numba  # deferred on purpose

    cap = os.environ.get("DICE_THREADS", "")
    if cap.isdigit() and int(cap) >= 1:
        # only ever lowers the count; numba rejects raising past its config
        numba.set_num_threads(min(int(cap), numba.config.NUMBA_NUM_THREADS))

    njit = numba.njit
    prange = numba.prange

    # np.dot lowers to BLAS inside njit; loops only fuse the cheap passes

    @njit(cache=True, parallel=True)
    def cosine_matrix(a, b):
        n, d = a.shape
        m = b.shape[0]
        nb_ = np.empty(m)
        for j in range(m):
            acc = 0.0
            for c in range(d):
                acc += b[j, c] * b[j, c]
            nb_[j] = np.sqrt(acc)
        s = np.dot(a, b.T)
        for i in prange(n):
            acc = 0.0
            for c in range(d):
                acc += a[i, c] * a[i, c]
            na = np.sqrt(acc)
            for j in range(m):
                if na < ZERO_NORM_TOL or nb_[j] < ZERO_NORM_TOL:
                    s[i, j] = 0.0
                else:
                    s[i, j] /= na * nb_[j]
        return s

    @njit(cache=True, parallel=True)
    def argmax_rows(s):
        n, m = s.shape
        out = np.empty(n, dtype=np.int64)
        for i in prange(n):
            best = 0
            bv = s[i, 0]
            for j in range(1, m):
                # strict > keeps the lowest index on ties
                if s[i, j] > bv:
                    bv = s[i, j]
                    best = j
            out[i] = best
        return out

    @njit(cache=True, parallel=True)
    def softmax_attention(q, k, v, d_model):
        n = q.shape[0]
        m = k.shape[0]
        scale = 1.0 / np.sqrt(d_model)
        w = np.dot(q, k.T)
        for i in prange(n):
            mx = -np.inf
            for j in range(m):
                w[i, j] *= scale
                if w[i, j] > mx:
                    mx = w[i, j]
            z = 0.0
            for j in range(m):
                w[i, j] = np.exp(w[i, j] - mx)
                z += w[i, j]
            for j in range(m):
                w[i, j] /= z
        return np.dot(w, v)

    @njit(cache=True)
    def project_rows(m, u):
        return np.dot(np.dot(m, u), u.T)

    @njit(cache=True, parallel=True)
    def style_norms(m, u):
        n = m.shape[0]
        r = u.shape[1]
        coords = np.dot(m, u)
        out = np.empty(n)
        for i in prange(n):
            acc2 = 0.0
            for c in range(r):
                acc2 += coords[i, c] * coords[i, c]
            out[i] = np.sqrt(acc2)
        return out

    def f64(fn):
        def call(*arrays, **kw):
            return fn(*[_as_f64(a) for a in arrays], **kw)
        return call

    return SimpleNamespace(
        name="numba",
        cosine_matrix=f64(cosine_matrix),
        argmax_rows=lambda s: argmax_rows(_as_f64(s)),
        softmax_attention=lambda q, k, v, d_model: softmax_attention(
            _as_f64(q), _as_f64(k), _as_f64(v), float(d_model)
        ),
        project_rows=f64(project_rows),
        style_norms=f64(style_norms),
    )


def get_backend(name: str | None = None) -> SimpleNamespace:
    """Resolve a kernel table. With name=None, honor DICE_NUMBA."""
    if name is None:
        name = os.environ.get("DICE_NUMBA", "auto").strip().lower() or "auto"
    if name in ("0", "numpy", "off", "false"):
        return _NUMPY_IMPL
    if name in ("1", "numba", "require", "true"):
        return _build_numba_impl()
    if name == "auto":
        try:
            return _build_numba_impl()
        except ImportError:
            return _NUMPY_IMPL
    raise ValueError(f"unknown kernel backend {name!r}")


def _impl() -> SimpleNamespace:
    global _RESOLVED
    if _RESOLVED is None:
        _RESOLVED = get_backend()
    return _RESOLVED


def backend_name() -> str:
    return _impl().name


def cosine_matrix(a, b):
    return _impl().cosine_matrix(a, b)


def argmax_rows(s):
    return _impl().argmax_rows(s)


def softmax_attention(q, k, v, d_model):
    return _impl().softmax_attention(q, k, v, d_model)


def project_rows(m, u):
    return _impl().project_rows(m, u)


def style_norms(m, u):
    return _impl().style_norms(m, u)
