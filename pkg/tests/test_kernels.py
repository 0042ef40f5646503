"""Backend equivalence checks between the numpy and numba kernels."""

import numpy as np
import pytest

from dice import _kernels


def numba_available():
    try:
        _kernels.get_backend("numba")
        return True
    except Exception:
        return False


needs_numba = pytest.mark.skipif(
    not numba_available(), reason="numba backend unavailable"
)


def test_backend_selection():
    assert _kernels.get_backend("numpy").name == "numpy"
    assert _kernels.get_backend("0").name == "numpy"
    assert _kernels.get_backend("off").name == "numpy"
    with pytest.raises(ValueError):
        _kernels.get_backend("banana")


@needs_numba
def test_forced_numba_name():
    assert _kernels.get_backend("1").name == "numba"
    assert _kernels.get_backend("require").name == "numba"


def test_numpy_cosine_zero_rows():
    be = _kernels.get_backend("numpy")
    a = np.array([[0.0, 0.0], [1.0, 0.0]])
    b = np.array([[1.0, 0.0], [0.0, 0.0]])
    sim = be.cosine_matrix(a, b)
    np.testing.assert_array_equal(sim[0], [0.0, 0.0])
    np.testing.assert_array_equal(sim[:, 1], [0.0, 0.0])
    assert sim[1, 0] == pytest.approx(1.0)


def test_numpy_argmax_tie_break():
    be = _kernels.get_backend("numpy")
    sim = np.array([[0.5, 0.5, 0.1], [0.1, 0.7, 0.7]])
    np.testing.assert_array_equal(be.argmax_rows(sim), [0, 1])


@needs_numba
def test_numba_argmax_tie_break():
    be = _kernels.get_backend("numba")
    sim = np.array([[0.5, 0.5, 0.1], [0.1, 0.7, 0.7]])
    np.testing.assert_array_equal(be.argmax_rows(sim), [0, 1])


@needs_numba
def test_cosine_matrix_backends_agree():
    np_be = _kernels.get_backend("numpy")
    nb_be = _kernels.get_backend("numba")
    rng = np.random.default_rng(0)
    for _ in range(10):
        n, m, d = rng.integers(1, 20, size=3)
        a = rng.standard_normal((n, d))
        b = rng.standard_normal((m, d))
        if n > 2:
            a[1] = 0.0  # exercise the zero-norm guard
        np.testing.assert_allclose(
            nb_be.cosine_matrix(a, b), np_be.cosine_matrix(a, b), atol=1e-12
        )


@needs_numba
def test_softmax_attention_backends_agree():
    np_be = _kernels.get_backend("numpy")
    nb_be = _kernels.get_backend("numba")
    rng = np.random.default_rng(1)
    for _ in range(10):
        n, m, d = rng.integers(1, 12, size=3)
        q = rng.standard_normal((n, d))
        k = rng.standard_normal((m, d))
        v = rng.standard_normal((m, d))
        np.testing.assert_allclose(
            nb_be.softmax_attention(q, k, v, float(d)),
            np_be.softmax_attention(q, k, v, float(d)),
            atol=1e-12,
        )


@needs_numba
def test_project_rows_backends_agree():
    np_be = _kernels.get_backend("numpy")
    nb_be = _kernels.get_backend("numba")
    rng = np.random.default_rng(2)
    for _ in range(10):
        n, d = int(rng.integers(1, 30)), int(rng.integers(2, 10))
        r = int(rng.integers(1, d))
        m = rng.standard_normal((n, d))
        u = np.linalg.qr(rng.standard_normal((d, r)))[0]
        np.testing.assert_allclose(
            nb_be.project_rows(m, u), np_be.project_rows(m, u), atol=1e-12
        )


@needs_numba
def test_style_norms_backends_agree():
    np_be = _kernels.get_backend("numpy")
    nb_be = _kernels.get_backend("numba")
    rng = np.random.default_rng(3)
    for _ in range(10):
        n, d = int(rng.integers(1, 40)), int(rng.integers(2, 10))
        r = int(rng.integers(1, d))
        m = rng.standard_normal((n, d))
        u = np.linalg.qr(rng.standard_normal((d, r)))[0]
        np.testing.assert_allclose(
            nb_be.style_norms(m, u), np_be.style_norms(m, u), atol=1e-12
        )


def test_softmax_rows_sum_to_one():
    be = _kernels.get_backend("numpy")
    rng = np.random.default_rng(4)
    q = rng.standard_normal((6, 3)) * 20.0  # large logits, stability check
    k = rng.standard_normal((5, 3)) * 20.0
    v = np.ones((5, 3))
    out = be.softmax_attention(q, k, v, 3.0)
    np.testing.assert_allclose(out, np.ones((6, 3)), atol=1e-9)


def test_module_level_wrappers_follow_env(monkeypatch):
    monkeypatch.setenv("DICE_NUMBA", "0")
    monkeypatch.setattr(_kernels, "_RESOLVED", None)
    assert _kernels.backend_name() == "numpy"
    a = np.array([[1.0, 0.0]])
    np.testing.assert_allclose(
        _kernels.cosine_matrix(a, a), [[1.0]], atol=1e-12
    )
