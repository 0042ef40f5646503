import numpy as np
import pytest
from scipy.special import expit

from dice.aec import (
    AecParams,
    combine_scores,
    compute_gamma,
    erasure_strength,
    modulation,
    normalize_scores,
    style_scores,
)
from dice.edit import AttentionTriple
from dice.errors import ValidationError
from dice.subspace import Subspace
from dice.tensor_io import FeatureMatrix


def fm(rows):
    return FeatureMatrix(np.asarray(rows, dtype=np.float64))


def axis_subspace(d, cols, kind="style"):
    basis = np.eye(d)[:, cols]
    ev = np.arange(len(cols), 0, -1, dtype=np.float64)
    return Subspace(basis, ev, kind, basis)


def test_style_scores_examples():
    s1 = axis_subspace(2, [0])
    np.testing.assert_allclose(style_scores(fm([[3, 4]]), s1), [3.0])
    s2 = axis_subspace(2, [0, 1])
    np.testing.assert_allclose(style_scores(fm([[3, 4]]), s2), [5.0])
    np.testing.assert_allclose(style_scores(fm([[0, 4]]), s1), [0.0])


def test_style_scores_dim_mismatch():
    with pytest.raises(ValidationError):
        style_scores(fm([[1.0, 2.0, 3.0]]), axis_subspace(2, [0]))


def test_normalize_examples():
    np.testing.assert_allclose(
        normalize_scores(np.array([2.0, 4.0])), [0.5, 1.0]
    )
    np.testing.assert_array_equal(normalize_scores(np.zeros(3)), np.zeros(3))
    np.testing.assert_allclose(normalize_scores(np.ones(4)), np.ones(4))
    with pytest.raises(ValidationError):
        normalize_scores(np.array([1.0, -0.5]))


def test_combine_examples():
    p = AecParams()
    one, zero = np.ones(1), np.zeros(1)
    np.testing.assert_allclose(combine_scores(one, zero, zero, p), [0.2])
    np.testing.assert_allclose(combine_scores(zero, one, zero, p), [0.3])
    np.testing.assert_allclose(combine_scores(zero, zero, one, p), [0.5])
    h = np.full(3, 0.5)
    np.testing.assert_allclose(combine_scores(h, h, h, p), np.full(3, 0.5))
    np.testing.assert_allclose(
        combine_scores(np.ones(2), np.ones(2), np.ones(2), p), np.ones(2)
    )
    with pytest.raises(ValidationError):
        combine_scores(np.ones(2), np.ones(3), np.ones(2), p)


def test_modulation_values():
    p = AecParams()
    assert modulation(np.array([p.tau]), p)[0] == pytest.approx(0.5)
    hi = modulation(np.array([p.tau + 10.0 / p.k_steepness]), p)[0]
    lo = modulation(np.array([p.tau - 10.0 / p.k_steepness]), p)[0]
    assert hi == pytest.approx(float(expit(10.0)), abs=1e-12)
    assert lo == pytest.approx(float(expit(-10.0)), abs=1e-12)


def test_modulation_monotone():
    p = AecParams(k_steepness=25.0)
    s = np.linspace(0.0, 1.0, 101)
    m = modulation(s, p)
    assert np.all(np.diff(m) > 0)
    assert np.all((m > 0) & (m < 1))


def test_erasure_strength_examples():
    p = AecParams(alpha_min=0.2, alpha_max=1.0)
    np.testing.assert_allclose(erasure_strength(np.array([0.5]), p), [0.6])
    np.testing.assert_allclose(
        erasure_strength(np.array([0.0, 1.0]), p), [0.2, 1.0]
    )
    flat = AecParams(alpha_min=0.4, alpha_max=0.4)
    np.testing.assert_allclose(
        erasure_strength(np.array([0.1, 0.9]), flat), [0.4, 0.4]
    )


def test_compute_gamma_orthogonal_rows():
    # all rows orthogonal to the span: S == 0 everywhere
    sub = axis_subspace(3, [0])
    rows = fm([[0, 1, 0], [0, 0, 1], [0, 2, 2]])
    t = AttentionTriple(rows, rows, rows)
    p = AecParams()
    gamma = compute_gamma(t, sub, p)
    expected = p.alpha_min + (p.alpha_max - p.alpha_min) * float(
        expit(-p.k_steepness * p.tau)
    )
    np.testing.assert_allclose(gamma, np.full(3, expected), atol=1e-12)


def test_compute_gamma_constant_rows():
    sub = axis_subspace(2, [0])
    rows = fm([[1.0, 0.5], [1.0, 0.5], [1.0, 0.5]])
    t = AttentionTriple(rows, rows, rows)
    gamma = compute_gamma(t, sub, AecParams())
    assert np.ptp(gamma) < 1e-15


def test_compute_gamma_max_token_ordering():
    # the dominant row saturates toward alpha_max; weaker rows order below
    sub = axis_subspace(2, [0])
    rows = fm([[4.0, 0.0], [1.0, 0.0], [0.5, 0.0]])
    t = AttentionTriple(rows, rows, rows)
    p = AecParams(k_steepness=30.0, tau=0.5)
    gamma = compute_gamma(t, sub, p)
    assert gamma[0] == pytest.approx(p.alpha_max, rel=1e-5)
    assert gamma[2] < gamma[1] < gamma[0]
    assert np.all((gamma >= p.alpha_min) & (gamma <= p.alpha_max))


def test_compute_gamma_permutation_equivariance():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n, d = 8, 4
        basis = np.linalg.qr(rng.standard_normal((d, 2)))[0]
        sub = Subspace(basis, np.array([2.0, 1.0]), "style", basis)
        q, k, v = rng.standard_normal((3, n, d))
        t = AttentionTriple(fm(q), fm(k), fm(v))
        gamma = compute_gamma(t, sub, AecParams())
        perm = rng.permutation(n)
        tp = AttentionTriple(fm(q[perm]), fm(k[perm]), fm(v[perm]))
        gp = compute_gamma(tp, sub, AecParams())
        np.testing.assert_allclose(gp, gamma[perm], atol=1e-12)


def test_compute_gamma_monotone_in_component_scores():
    # raising one row's K norm (below the max) cannot lower its gamma
    sub = axis_subspace(2, [0])
    base = np.array([[2.0, 0.0], [0.5, 0.0], [1.0, 0.0]])
    p = AecParams()
    prev = None
    for bump in (0.5, 0.9, 1.3, 1.7):
        k = base.copy()
        k[1, 0] = bump
        t = AttentionTriple(fm(base), fm(k), fm(base))
        g = compute_gamma(t, sub, p)[1]
        if prev is not None:
            assert g >= prev - 1e-12
        prev = g


def test_zero_weight_q_reduces_to_kv():
    p = AecParams(w_q=0.0, w_k=0.3, w_v=0.7)
    nq = np.array([0.9, 0.1])
    nk = np.array([0.4, 0.6])
    nv = np.array([0.2, 0.8])
    np.testing.assert_allclose(
        combine_scores(nq, nk, nv, p), 0.3 * nk + 0.7 * nv, atol=1e-12
    )


def test_aec_params_validation():
    with pytest.raises(ValidationError):
        AecParams(w_q=0.3, w_k=0.3, w_v=0.4)  # not strictly increasing
    with pytest.raises(ValidationError):
        AecParams(w_q=0.1, w_k=0.2, w_v=0.3)  # does not sum to 1
    with pytest.raises(ValidationError):
        AecParams(k_steepness=0.0)
    with pytest.raises(ValidationError):
        AecParams(tau=1.5)
    with pytest.raises(ValidationError):
        AecParams(alpha_min=0.8, alpha_max=0.5)
    with pytest.raises(ValidationError):
        AecParams(alpha_max=1.2)
