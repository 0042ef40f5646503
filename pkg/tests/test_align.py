import numpy as np
import pytest

from dice.align import (
    AlignedTriplet,
    align_to_anchor,
    align_triplet,
    cosine_similarity_matrix,
)
from dice.errors import ValidationError
from dice.tensor_io import FeatureMatrix


def fm(rows, tag=""):
    return FeatureMatrix(np.asarray(rows, dtype=np.float64), tag=tag)


def test_cosine_orthonormal_rows():
    sim = cosine_similarity_matrix(fm([[1, 0], [0, 1]]), fm([[0, 1], [1, 0]]))
    np.testing.assert_allclose(sim, [[0, 1], [1, 0]], atol=1e-12)


def test_cosine_self_identity():
    a = fm([[1, 0], [0, 1]])
    np.testing.assert_allclose(
        cosine_similarity_matrix(a, a), np.eye(2), atol=1e-12
    )


def test_cosine_known_angle():
    sim = cosine_similarity_matrix(fm([[1, 1], [2, 2]]), fm([[1, 0], [0, 1]]))
    np.testing.assert_allclose(sim, np.full((2, 2), np.sqrt(0.5)), atol=1e-6)


def test_cosine_zero_row_maps_to_zero():
    sim = cosine_similarity_matrix(fm([[0, 0], [1, 0]]), fm([[1, 0], [0, 1]]))
    np.testing.assert_array_equal(sim[0], [0.0, 0.0])
    np.testing.assert_allclose(sim[1], [1.0, 0.0], atol=1e-12)


def test_cosine_bounds():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n, d = rng.integers(2, 9, size=2)
        sim = cosine_similarity_matrix(
            fm(rng.standard_normal((n, d))), fm(rng.standard_normal((n, d)))
        )
        assert np.all(sim <= 1.0 + 1e-12) and np.all(sim >= -1.0 - 1e-12)


def test_align_swapped_rows():
    aligned, idx = align_to_anchor(fm([[1, 0], [0, 1]]), fm([[0, 1], [1, 0]]))
    np.testing.assert_array_equal(aligned.data, [[1, 0], [0, 1]])
    np.testing.assert_array_equal(idx, [1, 0])


def test_align_self_identity():
    a = fm([[1.0, 0.2], [0.1, 1.0], [-1.0, 0.5]])
    aligned, idx = align_to_anchor(a, a)
    np.testing.assert_array_equal(idx, [0, 1, 2])
    np.testing.assert_array_equal(aligned.data, a.data)


def test_align_tie_keeps_lowest_index():
    _, idx = align_to_anchor(fm([[1, 0], [1, 0]]), fm([[1, 0], [1, 0]]))
    np.testing.assert_array_equal(idx, [0, 0])


def test_align_planted_permutation():
    # rows with distinct directions recover exactly under a known shuffle
    rng = np.random.default_rng(5)
    for _ in range(10):
        n, d = int(rng.integers(3, 12)), int(rng.integers(2, 8))
        anchor = rng.standard_normal((n, d)) + 3.0 * np.eye(n, d)
        perm = rng.permutation(n)
        aligned, idx = align_to_anchor(fm(anchor), fm(anchor[perm]))
        np.testing.assert_array_equal(aligned.data, anchor)
        np.testing.assert_array_equal(perm[idx], np.arange(n))


def test_align_row_scale_invariance():
    # positive rescaling of candidate rows cannot change the selection
    rng = np.random.default_rng(9)
    for _ in range(10):
        n, d = int(rng.integers(2, 10)), int(rng.integers(2, 6))
        anchor, other = rng.standard_normal((2, n, d))
        _, idx = align_to_anchor(fm(anchor), fm(other))
        scales = rng.uniform(0.1, 10.0, size=(n, 1))
        _, idx2 = align_to_anchor(fm(anchor), fm(other * scales))
        np.testing.assert_array_equal(idx, idx2)


def test_align_membership():
    rng = np.random.default_rng(13)
    anchor, other = rng.standard_normal((2, 6, 4))
    aligned, idx = align_to_anchor(fm(anchor), fm(other))
    assert idx.shape == (6,)
    assert np.all((idx >= 0) & (idx < 6))
    np.testing.assert_array_equal(aligned.data, other[idx])


def test_align_triplet_identity_when_equal():
    rows = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
    t = align_triplet(fm(rows, "a"), fm(rows, "p"), fm(rows, "n"))
    np.testing.assert_array_equal(t.positive_indices, [0, 1, 2])
    np.testing.assert_array_equal(t.negative_indices, [0, 1, 2])
    assert t.positive.tag == "p" and t.negative.tag == "n"


def test_align_shape_mismatch():
    with pytest.raises(ValidationError):
        cosine_similarity_matrix(fm([[1, 0]]), fm([[1, 0, 0]]))
    with pytest.raises(ValidationError):
        align_to_anchor(fm([[1, 0], [0, 1]]), fm([[1, 0]]))


def test_aligned_triplet_validation():
    a = fm([[1.0, 0.0], [0.0, 1.0]])
    good = np.array([0, 1])
    with pytest.raises(ValidationError):
        AlignedTriplet(a, a, fm([[1.0, 0.0]]), good, good)
    with pytest.raises(ValidationError):
        AlignedTriplet(a, a, a, np.array([0, 2]), good)
    t = AlignedTriplet(a, a, a, good, good)
    assert t.anchor.n_tokens == 2
