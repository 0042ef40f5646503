import numpy as np
import pytest

from dice.edit import EraseParams
from dice.errors import ValidationError
from dice.subspace import fit_style_subspace
from dice.synthlab import PlantedSpec, generate_triplet, principal_angles

PARAMS = EraseParams(lam=1.0, epsilon_rel=0.05, r_style=4, r_content=4)


def test_planted_bases_mutually_orthogonal():
    for seed in range(5):
        _, spec = generate_triplet(
            PlantedSpec(64, 16, 3, 3, noise_sigma=0.0, seed=seed)
        )
        us, uc = spec.ground_truth_style, spec.ground_truth_content
        assert np.abs(us.T @ uc).max() < 1e-10
        np.testing.assert_allclose(us.T @ us, np.eye(3), atol=1e-10)
        np.testing.assert_allclose(uc.T @ uc, np.eye(3), atol=1e-10)


def test_noiseless_style_block_is_shared():
    t, spec = generate_triplet(PlantedSpec(64, 16, 3, 3, seed=2))
    us = spec.ground_truth_style
    diff = (t.anchor.data - t.positive.data) @ us
    assert np.abs(diff).max() < 1e-10
    # content block shared between anchor and negative
    uc = spec.ground_truth_content
    diff_c = (t.anchor.data - t.negative.data) @ uc
    assert np.abs(diff_c).max() < 1e-10


def test_generator_determinism():
    a, _ = generate_triplet(PlantedSpec(32, 8, 2, 2, noise_sigma=0.1, seed=7))
    b, _ = generate_triplet(PlantedSpec(32, 8, 2, 2, noise_sigma=0.1, seed=7))
    assert a.anchor.data.tobytes() == b.anchor.data.tobytes()
    assert a.positive.data.tobytes() == b.positive.data.tobytes()
    assert a.negative.data.tobytes() == b.negative.data.tobytes()
    c, _ = generate_triplet(PlantedSpec(32, 8, 2, 2, noise_sigma=0.1, seed=8))
    assert a.anchor.data.tobytes() != c.anchor.data.tobytes()


def test_identity_alignment_indices():
    t, _ = generate_triplet(PlantedSpec(32, 8, 2, 2, seed=0))
    np.testing.assert_array_equal(t.positive_indices, np.arange(32))
    np.testing.assert_array_equal(t.negative_indices, np.arange(32))
    assert t.anchor.tag == "synthetic"


def test_noiseless_recovery_is_exact():
    t, spec = generate_triplet(PlantedSpec(256, 32, 4, 4, seed=0))
    sub = fit_style_subspace(t, PARAMS)
    ang = principal_angles(sub.basis, spec.ground_truth_style)
    assert ang.max() < 1e-3


def test_coefficients_are_decorrelated():
    # centered anchor restricted to the planted frame has identity covariance
    t, spec = generate_triplet(PlantedSpec(128, 16, 3, 2, seed=5))
    frame = np.concatenate(
        [spec.ground_truth_style, spec.ground_truth_content], axis=1
    )
    coords = t.anchor.data @ frame
    assert np.abs(coords.mean(axis=0)).max() < 1e-12
    cov = coords.T @ coords / (128 - 1)
    np.testing.assert_allclose(cov, np.eye(5), atol=1e-10)


def test_recovery_error_grows_with_noise():
    sigmas = (0.0, 0.01, 0.05, 0.1)
    medians = []
    for sigma in sigmas:
        angles = []
        for seed in range(10):
            t, spec = generate_triplet(
                PlantedSpec(256, 32, 4, 4, noise_sigma=sigma, seed=seed)
            )
            sub = fit_style_subspace(t, PARAMS)
            angles.append(
                principal_angles(sub.basis, spec.ground_truth_style).max()
            )
        medians.append(float(np.median(angles)))
    assert medians[0] < 1e-6
    for lo, hi in zip(medians[:-1], medians[1:]):
        assert hi >= lo - 1e-9


def test_principal_angles_examples():
    e = np.eye(3)
    u0, u1 = e[:, :1], e[:, 1:2]
    assert principal_angles(u0, u0)[0] == pytest.approx(0.0, abs=1e-12)
    assert principal_angles(u0, u1)[0] == pytest.approx(np.pi / 2)
    mix = ((e[:, 0] + e[:, 1]) / np.sqrt(2)).reshape(3, 1)
    assert principal_angles(u0, mix)[0] == pytest.approx(np.pi / 4)


def test_principal_angles_symmetry_and_order():
    rng = np.random.default_rng(3)
    for _ in range(10):
        d = 8
        u = np.linalg.qr(rng.standard_normal((d, 3)))[0]
        v = np.linalg.qr(rng.standard_normal((d, 3)))[0]
        a = principal_angles(u, v)
        b = principal_angles(v, u)
        np.testing.assert_allclose(a, b, atol=1e-10)
        assert np.all(np.diff(a) >= -1e-12)
        assert np.all((a >= 0) & (a <= np.pi / 2 + 1e-12))


def test_principal_angles_requires_orthonormal():
    u = np.eye(3)[:, :2] * 2.0
    with pytest.raises(ValidationError):
        principal_angles(u, np.eye(3)[:, :2])


def test_spec_validation():
    with pytest.raises(ValidationError):
        PlantedSpec(64, 8, 5, 4)  # ranks exceed dim
    with pytest.raises(ValidationError):
        PlantedSpec(8, 16, 4, 4)  # too few tokens to decorrelate
    with pytest.raises(ValidationError):
        PlantedSpec(64, 16, 0, 4)
    with pytest.raises(ValidationError):
        PlantedSpec(64, 16, 4, 4, noise_sigma=-0.1)
