import numpy as np
import pytest

from qtc.core import SeedPath
from qtc.rotation import (
    SignDiagonal,
    fwht,
    pad_to_pow2,
    rotate,
    sample_signs,
    unrotate,
)


def naive_hadamard(d):
    return np.array(
        [[(-1.0) ** bin(i & j).count("1") for j in range(d)] for i in range(d)]
    )


def test_h2_rows():
    sd = SignDiagonal(np.ones(2), 2)
    assert np.allclose(rotate(np.array([1.0, 0.0]), sd), [1 / np.sqrt(2)] * 2)
    assert np.allclose(rotate(np.array([1.0, 1.0]), sd), [np.sqrt(2), 0.0])


def test_non_pow2_rejected():
    rng = SeedPath(0).stream()
    with pytest.raises(ValueError):
        sample_signs(rng, 3)
    with pytest.raises(ValueError):
        SignDiagonal(np.ones(5), 5)


def test_double_application_is_identity():
    sd = sample_signs(SeedPath(1).stream(), 16)
    y = SeedPath(2).stream().normal(size=16)
    assert np.allclose(sd.signs * (sd.signs * y), y)


def test_sign_mean():
    rng = SeedPath(3).stream()
    signs = rng.integers(0, 2, size=10**6) * 2.0 - 1.0
    assert abs(signs.mean()) < 0.01


@pytest.mark.parametrize("d", [2, 4, 8, 16])
def test_matches_naive_matrix(d):
    sd = sample_signs(SeedPath(d).stream(), d)
    R = naive_hadamard(d) @ np.diag(sd.signs) / np.sqrt(d)
    y = SeedPath(d + 100).stream().normal(size=d)
    assert np.allclose(rotate(y, sd), R @ y, atol=1e-12)
    assert np.allclose(unrotate(rotate(y, sd), sd), np.linalg.solve(R, R @ y), atol=1e-9)


def test_norm_preserved_d256():
    sd = sample_signs(SeedPath(7).stream(), 256)
    y = SeedPath(8).stream().normal(size=256)
    assert abs(np.linalg.norm(rotate(y, sd)) - np.linalg.norm(y)) < 1e-9 * np.linalg.norm(y)


def test_unrotate_inverts():
    sd = sample_signs(SeedPath(9).stream(), 8)
    y = SeedPath(10).stream().normal(size=8)
    assert np.allclose(unrotate(rotate(y, sd), sd), y, atol=1e-9)
    e1 = np.zeros(8)
    e1[0] = 1.0
    assert np.allclose(unrotate(rotate(e1, sd), sd), e1, atol=1e-12)


def test_dimension_mismatch():
    sd = sample_signs(SeedPath(11).stream(), 8)
    with pytest.raises(ValueError):
        rotate(np.ones(4), sd)
    with pytest.raises(ValueError):
        unrotate(np.ones(16), sd)


def test_pad_to_pow2():
    padded, n = pad_to_pow2(np.array([1.0, 2.0, 3.0]))
    assert n == 3 and padded.shape == (4,) and padded[3] == 0.0
    same, n4 = pad_to_pow2(np.arange(4.0))
    assert n4 == 4 and np.array_equal(same, np.arange(4.0))
    y5 = SeedPath(12).stream().normal(size=5)
    p5, _ = pad_to_pow2(y5)
    assert np.isclose(np.linalg.norm(p5), np.linalg.norm(y5))


def test_subgaussian_tail_witness():
    # after rotation each coordinate is subgaussian with variance factor B^2/d
    d, trials = 64, 100_000
    rng = SeedPath(13).stream()
    y = rng.normal(size=d)
    y /= np.linalg.norm(y)  # B = 1
    B = 1.0
    signs = rng.integers(0, 2, size=(trials, d)) * 2.0 - 1.0
    coord = fwht(signs * y)[:, 3] / np.sqrt(d)
    for mult in (1.0, 2.0, 3.0):
        M = mult * B / np.sqrt(d)
        emp = np.mean(np.abs(coord) >= M)
        assert emp <= 2 * np.exp(-d * M**2 / (2 * B**2)) + 0.01
