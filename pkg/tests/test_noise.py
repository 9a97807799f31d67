import numpy as np
import pytest

from inaad import (
    PyramidParams,
    SimplexParams,
    sample_gaussian,
    sample_pyramid,
    sample_simplex,
    make_sampler,
)
from oracles import lag1_autocorr

SAMPLERS = {
    "gaussian": lambda h, w, s: sample_gaussian(h, w, s),
    "pyramid": lambda h, w, s: sample_pyramid(h, w, s),
    "simplex": lambda h, w, s: sample_simplex(h, w, s),
}


@pytest.mark.parametrize("kind", SAMPLERS)
def test_same_seed_is_bit_identical(kind):
    a = SAMPLERS[kind](96, 64, 1234)
    b = SAMPLERS[kind](96, 64, 1234)
    assert a.shape == (96, 64)
    assert np.array_equal(a, b)
    c = SAMPLERS[kind](96, 64, 1235)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("kind", SAMPLERS)
def test_fields_are_finite(kind):
    f = SAMPLERS[kind](64, 64, 7)
    assert np.all(np.isfinite(f))


def test_gaussian_large_sample_statistics():
    f = sample_gaussian(1024, 1024, 99)
    n = f.size
    assert abs(f.mean()) < 4.0 / np.sqrt(n)  # CLT bound, well inside +-0.01
    assert abs(f.var() - 1.0) < 0.02


@pytest.mark.parametrize("kind", ["pyramid", "simplex"])
def test_structured_fields_are_standardized(kind):
    f = SAMPLERS[kind](256, 256, 5)
    assert abs(f.mean()) < 1e-12
    assert abs(f.std() - 1.0) < 1e-12


def test_pyramid_single_level_is_standardized_gaussian():
    seed = 31
    g = sample_gaussian(64, 48, seed)
    expected = (g - g.mean()) / g.std()
    p = sample_pyramid(64, 48, seed, PyramidParams(levels=1))
    assert np.allclose(p, expected, atol=1e-12)


def test_pyramid_more_correlated_than_gaussian():
    diffs = [
        lag1_autocorr(sample_pyramid(256, 256, s))
        - lag1_autocorr(sample_gaussian(256, 256, s))
        for s in range(10)
    ]
    assert np.mean(diffs) > 0.1
    assert all(d > 0.0 for d in diffs)


def test_correlation_ordering_simplex_pyramid_gaussian():
    # Full 100-seed version runs in the acceptance suite; this is the same
    # check at reduced seed count.
    wins = 0
    for s in range(25):
        g = lag1_autocorr(sample_gaussian(256, 256, s))
        p = lag1_autocorr(sample_pyramid(256, 256, s))
        x = lag1_autocorr(sample_simplex(256, 256, s))
        wins += x > p > g
    assert wins >= 24


def test_non_square_and_tiny_fields():
    for kind, fn in SAMPLERS.items():
        f = fn(1, 7, 3)
        assert f.shape == (1, 7)
        assert np.all(np.isfinite(f))
    assert sample_pyramid(1, 1, 0).shape == (1, 1)


@pytest.mark.parametrize("kind", SAMPLERS)
def test_rejects_zero_dimensions(kind):
    with pytest.raises(ValueError):
        SAMPLERS[kind](0, 8, 1)
    with pytest.raises(ValueError):
        SAMPLERS[kind](8, 0, 1)


def test_param_validation():
    with pytest.raises(ValueError):
        PyramidParams(levels=0)
    with pytest.raises(ValueError):
        PyramidParams(scale=0.0)
    with pytest.raises(ValueError):
        SimplexParams(start_frequency=0.0)
    with pytest.raises(ValueError):
        SimplexParams(octaves=0)
    with pytest.raises(ValueError):
        SimplexParams(decay=1.5)


def test_make_sampler_binds_parameters():
    sampler = make_sampler("pyramid", pyramid=PyramidParams(levels=1))
    assert np.array_equal(sampler(16, 16, 2),
                          sample_pyramid(16, 16, 2, PyramidParams(levels=1)))
    with pytest.raises(ValueError):
        make_sampler("white")


def test_simplex_octaves_change_the_field():
    one = sample_simplex(64, 64, 9, SimplexParams(octaves=1))
    six = sample_simplex(64, 64, 9, SimplexParams(octaves=6))
    assert not np.allclose(one, six)
    # Fewer octaves means smoother fields.
    assert lag1_autocorr(one) > lag1_autocorr(six)
