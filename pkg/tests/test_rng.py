import numpy as np
import pytest

from broyden_lab.rng import RNG_IDENTITY, make_rng


def test_streams_reproducible():
    a = make_rng(7, 1).standard_normal(5)
    b = make_rng(7, 1).standard_normal(5)
    np.testing.assert_array_equal(a, b)


def test_streams_independent():
    assert not np.array_equal(make_rng(7, 1).standard_normal(5), make_rng(7, 2).standard_normal(5))


def test_identity_names_generator():
    assert "PCG64" in RNG_IDENTITY


def test_negative_seed():
    with pytest.raises(ValueError):
        make_rng(-1)
