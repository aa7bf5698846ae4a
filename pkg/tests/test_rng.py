import numpy as np

from vqcnir.rng import Rng


def test_same_seed_same_stream():
    a = Rng(42).uniform((100,))
    b = Rng(42).uniform((100,))
    assert np.array_equal(a, b)


def test_counter_stream_is_chunking_invariant():
    r1 = Rng(7)
    first = r1.uniform((10,))
    second = r1.uniform((6,))
    r2 = Rng(7)
    both = r2.uniform((16,))
    assert np.array_equal(np.concatenate([first, second]), both)


def test_split_children_differ_and_are_stable():
    root = Rng(3)
    a1 = root.split(1).uniform((50,))
    b1 = root.split(2).uniform((50,))
    a2 = Rng(3).split(1).uniform((50,))
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, b1)


def test_uniform_range_and_normal_moments():
    u = Rng(11).uniform((20000,), -2.0, 5.0)
    assert u.min() >= -2.0 and u.max() < 5.0
    z = Rng(12).normal((20000,))
    assert abs(z.mean()) < 0.05
    assert abs(z.std() - 1.0) < 0.05


def test_integers_bounds():
    v = Rng(5).integers(10000, 7)
    assert v.min() >= 0 and v.max() <= 6
    assert len(np.unique(v)) == 7


def test_shuffle_is_permutation():
    idx = Rng(9).shuffle_indices(50)
    assert sorted(idx.tolist()) == list(range(50))
