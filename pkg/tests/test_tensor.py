import numpy as np
import pytest

from occlearn.tensor import Rng, as_dense, elementwise_mul, rng_uniform


def test_elementwise_mul_identity_mask():
    assert elementwise_mul([1, 2, 3], [1, 1, 1]).tolist() == [1, 2, 3]


def test_elementwise_mul_full_occlusion():
    assert elementwise_mul([1, 2, 3], [0, 0, 0]).tolist() == [0, 0, 0]


def test_elementwise_mul_partial():
    assert elementwise_mul([2, 4], [0, 1]).tolist() == [0, 4]


def test_elementwise_mul_broadcasts_over_channels():
    img = np.arange(12, dtype=float).reshape(2, 2, 3)
    mask = np.array([[1.0, 0.0], [0.0, 1.0]])
    out = elementwise_mul(img, mask)
    assert out[0, 0].tolist() == [0, 1, 2]
    assert out[0, 1].tolist() == [0, 0, 0]
    assert out[1, 1].tolist() == [9, 10, 11]


def test_elementwise_mul_shape_mismatch_names_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(3, 2\)"):
        elementwise_mul(np.ones((2, 3)), np.ones((3, 2)))


def test_as_dense_rejects_nan():
    with pytest.raises(ValueError, match="non-finite"):
        as_dense([1.0, np.nan])


def test_rng_uniform_range_and_distinct_draws():
    rng = Rng(7)
    a = rng_uniform(rng, 0.0, 1.0)
    b = rng_uniform(rng, 0.0, 1.0)
    assert 0.0 <= a < 1.0 and 0.0 <= b < 1.0
    assert a != b


def test_rng_same_seed_same_sequence():
    r1, r2 = Rng(123), Rng(123)
    seq1 = [r1.uniform(0, 1) for _ in range(50)]
    seq2 = [r2.uniform(0, 1) for _ in range(50)]
    assert seq1 == seq2


def test_rng_uniform_mean_law_of_large_numbers():
    rng = Rng(2024)
    draws = rng.uniforms(0.0, 1.0, 100_000)
    assert abs(draws.mean() - 0.5) < 0.01


def test_rng_uniform_rejects_bad_bounds():
    with pytest.raises(ValueError):
        rng_uniform(Rng(0), 1.0, 1.0)
    with pytest.raises(ValueError):
        rng_uniform(Rng(0), 2.0, 1.0)


def test_rng_fork_is_deterministic_and_independent():
    r = Rng(5)
    c1 = r.fork(0)
    c2 = Rng(5).fork(0)
    assert [c1.uniform(0, 1) for _ in range(10)] == [c2.uniform(0, 1) for _ in range(10)]
    assert Rng(5).fork(1).uniform(0, 1) != Rng(5).fork(2).uniform(0, 1)


def test_rng_state_roundtrip_resumes_stream():
    r = Rng(42)
    r.uniform(0, 1)
    snapshot = r.state
    ahead = [r.uniform(0, 1) for _ in range(5)]
    restored = Rng(0).restore(snapshot)
    assert [restored.uniform(0, 1) for _ in range(5)] == ahead


def test_rng_state_is_json_serializable():
    import json

    s = json.dumps(Rng(99).state)
    assert "seed" in s
