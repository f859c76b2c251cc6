"""The generator family is a documented recurrence; these tests pin it
bit-for-bit against an independent inline implementation."""

import math

import numpy as np

from gridres.prng import MASK64, Rng, fnv1a64, splitmix64

GAMMA = 0x9E3779B97F4A7C15


def _splitmix_oracle(state):
    # written out from the published reference, not from gridres.prng
    state = (state + GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, (z ^ (z >> 31)) & MASK64


def _xorshift_star_oracle(x):
    x ^= x >> 12
    x ^= (x << 25) & MASK64
    x ^= x >> 27
    return x & MASK64, (x * 0x2545F4914F6CDD1D) & MASK64


def test_splitmix64_reference_vector():
    # first output for seed 0, a published test vector of the algorithm
    _, out = splitmix64(0)
    assert out == 0xE220A8397B1DCDAF


def test_splitmix64_matches_oracle_stream():
    state = 12345
    mine = state
    for _ in range(200):
        state, want = _splitmix_oracle(state)
        mine, got = splitmix64(mine)
        assert got == want
        assert mine == state


def test_u64_matches_xorshift_oracle():
    rng = Rng(99)
    # reproduce the seeding rule: splitmix until a nonzero state appears
    sm, x = 99, 0
    while x == 0:
        sm, x = _splitmix_oracle(sm)
    for _ in range(500):
        x, want = _xorshift_star_oracle(x)
        assert rng.u64() == want


def test_same_seed_same_stream():
    a, b = Rng(7), Rng(7)
    assert [a.u64() for _ in range(50)] == [b.u64() for _ in range(50)]


def test_different_seeds_differ():
    a, b = Rng(7), Rng(8)
    assert [a.u64() for _ in range(8)] != [b.u64() for _ in range(8)]


def test_derive_is_stable_and_label_sensitive():
    root = Rng(42)
    assert root.derive("demand").u64() == Rng(42).derive("demand").u64()
    assert root.derive("demand").u64() != root.derive("solar").u64()


def test_derive_ignores_parent_position():
    # substreams hang off the seed material, not the current state
    a = Rng(3)
    a.u64()
    a.u64()
    assert a.derive("x").u64() == Rng(3).derive("x").u64()


def test_fnv1a64_known_values():
    # standard FNV-1a test vectors
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C


def test_u01_range_and_construction():
    rng = Rng(1)
    probe = Rng(1)
    for _ in range(1000):
        want = (probe.u64() >> 11) * 2.0**-53
        got = rng.u01()
        assert got == want
        assert 0.0 <= got < 1.0


def test_below_is_modulo_of_stream():
    rng, probe = Rng(5), Rng(5)
    for _ in range(100):
        assert rng.below(17) == probe.u64() % 17


def test_normal_moments():
    zs = Rng(2024).normals(4000)
    assert abs(zs.mean()) < 0.08
    assert abs(zs.std() - 1.0) < 0.08


def test_normal_pairs_match_box_muller():
    rng, probe = Rng(6), Rng(6)
    u1 = ((probe.u64() >> 11) + 1) * 2.0**-53
    u2 = (probe.u64() >> 11) * 2.0**-53
    r = math.sqrt(-2.0 * math.log(u1))
    assert rng.normal() == r * math.cos(2.0 * math.pi * u2)
    assert rng.normal() == r * math.sin(2.0 * math.pi * u2)


def test_uniforms_shape_and_bounds():
    xs = Rng(3).uniforms(256, 2.0, 5.0)
    assert xs.shape == (256,)
    assert np.all(xs >= 2.0) and np.all(xs < 5.0)
