from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhtopo.errors import DegeneracyError, DimensionError, TrackingError
from nhtopo.model import (TWO_PI, BlockModel, builtin_FC, builtin_TEST, random_trigonometric)
from nhtopo.spectral import (SheetPath, best_matching, compose, discriminant2,
                             discriminant2_grid, eigenvalues,
                             inverse, is_identity, loop_path, monodromy, parity, power, track)

perms = st.integers(1, 6).flatmap(lambda n: st.permutations(list(range(n))))


def test_eigenvalue_residual_on_random_models(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 5))
        m = random_trigonometric(n, rng, sup_norm=float(rng.uniform(0.5, 3.0)))
        k = rng.uniform(0, TWO_PI, 2)
        h = m.evaluate(k)
        scale = max(1.0, np.linalg.norm(h, 2))
        for e in eigenvalues(m, k):
            assert abs(np.linalg.det(h - e * np.eye(n))) <= 1e-9 * scale


def test_discriminant_known_values():
    assert abs(discriminant2(builtin_TEST(0.5), (np.pi / 6, 0))) < 1e-15
    assert discriminant2(builtin_FC(1, 0), (0, np.pi)) == pytest.approx(-27)
    assert discriminant2(builtin_TEST(0.5), (np.pi / 2, np.pi / 2)) == pytest.approx(1.75 + 1j)
    with pytest.raises(DimensionError):
        discriminant2(BlockModel((builtin_FC(1, 0), 5.0)), (0, 0))


def test_discriminant_matches_eigenvalue_difference(rng):
    for _ in range(50):
        m = random_trigonometric(2, rng)
        k = rng.uniform(0, TWO_PI, 2)
        e = np.linalg.eigvals(m.evaluate(k))
        assert discriminant2(m, k) == pytest.approx(((e[0] - e[1]) / 2) ** 2, abs=1e-12)


@settings(max_examples=100)
@given(perms)
def test_permutation_group_laws(p):
    p = tuple(p)
    assert is_identity(compose(p, inverse(p)))
    assert is_identity(compose(inverse(p), p))
    assert power(p, 2) == compose(p, p)
    assert is_identity(power(p, 720))


@settings(max_examples=60)
@given(perms, perms)
def test_parity_is_a_homomorphism(p, q):
    if len(p) == len(q):
        assert parity(compose(tuple(p), tuple(q))) == (parity(tuple(p)) + parity(tuple(q))) % 2


@pytest.mark.parametrize("n", [3, 5, 7])
def test_best_matching_is_optimal(rng, n):
    for _ in range(5):
        a = rng.normal(size=n) + 1j * rng.normal(size=n)
        b = a + 0.3 * (rng.normal(size=n) + 1j * rng.normal(size=n))
        perm, _ = best_matching(a, b)
        cost = np.abs(a - b[perm]).sum()
        best = min(np.abs(a - b[list(q)]).sum() for q in itertools.permutations(range(n)))
        assert cost == pytest.approx(best)


def test_track_closure_examples():
    assert track(builtin_FC(0, 0), loop_path("x", 1.0, 64)).closure == (0, 1)
    assert track(builtin_FC(1, 0), loop_path("y", 1.0, 64)).closure == (1, 0)
    assert track(builtin_FC(1, 0), loop_path("x", 1.0, 64)).closure == (0, 1)
    assert monodromy(builtin_TEST(0.5), "x", np.pi / 2, 256) == (0, 1)


def test_open_path_has_identity_closure():
    path = np.stack([np.linspace(0, 1, 20), np.full(20, 1.0)], axis=1)
    sp = track(builtin_FC(1, 1), path)
    assert sp.closure == (0, 1) and not sp.closed


def test_tracking_through_an_ep_fails():
    path = np.stack([np.linspace(np.pi / 6 - 0.3, np.pi / 6 + 0.3, 7), np.zeros(7)], axis=1)
    with pytest.raises((TrackingError, DegeneracyError)):
        track(builtin_TEST(0.5), path)


def test_monodromy_refuses_loops_through_eps():
    with pytest.raises(DegeneracyError):
        monodromy(builtin_TEST(0.5), "x", 0.0, 256, eps=[(np.pi / 6, 0.0)])


def test_sheet_path_text_round_trip():
    sp = track(builtin_FC(1, 1), loop_path("x", 0.7, 32))
    back = SheetPath.from_text(sp.to_text())
    assert back.closure == sp.closure
    np.testing.assert_array_equal(back.strands, sp.strands)
    np.testing.assert_array_equal(back.k, sp.k)


def _ep_free_random(rng, n, count):
    out = []
    while len(out) < count:
        m = random_trigonometric(n, rng, sup_norm=2.0)
        try:
            monodromy(m, "x", 1.0, 256)
            monodromy(m, "y", 1.0, 256)
        except (TrackingError, DegeneracyError):
            continue
        out.append(m)
    return out


def _d_winding_parity(model, axis, offset, samples=4096):
    """Brute force: the arg of D along the sampled loop, on principal values only."""
    path = loop_path(axis, offset, samples)
    d = discriminant2_grid(model, path[:, 0], path[:, 1])
    turns = np.sum(np.angle(d[1:] / d[:-1])) / TWO_PI
    assert abs(turns - round(turns)) < 1e-9
    return int(round(turns)) % 2


def test_swap_iff_odd_discriminant_winding(rng):
    models = [builtin_FC(a, b) for a in (0, 1) for b in (0, 1)] + _ep_free_random(rng, 2, 20)
    swaps = 0
    for m in models:
        for axis in ("x", "y"):
            closure = monodromy(m, axis, 1.0, 512)
            odd = _d_winding_parity(m, axis, 1.0)
            assert (closure == (1, 0)) == bool(odd)
            swaps += odd
    assert swaps >= 4


def test_sample_doubling_keeps_closure(rng):
    for m in [builtin_FC(1, 1), builtin_FC(0, 1)] + _ep_free_random(rng, 3, 5):
        for axis in ("x", "y"):
            base = monodromy(m, axis, 1.0, 128)
            assert monodromy(m, axis, 1.0, 256) == base
            assert monodromy(m, axis, 1.0, 1024) == base


def test_loop_twice_and_reversed(rng):
    models = [builtin_FC(1, 0), BlockModel((builtin_FC(0, 1), 5.0))] + _ep_free_random(rng, 3, 5)
    for m in models:
        for axis in ("x", "y"):
            one = loop_path(axis, 1.0, 256)
            pi = track(m, one).closure
            twice = np.concatenate([one, one[1:] + (one[-1] - one[0])])
            assert track(m, twice).closure == power(pi, 2)
            assert track(m, one[::-1]).closure == inverse(pi)
