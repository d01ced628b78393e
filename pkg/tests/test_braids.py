from __future__ import annotations

import numpy as np
import pytest

from conftest import FC_STATES, random_ep_free
from nhtopo.model import TWO_PI, BlockModel, builtin_FA, builtin_FC
from nhtopo.spectral import discriminant2_grid, loop_path, monodromy
from nhtopo.topology import BraidWord, braid_word


def d_winding(model, axis, offset, samples=4096) -> int:
    path = loop_path(axis, offset, samples)
    d = discriminant2_grid(model, path[:, 0], path[:, 1])
    return int(round(np.sum(np.angle(d[1:] / d[:-1])) / TWO_PI))


def test_fc11_braid_is_odd():
    bw = braid_word(builtin_FC(1, 1), "x", 2.0, 512)
    assert len(bw) % 2 == 1
    assert bw.permutation() == (1, 0)


def test_trivial_braids():
    assert braid_word(builtin_FC(0, 0), "x", 1.0).generators == ()
    # the snapping arc touches Re bands tangentially: no crossing, no cut
    assert braid_word(builtin_FA(0.0), "x", 1.0).generators == ()


@pytest.mark.parametrize("ab", FC_STATES)
def test_braid_parity_matches_class(ab):
    a, b = ab
    m = builtin_FC(a, b)
    assert len(braid_word(m, "x", 0.8)) % 2 == b
    assert len(braid_word(m, "y", 0.8)) % 2 == a


def test_exponent_sum_equals_discriminant_winding(rng):
    models = [builtin_FC(*ab) for ab in FC_STATES] + random_ep_free(rng, 12, 1.0)
    for m in models:
        for axis in ("x", "y"):
            off = float(rng.uniform(0, TWO_PI))
            bw = braid_word(m, axis, off, 512)
            assert int(np.sum(np.sign(bw.generators))) == d_winding(m, axis, off)


def test_word_permutation_equals_monodromy_on_three_bands(rng):
    m = BlockModel((builtin_FC(1, 1), 0.3))
    for _ in range(6):
        axis = "x" if rng.random() < 0.5 else "y"
        off = float(rng.uniform(0, TWO_PI))
        bw = braid_word(m, axis, off, 512)
        assert bw.permutation() == monodromy(m, axis, off, 512, start=bw.start)
        assert all(1 <= abs(g) <= 2 for g in bw.generators)


def test_braid_round_trip():
    bw = braid_word(builtin_FC(1, 1), "y", 0.4)
    assert BraidWord.from_dict(bw.to_dict()) == bw
