from __future__ import annotations

import numpy as np
import pytest

from nhtopo.model import builtin_FC, random_trigonometric
from nhtopo.topology import locate_eps

FC_STATES = [(0, 0), (1, 0), (0, 1), (1, 1)]
# measured (m_x, m_y) for FC(a, b) under the literal loop convention
FC_CLASS = {(a, b): (b, a) for a, b in FC_STATES}


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture(params=FC_STATES, ids=lambda ab: f"FC{ab[0]}{ab[1]}")
def fc_state(request):
    return request.param, builtin_FC(*request.param)


def random_ep_free(rng: np.random.Generator, count: int, max_norm: float = 0.5) -> list:
    """EP-free random 2-band trigonometric models: an FC state plus a random Bloch sum.

    Fully random sums almost always carry EPs, so the ensemble starts from a
    gapped state and rejects draws that acquire EPs on a 64x64 search.
    """
    out = []
    for _ in range(50 * count):
        a, b = (int(x) for x in rng.integers(0, 2, 2))
        m = builtin_FC(a, b) + random_trigonometric(2, rng, sup_norm=float(
            rng.uniform(0.1, max_norm)), reach=2)
        if not locate_eps(m, (64, 64)):
            out.append(m)
            if len(out) == count:
                return out
    raise RuntimeError("could not draw enough EP-free models")


ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def record(number: int, name: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE[number] = (name, bool(ok), detail)
    print(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}  {detail}")
