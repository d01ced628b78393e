"""Monodromy invariants of EP-free spectra and their classification."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from math import comb

import numpy as np

from ..errors import DomainError
from ..model import BlochModel
from ..spectral import compose, monodromy, power
from .exceptional import ExceptionalPoint, locate_eps

AXES = ("x", "y")
DEFAULT_BASE = (1.0, 1.0)


def pair_bit(perm, p: int, q: int) -> int:
    """1 iff sheet p lies on the orbit pi^j(q), j = 1..n-1 (sheets connected along the loop)."""
    n = len(perm)
    hits = sum(1 for j in range(1, n) if power(perm, j)[q] == p)
    return 0 if hits == 0 else 1


def m_matrix(perm) -> np.ndarray:
    """Pairwise connectivity bits; the diagonal is left at 0."""
    n = len(perm)
    m = np.zeros((n, n), dtype=int)
    for p in range(n):
        for q in range(n):
            if p != q:
                m[p, q] = pair_bit(perm, p, q)
    return m


def two_band_bit(perm) -> int:
    """m = 1 when the loop exchanges the two sheets, 0 when it returns each to itself."""
    if len(perm) != 2:
        raise DomainError("the two-band invariant needs a permutation of two sheets")
    return 0 if perm[0] == 0 else 1


@dataclass
class InvariantReport:
    pi_x: tuple | None
    pi_y: tuple | None
    m: dict | None                  # axis -> (n, n) bit matrix
    eps: list[ExceptionalPoint]
    ground_state: bool
    class_label: tuple | None
    bands: int
    base: tuple[float, float] = DEFAULT_BASE
    samples: int = 512
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": "nhtopo.invariant-report/1",
            "bands": self.bands,
            "ground_state": self.ground_state,
            "class": None if self.class_label is None else list(self.class_label),
            "pi_x": None if self.pi_x is None else list(self.pi_x),
            "pi_y": None if self.pi_y is None else list(self.pi_y),
            "m": None if self.m is None else {a: self.m[a].tolist() for a in AXES},
            "base": list(self.base),
            "samples": self.samples,
            "eps": [e.to_dict() for e in self.eps],
            "diagnostics": list(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, d) -> "InvariantReport":
        m = d.get("m")
        return cls(
            None if d["pi_x"] is None else tuple(d["pi_x"]),
            None if d["pi_y"] is None else tuple(d["pi_y"]),
            None if m is None else {a: np.array(m[a], dtype=int) for a in AXES},
            [ExceptionalPoint.from_dict(e) for e in d["eps"]],
            bool(d["ground_state"]),
            None if d["class"] is None else tuple(d["class"]),
            int(d["bands"]), tuple(d.get("base", DEFAULT_BASE)), int(d.get("samples", 512)),
            list(d.get("diagnostics", [])))

    def summary(self) -> str:
        label = "none" if self.class_label is None else \
            "(" + ",".join(str(b) for b in self.class_label) + ")"
        return (f"class={label} ground_state={'true' if self.ground_state else 'false'} "
                f"eps={len(self.eps)}")


def invariants(model: BlochModel, offsets=DEFAULT_BASE, samples: int = 512, *,
               grid=(64, 64), eps: list[ExceptionalPoint] | None = None) -> InvariantReport:
    """Monodromy invariants, defined only for spectra without EPs.

    Both loops start at the base point ``offsets = (kx0, ky0)``: the x-loop runs
    along kx at ky = ky0, the y-loop along ky at kx = kx0, so sheet labels
    (ascending Re, Im at the base point) are shared between the two.
    """
    diagnostics = []
    if eps is None:
        eps = locate_eps(model, grid, notes=diagnostics)
    kx0, ky0 = float(offsets[0]), float(offsets[1])
    if eps:
        diagnostics.append({"kind": "excited",
                            "message": f"{len(eps)} EPs present; invariants undefined"})
        return InvariantReport(None, None, None, list(eps), False, None, model.bands,
                               (kx0, ky0), samples, diagnostics)
    pi_x = monodromy(model, "x", ky0, samples, start=kx0)
    pi_y = monodromy(model, "y", kx0, samples, start=ky0)
    m = {"x": m_matrix(pi_x), "y": m_matrix(pi_y)}
    label = None
    if model.bands == 2:
        label = (two_band_bit(pi_x), two_band_bit(pi_y))
    if compose(pi_x, pi_y) != compose(pi_y, pi_x):
        diagnostics.append({"kind": "non-commuting",
                            "message": "pi_x and pi_y do not commute; an EP was likely missed"})
    return InvariantReport(pi_x, pi_y, m, [], True, label, model.bands, (kx0, ky0), samples,
                           diagnostics)


@dataclass
class Classification:
    state: str                      # "ground" or "excited"
    label: tuple | None             # (m_x, m_y) for two bands
    pair_bits: dict | None          # (p, q) -> (m_x^pq, m_y^pq), p < q
    excitations: dict | None

    def to_dict(self) -> dict:
        return {
            "state": self.state,
            "label": None if self.label is None else list(self.label),
            "pair_bits": None if self.pair_bits is None else
            [{"p": p, "q": q, "m_x": b[0], "m_y": b[1]} for (p, q), b in self.pair_bits.items()],
            "excitations": self.excitations,
        }


def classify(report: InvariantReport) -> Classification:
    if not report.ground_state:
        charges = [e.charge for e in report.eps]
        known = [c for c in charges if c is not None]
        orders = Counter(e.order for e in report.eps)
        content = {
            "count": len(report.eps),
            "orders": {str(k): v for k, v in sorted(orders.items())},
            "charges": charges,
            "total_charge": float(sum(known)) if len(known) == len(charges) else None,
        }
        return Classification("excited", None, None, content)
    n = report.bands
    bits = {(p, q): (int(report.m["x"][p, q]), int(report.m["y"][p, q]))
            for p in range(n) for q in range(p + 1, n)}
    return Classification("ground", report.class_label, bits, None)


def excitation_type_count(n: int) -> int:
    """Number of EP types in an n-band spectrum: sum_{j>=2} C(n, j) = 2^n - (n+1)."""
    if n < 2:
        raise DomainError(f"excitation types need n >= 2 bands, got {n}")
    closed = 2 ** n - (n + 1)
    by_sum = sum(comb(n, j) for j in range(2, n + 1))
    assert closed == by_sum
    return closed


def classification_order(n: int) -> int:
    """Number m = n(n-1)/2 of sheet pairs, each carrying a Z2 x Z2 bit pair."""
    return n * (n - 1) // 2
