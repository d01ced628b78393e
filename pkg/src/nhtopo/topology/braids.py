"""Eigenvalue braid words along non-contractible loops."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegeneracyError, NumericalError, TrackingError
from ..model import BlochModel
from ..spectral import (DEFAULT_TRACK, TrackOptions, best_matching, eigenvalues, loop_path,
                        track)


@dataclass(frozen=True)
class BraidWord:
    """Signed generators: +i is sigma_i, -i its inverse (1-based positions in Re order).

    ``start`` is the loop's base coordinate along ``axis``; ``strand_order`` lists
    the track() strand labels by ascending Re at the base point.
    """

    generators: tuple[int, ...]
    axis: str
    offset: float
    start: float
    strand_order: tuple[int, ...]

    def __len__(self):
        return len(self.generators)

    def permutation(self) -> tuple:
        """Induced sheet permutation in track() labels (same convention as closure)."""
        order = list(self.strand_order)
        for g in self.generators:
            i = abs(g) - 1
            order[i], order[i + 1] = order[i + 1], order[i]
        # strand order[p] ends where strand_order[p] started
        out = [0] * len(order)
        for p, s in enumerate(order):
            out[s] = self.strand_order[p]
        return tuple(out)

    def to_dict(self) -> dict:
        return {"generators": list(self.generators), "axis": self.axis, "offset": self.offset,
                "start": self.start, "strand_order": list(self.strand_order),
                "permutation": list(self.permutation())}

    @classmethod
    def from_dict(cls, d) -> "BraidWord":
        return cls(tuple(int(g) for g in d["generators"]), d["axis"], float(d["offset"]),
                   float(d["start"]), tuple(int(s) for s in d["strand_order"]))


def _re_order(values):
    return list(np.lexsort((values.imag, values.real)))


def _crossings(model, ka, kb, va, vb, order, depth, max_depth, tol):
    """Adjacent transpositions of ``order`` between two labelled samples."""
    re_b = vb.real
    inversions = [i for i in range(len(order) - 1) if re_b[order[i]] > re_b[order[i + 1]]]
    n_inv = sum(1 for i in range(len(order)) for j in range(i + 1, len(order))
                if re_b[order[i]] > re_b[order[j]])
    if n_inv == 0:
        return []
    if n_inv == 1:
        i = inversions[0]
        lower, upper = order[i], order[i + 1]
        dim = (va[upper] - va[lower]).imag
        if abs(dim) <= tol:
            raise DegeneracyError(
                f"simultaneous Re and Im degeneracy between strands {lower} and {upper} "
                f"near k=({ka[0]:.6g}, {ka[1]:.6g})", k=tuple(ka))
        order[i], order[i + 1] = upper, lower
        return [(i + 1) * (1 if dim > 0 else -1)]
    if depth >= max_depth:
        raise DegeneracyError(f"cannot separate braid crossings near k=({ka[0]:.6g}, {ka[1]:.6g})",
                              k=tuple(ka))
    km = 0.5 * (ka + kb)
    em = eigenvalues(model, km)
    perm, _ = best_matching(va, em)
    vm = em[perm]
    word = _crossings(model, ka, km, va, vm, order, depth + 1, max_depth, tol)
    word += _crossings(model, km, kb, vm, vb, order, depth + 1, max_depth, tol)
    return word


def braid_word(model: BlochModel, axis: str, offset: float, samples: int = 512, *,
               start: float | None = None, options: TrackOptions = DEFAULT_TRACK,
               max_depth: int = 30) -> BraidWord:
    """Braid word of the eigenvalue strands along the loop where k_axis varies.

    Crossing convention: when Re of adjacent strands at positions i, i+1 swap,
    emit +i if the strand with larger Re before the crossing also has the larger
    Im, else -i. The loop is traversed in the positive k_axis direction. When
    ``start`` is None the base point is moved off any real-part degeneracy.
    The word's permutation is checked against the tracked monodromy.
    """
    if start is None:
        base = loop_path(axis, offset, samples)
        ev = np.sort_complex(np.array([eigenvalues(model, k) for k in base[:-1]]))
        re = np.sort(ev.real, axis=1)
        sep = np.diff(re, axis=1).min(axis=1)
        scale = max(1.0, float(np.abs(ev).max()))
        j = 0 if sep[0] > 1e-6 * scale else int(np.argmax(sep))
        start = float(base[j, 0] if axis == "x" else base[j, 1])
    try:
        sp = track(model, loop_path(axis, offset, samples, start), options)
    except TrackingError as exc:
        # sheets that cannot be told apart on the loop: it runs through (or next to) an EP
        raise DegeneracyError(f"braid loop {axis}@{offset:.6g} meets a degeneracy: {exc}",
                              k=None) from exc
    strands = sp.strands
    order = _re_order(strands[0])
    strand_order = tuple(int(s) for s in order)
    scale = max(1.0, float(np.abs(strands).max()))
    tol = 1e-12 * scale
    word = []
    for j in range(len(strands) - 1):
        word += _crossings(model, sp.k[j], sp.k[j + 1], strands[j], strands[j + 1], order,
                           0, max_depth, tol)
    bw = BraidWord(tuple(word), axis, float(offset), float(start), strand_order)
    if bw.permutation() != sp.closure:
        raise NumericalError(f"braid permutation {bw.permutation()} disagrees with monodromy "
                             f"{sp.closure} on loop {axis}@{offset:.6g}")
    return bw
