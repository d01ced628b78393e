"""Fermi arcs and imaginary Fermi arcs as polylines on the torus.

Two bands: marching squares on the zero level of Im D, keeping pieces with
Re D <= 0 (real-part degeneracy, Delta-eps purely imaginary) or Re D >= 0
(imaginary-part degeneracy). Edge crossings are refined by root bracketing on
the model itself. Pieces are chained across the periodic boundary by shared
grid-edge identity, which also gives each closed curve its homotopy class.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ..errors import ConfigurationError
from ..model import TWO_PI, BlochModel, MomentumPoint, reduce_angle, torus_distance, wrap_delta
from ..spectral import best_matching, discriminant2_grid, eigvals_of
from .exceptional import ExceptionalPoint, ep_field, locate_eps, newton_refine

KINDS = ("real", "imaginary")

# corner offsets c0..c3 and the corner pair of each edge e0..e3
_CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))
_EDGES = ((0, 1), (1, 2), (3, 2), (0, 3))
_CORNER_EDGES = ((0, 3), (0, 1), (1, 2), (2, 3))


@dataclass
class DegeneracyContour:
    kind: str
    points: np.ndarray          # (m, 2) lifted coordinates
    closed: bool
    winding: tuple[int, int]
    bands: tuple[int, int] = (0, 1)
    endpoints: tuple | None = None
    flagged: bool = False

    @property
    def contractible(self) -> bool:
        return not (self.closed and self.winding != (0, 0))

    def to_dict(self) -> dict:
        ends = None
        if self.endpoints is not None:
            ends = [None if e is None else e.to_dict() for e in self.endpoints]
        return {"kind": self.kind, "closed": self.closed, "contractible": self.contractible,
                "winding": list(self.winding), "bands": list(self.bands),
                "flagged": self.flagged, "endpoints": ends,
                "points": [[float(x), float(y)] for x, y in self.points]}

    @classmethod
    def from_dict(cls, d) -> "DegeneracyContour":
        ends = d.get("endpoints")
        if ends is not None:
            ends = tuple(None if e is None else ExceptionalPoint.from_dict(e) for e in ends)
        return cls(d["kind"], np.array(d["points"], dtype=float).reshape(-1, 2),
                   bool(d["closed"]), tuple(d["winding"]), tuple(d.get("bands", (0, 1))),
                   ends, bool(d.get("flagged", False)))


@dataclass
class _Pieces:
    pos: dict = field(default_factory=dict)     # node key -> (kx, ky) reduced
    re: dict = field(default_factory=dict)      # node key -> Re of the pair discriminant
    segs: list = field(default_factory=list)    # (key_a, key_b)


def _grid_coords(grid):
    w, h = grid
    if w < 16 or h < 16:
        raise ValueError(f"grid must be at least 16x16, got {w}x{h}")
    return np.arange(w) * TWO_PI / w, np.arange(h) * TWO_PI / h


def _cell_segments(inside, centre_inside):
    """Edge pairs crossed by the zero level in one cell."""
    crossing = [inside[a] != inside[b] for a, b in _EDGES]
    idx = [e for e in range(4) if crossing[e]]
    if len(idx) == 2:
        return [tuple(idx)]
    if len(idx) == 4:
        # saddle: corners unlike the centre are cut off individually
        return [_CORNER_EDGES[c] for c in range(4) if inside[c] != centre_inside]
    return []


def _march(f_corner, cells, grid, node_for_edge):
    """Marching squares over selected cells with corner values ``f_corner`` (C, 4)."""
    pieces = _Pieces()
    seen = set()
    for (i, j), fc in zip(cells, f_corner):
        inside = [bool(v <= 0) for v in fc]
        centre_inside = bool(np.mean(fc) <= 0)
        for ea, eb in _cell_segments(inside, centre_inside):
            ka = node_for_edge(i, j, ea, fc, pieces)
            kb = node_for_edge(i, j, eb, fc, pieces)
            if ka == kb:
                continue
            key = (ka, kb) if ka <= kb else (kb, ka)
            if key in seen:
                continue
            seen.add(key)
            pieces.segs.append((ka, kb))
    return pieces


def _edge_key(i, j, e, w, h, vertex=None):
    if vertex is not None:
        ci, cj = _CORNERS[vertex]
        return ("p", (i + ci) % w, (j + cj) % h)
    if e == 0:
        return ("h", i, j)
    if e == 1:
        return ("v", (i + 1) % w, j)
    if e == 2:
        return ("h", i, (j + 1) % h)
    return ("v", i, j)


def _edge_geometry(i, j, e, dx, dy):
    a, b = _EDGES[e]
    ka = np.array([(i + _CORNERS[a][0]) * dx, (j + _CORNERS[a][1]) * dy])
    kb = np.array([(i + _CORNERS[b][0]) * dx, (j + _CORNERS[b][1]) * dy])
    return a, b, ka, kb


def _root_on_edge(phi, fa, fb):
    """Root of phi on [0, 1] given endpoint values of opposite inside/outside class."""
    if fa == 0:
        return 0.0
    if fb == 0:
        return 1.0
    try:
        return brentq(phi, 0.0, 1.0, xtol=1e-15, rtol=1e-15, maxiter=200)
    except ValueError:
        return float(np.clip(fa / (fa - fb), 0.0, 1.0))


def _pieces_two_band(model, grid):
    w, h = grid
    kx, ky = _grid_coords(grid)
    dx, dy = TWO_PI / w, TWO_PI / h
    D = discriminant2_grid(model, *np.meshgrid(kx, ky, indexing="ij"))
    f = D.imag
    corners = np.stack([np.roll(np.roll(f, -ci, 0), -cj, 1) for ci, cj in _CORNERS], axis=-1)
    inside = corners <= 0
    mixed = inside.any(axis=-1) & ~inside.all(axis=-1)
    cells = np.argwhere(mixed)
    fcs = corners[mixed]

    def node(i, j, e, fc, pieces):
        a, b, ka, kb = _edge_geometry(i, j, e, dx, dy)
        inner = a if fc[a] <= 0 else b
        if fc[inner] == 0:
            key = _edge_key(i, j, e, w, h, vertex=inner)
            if key not in pieces.pos:
                c = ka if inner == a else kb
                pieces.pos[key] = (reduce_angle(c[0]), reduce_angle(c[1]))
                pieces.re[key] = float(discriminant2_grid(model, c[0], c[1]).real)
            return key
        key = _edge_key(i, j, e, w, h)
        if key not in pieces.pos:
            def phi(t):
                p = ka + t * (kb - ka)
                return float(discriminant2_grid(model, p[0], p[1]).imag)
            t = _root_on_edge(phi, fc[a], fc[b])
            p = ka + t * (kb - ka)
            pieces.pos[key] = (reduce_angle(p[0]), reduce_angle(p[1]))
            pieces.re[key] = float(discriminant2_grid(model, p[0], p[1]).real)
        return key

    return _march(fcs, cells, grid, node)


def sheet_grid(model: BlochModel, grid, ratio: float = 3.0):
    """Eigenvalues on the (w+1) x (h+1) closed grid with grid-coherent labels.

    The first column (kx = 0) is tracked along ky; every row is then tracked
    along kx starting from that column's labels. Returns ``(values, flags)``
    where ``flags`` marks vertices whose gap is below ``ratio`` times the
    largest step to a grid neighbour (ambiguous assignment near EPs).
    """
    w, h = grid
    kx = np.arange(w + 1) * TWO_PI / w
    ky = np.arange(h + 1) * TWO_PI / h
    KX, KY = np.meshgrid(kx, ky, indexing="ij")
    ev = eigvals_of(model.matrix(KX, KY))
    n = ev.shape[-1]
    lab = np.empty_like(ev)
    first = ev[0, 0]
    lab[0, 0] = first[np.lexsort((first.imag, first.real))]
    for j in range(1, h + 1):
        perm, _ = best_matching(lab[0, j - 1], ev[0, j])
        lab[0, j] = ev[0, j][perm]
    for i in range(1, w + 1):
        perm, _ = best_matching(lab[i - 1], ev[i])
        lab[i] = np.take_along_axis(ev[i], perm, axis=-1)
    gaps = np.abs(lab[..., :, None] - lab[..., None, :])
    gaps = np.where(np.eye(n, dtype=bool), np.inf, gaps).min(axis=(-2, -1))
    # label-free neighbour steps: rows are tracked independently, so labelled
    # differences jump across cuts even where the spectrum is smooth
    _, dxs = best_matching(lab[:-1], lab[1:])
    _, dys = best_matching(lab[:, :-1], lab[:, 1:])
    step = np.zeros(lab.shape[:2])
    step[:-1] = np.maximum(step[:-1], dxs)
    step[1:] = np.maximum(step[1:], dxs)
    step[:, :-1] = np.maximum(step[:, :-1], dys)
    step[:, 1:] = np.maximum(step[:, 1:], dys)
    flags = gaps <= ratio * step
    return lab, flags


def _pieces_pair(model, grid, pair):
    """n-band fallback: per-cell corner labels matched to the coherent grid labels."""
    w, h = grid
    dx, dy = TWO_PI / w, TWO_PI / h
    lab, _ = sheet_grid(model, grid)
    p, q = pair
    cells, fcs, refs = [], [], []
    for i in range(w):
        for j in range(h):
            ref = lab[i, j]
            vals = [ref]
            for ci, cj in _CORNERS[1:]:
                perm, _ = best_matching(ref, lab[i + ci, j + cj])
                vals.append(lab[i + ci, j + cj][perm])
            d2 = np.array([(v[p] - v[q]) ** 2 for v in vals])
            fc = d2.imag
            ins = fc <= 0
            if ins.any() and not ins.all():
                cells.append((i, j))
                fcs.append(fc)
                refs.append(vals)
    ref_of = {c: r for c, r in zip(cells, refs)}

    def node(i, j, e, fc, pieces):
        a, b, ka, kb = _edge_geometry(i, j, e, dx, dy)
        inner = a if fc[a] <= 0 else b
        vals = ref_of[(i, j)]
        if fc[inner] == 0:
            key = _edge_key(i, j, e, w, h, vertex=inner)
            if key not in pieces.pos:
                c = ka if inner == a else kb
                pieces.pos[key] = (reduce_angle(c[0]), reduce_angle(c[1]))
                pieces.re[key] = float(((vals[inner][p] - vals[inner][q]) ** 2).real)
            return key
        key = _edge_key(i, j, e, w, h)
        if key not in pieces.pos:
            ref = vals[a]

            def labelled(t):
                pt = ka + t * (kb - ka)
                ev = eigvals_of(model.evaluate(pt), check=False)
                perm, _ = best_matching(ref, ev)
                ev = ev[perm]
                return (ev[p] - ev[q]) ** 2

            t = _root_on_edge(lambda t: float(labelled(t).imag), fc[a], fc[b])
            pt = ka + t * (kb - ka)
            pieces.pos[key] = (reduce_angle(pt[0]), reduce_angle(pt[1]))
            pieces.re[key] = float(labelled(t).real)
        return key

    return _march(np.array(fcs).reshape(-1, 4), cells, grid, node)


def _filter_kind(model, pieces, kind, grid):
    """Keep the sign-filtered parts of each segment; split mixed ones at Re D = 0."""
    sign = -1.0 if kind == "real" else 1.0
    reD = pieces.re
    field = ep_field(model)
    cell = max(TWO_PI / grid[0], TWO_PI / grid[1])
    kept = _Pieces(pos=dict(pieces.pos), re=dict(pieces.re))
    for s, (a, b) in enumerate(pieces.segs):
        ga, gb = sign * reD[a], sign * reD[b]
        if ga >= 0 and gb >= 0:
            kept.segs.append((a, b))
            continue
        if ga < 0 and gb < 0:
            continue
        pa = np.array(pieces.pos[a])
        pb = pa + wrap_delta(np.array(pieces.pos[b]) - pa)
        t = ga / (ga - gb)
        guess = pa + t * (pb - pa)
        pts, res, conv = newton_refine(field, guess[None, :])
        split = pts[0] if conv[0] and torus_distance(pts[0], guess) < 2 * cell else guess
        key = ("s", s)
        kept.pos[key] = (reduce_angle(split[0]), reduce_angle(split[1]))
        kept.re[key] = 0.0
        kept.segs.append((a, key) if ga >= 0 else (key, b))
    return kept


def _chain(pieces):
    adj = defaultdict(list)
    order = []
    for s, (a, b) in enumerate(pieces.segs):
        for x in (a, b):
            if x not in adj:
                order.append(x)
        adj[a].append(s)
        adj[b].append(s)
    used = [False] * len(pieces.segs)
    chains = []

    def walk(start):
        path = [start]
        cur = start
        while True:
            nxt = next((s for s in adj[cur] if not used[s]), None)
            if nxt is None:
                return path, False
            used[nxt] = True
            a, b = pieces.segs[nxt]
            cur = b if cur == a else a
            path.append(cur)
            if cur == start:
                return path, True

    for x in [x for x in order if len(adj[x]) % 2 == 1] + order:
        while any(not used[s] for s in adj[x]):
            chains.append(walk(x))
    return chains


def _lift(points):
    pts = np.asarray(points, dtype=float)
    out = np.empty_like(pts)
    out[0] = pts[0]
    for i in range(1, len(pts)):
        out[i] = out[i - 1] + wrap_delta(pts[i] - pts[i - 1])
    return out


def _assemble(pieces, kind, pair, eps, grid):
    cell = max(TWO_PI / grid[0], TWO_PI / grid[1])
    contours = []
    for keys, closed in _chain(pieces):
        pts = _lift([pieces.pos[k] for k in keys])
        winding = (0, 0)
        if closed:
            d = (pts[-1] - pts[0]) / TWO_PI
            winding = (int(round(d[0])), int(round(d[1])))
            first = next((c for c in winding if c != 0), 0)
            if first < 0:
                pts = _lift(pts[::-1])
                winding = (-winding[0], -winding[1])
        endpoints, flagged = None, False
        if not closed:
            ends = []
            for p in (pts[0], pts[-1]):
                best = None
                for e in eps:
                    d = float(torus_distance(p, e.k.as_array()))
                    if d <= 2 * cell and (best is None or d < best[0]):
                        best = (d, e)
                ends.append(None if best is None else best[1])
            endpoints = tuple(ends)
            flagged = any(e is None for e in ends)
        contours.append(DegeneracyContour(kind, pts, closed, winding, pair, endpoints, flagged))
    return contours


def degeneracy_contours(model: BlochModel, kind: str = "real", grid=(128, 128), *,
                        eps: list[ExceptionalPoint] | None = None,
                        pairs=None) -> list[DegeneracyContour]:
    """Real-part (Fermi arc / cut) or imaginary-part degeneracy lines.

    ``eps`` are used to label open ends; if omitted they are located on the
    same grid. For n > 2 bands every sheet pair (or those in ``pairs``) is
    contoured using grid-coherent sheet labels.
    """
    if kind not in KINDS:
        raise ConfigurationError(f"kind must be one of {KINDS}, got {kind!r}")
    if eps is None:
        eps = locate_eps(model, grid, charges=False)
    if model.bands == 2:
        jobs = [((0, 1), _pieces_two_band(model, grid))]
    else:
        n = model.bands
        pairs = pairs or [(p, q) for p in range(n) for q in range(p + 1, n)]
        jobs = [(pq, _pieces_pair(model, grid, pq)) for pq in pairs]
    out = []
    for pair, pieces in jobs:
        kept = _filter_kind(model, pieces, kind, grid)
        out.extend(_assemble(kept, kind, pair, eps, grid))
    return out


def contour_residual(model: BlochModel, contour: DegeneracyContour) -> float:
    """Largest |Re(e_p - e_q)| (or |Im| for imaginary kind) over the contour's vertices."""
    worst = 0.0
    part = np.real if contour.kind == "real" else np.imag
    for k in contour.points:
        ev = eigvals_of(model.evaluate(k), check=False)
        n = len(ev)
        d = np.abs(part(ev[:, None] - ev[None, :]))
        d = np.where(np.eye(n, dtype=bool), np.inf, d)
        worst = max(worst, float(d.min()))
    return worst


def loop_crossings(contours, axis: str, offset: float) -> int:
    """Transversal crossings of the closed loop (k_axis varies, other coordinate = offset)."""
    idx = 1 if axis == "x" else 0
    count = 0
    for c in contours:
        u = np.mod(c.points[:, idx] - offset + np.pi, TWO_PI) - np.pi
        s = np.sign(u)
        jump = np.abs(np.diff(u)) < np.pi
        count += int(np.sum((s[:-1] * s[1:] < 0) & jump))
    return count
