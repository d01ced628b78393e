"""Sheet meshes of the complex spectrum for external plotting."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .io import fmt
from .model import TWO_PI, BlochModel
from .spectral import best_matching
from .topology.contours import sheet_grid

MESH_HEADER = "# nhtopo sheet mesh v1"


@dataclass
class SheetMesh:
    """One eigenvalue sheet on the closed (w+1) x (h+1) grid, triangulated.

    Faces touching a flagged vertex (ambiguous labelling near an EP) are
    omitted, as are faces straddling a seam where independently tracked rows
    disagree on labels (the cut, emitted separately as polylines).
    """

    sheet: int
    kx: np.ndarray
    ky: np.ndarray
    values: np.ndarray       # (w+1, h+1) complex
    flags: np.ndarray        # (w+1, h+1) bool
    faces: np.ndarray        # (F, 3) vertex indices, row-major (i * (h+1) + j)

    def to_text(self) -> str:
        w1, h1 = self.values.shape
        lines = [MESH_HEADER, f"# sheet {self.sheet}",
                 f"# vertices {w1 * h1} faces {len(self.faces)}",
                 "# v kx ky re im flagged", "# f a b c"]
        for i in range(w1):
            for j in range(h1):
                z = self.values[i, j]
                lines.append(f"v {fmt(self.kx[i])} {fmt(self.ky[j])} {fmt(z.real)} {fmt(z.imag)} "
                             f"{int(self.flags[i, j])}")
        lines += [f"f {a} {b} {c}" for a, b, c in self.faces]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SheetMesh":
        rows = text.splitlines()
        if not rows or rows[0] != MESH_HEADER:
            raise ValueError("not a sheet mesh file")
        sheet = int(rows[1].split()[2])
        verts, faces = [], []
        for r in rows:
            if r.startswith("v "):
                verts.append([float(x) for x in r.split()[1:]])
            elif r.startswith("f "):
                faces.append([int(x) for x in r.split()[1:]])
        v = np.array(verts)
        kx = np.unique(v[:, 0])
        ky = np.unique(v[:, 1])
        shape = (len(kx), len(ky))
        values = (v[:, 2] + 1j * v[:, 3]).reshape(shape)
        flags = v[:, 4].astype(bool).reshape(shape)
        return cls(sheet, kx, ky, values, flags, np.array(faces, dtype=int).reshape(-1, 3))


def _seams(values: np.ndarray):
    """Grid edges across which the labels are not the closest assignment (a cut seam)."""
    n = values.shape[-1]
    ident = np.arange(n)
    px, _ = best_matching(values[:-1], values[1:])
    py, _ = best_matching(values[:, :-1], values[:, 1:])
    return (px != ident).any(axis=-1), (py != ident).any(axis=-1)


def _faces(flags: np.ndarray, seam_x=None, seam_y=None) -> np.ndarray:
    """Two triangles per grid cell, skipping cells with a flagged corner or a seam edge."""
    w1, h1 = flags.shape
    i, j = np.meshgrid(np.arange(w1 - 1), np.arange(h1 - 1), indexing="ij")
    v00 = i * h1 + j
    v10 = (i + 1) * h1 + j
    v01 = i * h1 + j + 1
    v11 = (i + 1) * h1 + j + 1
    f = flags.ravel()
    ok = ~(f[v00] | f[v10] | f[v01] | f[v11])
    if seam_x is not None:
        ok &= ~(seam_x[:, :-1] | seam_x[:, 1:] | seam_y[:-1, :] | seam_y[1:, :])
    lower = np.stack([v00[ok], v10[ok], v11[ok]], axis=1)
    upper = np.stack([v00[ok], v11[ok], v01[ok]], axis=1)
    return np.stack([lower, upper], axis=1).reshape(-1, 3)


def sheet_meshes(model: BlochModel, grid=(64, 64), ratio: float = 3.0) -> list[SheetMesh]:
    """One mesh per sheet from grid-coherent tracking (first column, then each row)."""
    w, h = grid
    if w < 16 or h < 16:
        raise ValueError(f"grid must be at least 16x16, got {w}x{h}")
    values, flags = sheet_grid(model, grid, ratio)
    kx = np.arange(w + 1) * TWO_PI / w
    ky = np.arange(h + 1) * TWO_PI / h
    faces = _faces(flags, *_seams(values))
    return [SheetMesh(s, kx, ky, values[..., s], flags, faces) for s in range(values.shape[-1])]


def flagged_clusters(flags: np.ndarray) -> int:
    """Connected clusters of flagged vertices on the torus (8-connectivity)."""
    f = np.asarray(flags, dtype=bool)[:-1, :-1]
    labels, count = ndimage.label(f, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        return 0
    parent = list(range(count + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def join(a, b):
        for x, y in zip(a.ravel(), b.ravel()):
            if x and y:
                parent[find(x)] = find(y)

    w, h = labels.shape
    for s in (-1, 0, 1):
        join(labels[-1], np.roll(labels[0], s))
        join(labels[:, -1], np.roll(labels[:, 0], s))
    join(labels[-1:, -1:], labels[:1, :1])
    join(labels[-1:, :1], labels[:1, -1:])
    return len({find(x) for x in range(1, count + 1)})


def write_meshes(meshes, out: str | Path, stem: str = "sheet") -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for m in meshes:
        p = out / f"{stem}_{m.sheet}.mesh"
        p.write_text(m.to_text())
        paths.append(p)
    return paths


def polyline_text(contour) -> str:
    lines = [f"# cut kind={contour.kind} closed={'true' if contour.closed else 'false'} "
             f"winding={contour.winding[0]},{contour.winding[1]}", "# kx ky (lifted)"]
    lines += [f"{fmt(p[0])} {fmt(p[1])}" for p in contour.points]
    return "\n".join(lines) + "\n"
