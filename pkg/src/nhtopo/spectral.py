"""Eigenvalues, the two-band discriminant, and continuous sheet tracking."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DegeneracyError, DimensionError, NumericalError, TrackingError
from .model import TWO_PI, BlochModel, _as_k

RESIDUAL_TOL = 1e-9


def eigvals_of(h: np.ndarray, check: bool = True) -> np.ndarray:
    """Eigenvalues of a stack of square matrices, shape ``(..., n)``.

    Two-band matrices use the closed form h0 +- sqrt(D); larger ones go through
    LAPACK with a backward-error check on each eigenvalue.
    """
    h = np.asarray(h, dtype=complex)
    n = h.shape[-1]
    if n == 2:
        h0 = 0.5 * (h[..., 0, 0] + h[..., 1, 1])
        r = np.sqrt(_disc2(h))
        return np.stack([h0 + r, h0 - r], axis=-1)
    if n == 1:
        return h[..., 0, :].copy()
    ev = np.linalg.eigvals(h)
    if check:
        _check_residual(h, ev)
    return ev


def _check_residual(h, ev):
    eye = np.eye(h.shape[-1])
    shifted = h[..., None, :, :] - ev[..., :, None, None] * eye
    smin = np.linalg.svd(shifted, compute_uv=False)[..., -1]
    scale = np.maximum(1.0, np.linalg.norm(h, ord=2, axis=(-2, -1)))[..., None]
    bad = smin > RESIDUAL_TOL * scale
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise NumericalError(f"eigensolver residual {smin[tuple(idx)]:.3e} exceeds tolerance")


def _disc2(h):
    a = 0.5 * (h[..., 0, 0] - h[..., 1, 1])
    return a * a + h[..., 0, 1] * h[..., 1, 0]


def eigenvalues(model: BlochModel, k) -> np.ndarray:
    """The n complex eigenvalues of H(k), in solver order."""
    kx, ky = _as_k(k)
    try:
        return eigvals_of(model.evaluate((kx, ky)))
    except NumericalError as exc:
        raise NumericalError(f"{exc} at k=({kx:.6g}, {ky:.6g})") from exc


def eigenvalues_grid(model: BlochModel, kx, ky) -> np.ndarray:
    return eigvals_of(model.matrix(kx, ky))


def discriminant2(model: BlochModel, k) -> complex:
    """D(k) = (H11 - h0)^2 + H12*H21, so that eigenvalues are h0 +- sqrt(D)."""
    if model.bands != 2:
        raise DimensionError(f"discriminant2 needs a 2-band model, got {model.bands} bands")
    return complex(_disc2(model.evaluate(k)))


def discriminant2_grid(model: BlochModel, kx, ky) -> np.ndarray:
    if model.bands != 2:
        raise DimensionError(f"discriminant2 needs a 2-band model, got {model.bands} bands")
    return _disc2(model.matrix(kx, ky))


def char_discriminant(ev: np.ndarray) -> np.ndarray:
    """prod_{p<q} (e_p - e_q)^2 over the last axis; symmetric, hence single-valued."""
    n = ev.shape[-1]
    out = np.ones(ev.shape[:-1], dtype=complex)
    for p in range(n):
        for q in range(p + 1, n):
            d = ev[..., p] - ev[..., q]
            out = out * d * d
    return out


def min_gap(ev: np.ndarray) -> np.ndarray:
    """Smallest pairwise distance among eigenvalues on the last axis."""
    n = ev.shape[-1]
    d = np.abs(ev[..., :, None] - ev[..., None, :])
    d = d + np.where(np.eye(n, dtype=bool), np.inf, 0.0)
    return d.min(axis=(-2, -1))


# --- permutations -----------------------------------------------------------

def compose(p, q) -> tuple:
    """(p o q)(i) = p[q[i]]."""
    return tuple(p[i] for i in q)


def inverse(p) -> tuple:
    out = [0] * len(p)
    for i, j in enumerate(p):
        out[j] = i
    return tuple(out)


def power(p, m: int) -> tuple:
    out = tuple(range(len(p)))
    base = p if m >= 0 else inverse(p)
    for _ in range(abs(m)):
        out = compose(base, out)
    return out


def is_identity(p) -> bool:
    return all(i == j for i, j in enumerate(p))


def parity(p) -> int:
    """0 for even permutations, 1 for odd."""
    seen = [False] * len(p)
    par = 0
    for i in range(len(p)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        par ^= (length - 1) & 1
    return par


@lru_cache(maxsize=None)
def _perm_table(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp)


EXHAUSTIVE_MAX = 6


def best_matching(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-total-distance assignment a[..., i] -> b[..., perm[i]].

    Returns ``(perm, displacement)`` where displacement is the largest single
    move under the chosen assignment. Vectorised over leading axes.
    Exhaustive over permutations for n <= 6; ties resolve to the first
    permutation in lexicographic order.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    n = a.shape[-1]
    cost = np.abs(a[..., :, None] - b[..., None, :])
    if n <= EXHAUSTIVE_MAX:
        table = _perm_table(n)
        rows = np.arange(n)
        totals = cost[..., rows[None, :], table].sum(axis=-1)
        best = table[np.argmin(totals, axis=-1)]
    else:
        flat = cost.reshape(-1, n, n)
        best = np.empty((flat.shape[0], n), dtype=np.intp)
        for i, c in enumerate(flat):
            r, col = linear_sum_assignment(c)
            best[i, r] = col
        best = best.reshape(cost.shape[:-1])
    disp = np.take_along_axis(cost, best[..., None], axis=-1)[..., 0].max(axis=-1)
    return best, disp


# --- tracking ---------------------------------------------------------------

@dataclass(frozen=True)
class TrackOptions:
    """Tuning for :func:`track`.

    ratio: a step is accepted when the smallest eigenvalue gap at both ends
        exceeds ``ratio`` times the matched displacement.
    max_depth: bisection levels per input segment before giving up.
    max_step: largest allowed torus step between consecutive input samples.
    degenerate_tol: gap (relative to max(1, |eigenvalues|)) treated as an exact degeneracy.
    """

    ratio: float = 3.0
    max_depth: int = 14
    max_step: float = 0.5
    degenerate_tol: float = 1e-12


DEFAULT_TRACK = TrackOptions()


@dataclass
class SheetPath:
    """Continuously tracked eigenvalue strands along a (lifted) path.

    ``k`` holds every evaluated sample including refinement points; ``nodes``
    indexes the caller's original samples within it. ``strands[:, s]`` is sheet
    s. ``closure[s]`` is the start strand whose initial value strand s reaches
    at the end of a closed path.
    """

    k: np.ndarray
    strands: np.ndarray
    closure: tuple
    nodes: np.ndarray
    closed: bool

    @property
    def bands(self) -> int:
        return self.strands.shape[1]

    def at_nodes(self) -> np.ndarray:
        return self.strands[self.nodes]

    def to_text(self) -> str:
        from .io import fmt
        n = self.bands
        head = ["index", "kx", "ky"] + [f"{part}{s}" for s in range(n) for part in ("re", "im")]
        lines = ["# closure " + " ".join(str(c) for c in self.closure), ",".join(head)]
        for i, (k, row) in enumerate(zip(self.k, self.strands)):
            vals = [str(i), fmt(k[0]), fmt(k[1])]
            for z in row:
                vals += [fmt(z.real), fmt(z.imag)]
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SheetPath":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        closure = tuple(int(c) for c in lines[0].split()[2:])
        rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[2:]])
        k = rows[:, 1:3]
        vals = rows[:, 3:]
        strands = vals[:, 0::2] + 1j * vals[:, 1::2]
        closed = not all(c == i for i, c in enumerate(closure)) or _is_closed(k)
        return cls(k, strands, closure, np.arange(len(k)), closed)


def _is_closed(path: np.ndarray) -> bool:
    d = path[-1] - path[0]
    return bool(np.all(np.abs(d - TWO_PI * np.round(d / TWO_PI)) < 1e-9))


def _scale(ev):
    return max(1.0, float(np.abs(ev).max()))


def _bridge(model, ka, kb, ea, eb, depth, opts, out_k, out_e, out_perm, segment):
    """Append refinement samples strictly between ka and kb plus the step perms."""
    perm, disp = best_matching(ea, eb)
    gap = min(min_gap(ea), min_gap(eb))
    if gap > opts.ratio * disp:
        out_perm.append(perm)
        return
    if depth >= opts.max_depth:
        raise TrackingError(
            f"ambiguous sheet matching on segment {segment} near k=({ka[0]:.6g}, {ka[1]:.6g}) "
            f"after {depth} bisections (gap {gap:.3e}, displacement {disp:.3e})", segment)
    km = 0.5 * (ka + kb)
    em = eigenvalues(model, km)
    if min_gap(em) <= opts.degenerate_tol * _scale(em):
        raise DegeneracyError(f"exact spectral degeneracy on path at k=({km[0]:.6g}, {km[1]:.6g})",
                              k=tuple(km))
    _bridge(model, ka, km, ea, em, depth + 1, opts, out_k, out_e, out_perm, segment)
    out_k.append(km)
    out_e.append(em)
    _bridge(model, km, kb, em, eb, depth + 1, opts, out_k, out_e, out_perm, segment)


def track(model: BlochModel, path, options: TrackOptions = DEFAULT_TRACK) -> SheetPath:
    """Follow the n eigenvalue sheets continuously along ``path`` (``(m, 2)`` lifted k).

    Strands are labelled by ascending (Re, Im) at the first sample. A step is
    bisected whenever the smallest eigenvalue gap at either end is not larger
    than ``options.ratio`` times the matched displacement.
    """
    path = np.asarray(path, dtype=float)
    if path.ndim != 2 or path.shape[1] != 2 or len(path) < 2:
        raise ValueError("path must be an (m, 2) array with m >= 2")
    steps = np.sqrt(np.sum(np.diff(path, axis=0) ** 2, axis=1))
    if np.any(steps > options.max_step):
        j = int(np.argmax(steps))
        raise ValueError(f"path step {j} has length {steps[j]:.3g} > max_step {options.max_step}")

    ev = eigvals_of(model.matrix(path[:, 0], path[:, 1]))
    first = ev[0]
    order = np.lexsort((first.imag, first.real))
    ev[0] = first[order]
    scale = _scale(ev)
    gaps = min_gap(ev)
    if np.any(gaps <= options.degenerate_tol * scale):
        j = int(np.argmin(gaps))
        raise DegeneracyError(
            f"exact spectral degeneracy on path at k=({path[j, 0]:.6g}, {path[j, 1]:.6g})",
            k=tuple(path[j]))

    perms, disp = best_matching(ev[:-1], ev[1:])
    ok = np.minimum(gaps[:-1], gaps[1:]) > options.ratio * disp

    all_k = [path[0]]
    all_e = [ev[0]]
    step_perms = []
    nodes = [0]
    for j in range(len(path) - 1):
        if ok[j]:
            step_perms.append(perms[j])
        else:
            _bridge(model, path[j], path[j + 1], ev[j], ev[j + 1], 0, options,
                    all_k, all_e, step_perms, j)
        nodes.append(len(all_k))
        all_k.append(path[j + 1])
        all_e.append(ev[j + 1])

    e = np.array(all_e)
    n = e.shape[1]
    pos = np.arange(n)
    strands = np.empty_like(e)
    strands[0] = e[0]
    for j, p in enumerate(step_perms):
        pos = p[pos]
        strands[j + 1] = e[j + 1, pos]

    closed = _is_closed(path)
    if closed:
        tau, d = best_matching(e[-1], e[0])
        if not min(min_gap(e[-1]), min_gap(e[0])) > options.ratio * d:
            raise NumericalError("end and start eigenvalues of closed path do not match")
        closure = tuple(int(tau[pos[s]]) for s in range(n))
    else:
        closure = tuple(range(n))
    return SheetPath(np.array(all_k), strands, closure, np.array(nodes), closed)


def loop_path(axis: str, offset: float, samples: int, start: float = 0.0) -> np.ndarray:
    """Closed loop along ``axis`` at fixed ``offset``; ``samples + 1`` points, last = first + 2pi."""
    t = start + TWO_PI * np.arange(samples + 1) / samples
    c = np.full_like(t, offset)
    if axis == "x":
        return np.stack([t, c], axis=1)
    if axis == "y":
        return np.stack([c, t], axis=1)
    raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")


def loop_distance(axis: str, offset: float, k) -> np.ndarray:
    """Torus distance from points ``k`` (..., 2) to the loop line."""
    k = np.asarray(k, dtype=float)
    coord = k[..., 1] if axis == "x" else k[..., 0]
    return np.abs(np.mod(coord - offset + np.pi, TWO_PI) - np.pi)


def monodromy(model: BlochModel, axis: str, offset: float, samples: int = 512,
              *, start: float = 0.0, eps=None, exclusion: float = 1e-3,
              options: TrackOptions = DEFAULT_TRACK) -> tuple:
    """Sheet permutation along the non-contractible loop in which k_axis varies.

    ``eps`` (ExceptionalPoints or k pairs) are checked against ``exclusion``.
    Labels follow :func:`track`: ascending (Re, Im) at the loop's base point.
    """
    if samples < 16:
        raise ValueError(f"monodromy needs samples >= 16, got {samples}")
    if eps:
        pts = np.array([_ep_k(e) for e in eps])
        d = loop_distance(axis, offset, pts)
        if np.any(d < exclusion):
            j = int(np.argmin(d))
            raise DegeneracyError(
                f"loop along {axis} at offset {offset:.6g} passes within {d[j]:.3g} of an EP "
                f"(exclusion radius {exclusion})", k=tuple(pts[j]))
    return track(model, loop_path(axis, offset, samples, start), options).closure


def _ep_k(ep):
    if hasattr(ep, "k"):
        return ep.k.as_array()
    return np.asarray(ep, dtype=float)


def phase_winding(values: np.ndarray) -> float:
    """Accumulated arg increments along a sampled complex curve, in units of 2pi."""
    values = np.asarray(values)
    return float(np.sum(np.angle(values[1:] / values[:-1])) / TWO_PI)
