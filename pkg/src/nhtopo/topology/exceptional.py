"""Exceptional-point search, Newton refinement and spectral winding charges."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from ..errors import GeometryError, NHTopoError, NumericalError
from ..model import TWO_PI, BlochModel, MomentumPoint, reduce_angle, torus_distance
from ..spectral import (TrackOptions, char_discriminant, discriminant2_grid, eigvals_of,
                        min_gap, phase_winding, track)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExceptionalPoint:
    """A refined point degeneracy.

    residual is |D| for two-band models and the smallest eigenvalue gap
    otherwise. ``defective`` is False for diagonalisable touchings, which are
    degeneracies but not branch points (their charge is 0).
    """

    k: MomentumPoint
    order: int
    charge: float | None
    residual: float
    bands: tuple[int, int] = (0, 1)
    defective: bool = True

    def to_dict(self) -> dict:
        return {"kx": self.k.kx, "ky": self.k.ky, "order": self.order,
                "charge": self.charge, "residual": self.residual,
                "bands": list(self.bands), "defective": self.defective}

    @classmethod
    def from_dict(cls, d) -> "ExceptionalPoint":
        charge = d.get("charge")
        return cls(MomentumPoint(float(d["kx"]), float(d["ky"])), int(d["order"]),
                   None if charge in (None, "") else float(charge), float(d["residual"]),
                   tuple(int(b) for b in d.get("bands", (0, 1))),
                   d.get("defective", True) in (True, "true", "True", 1))


EP_CSV_HEADER = ("kx", "ky", "order", "charge", "residual", "band_p", "band_q", "defective")


def ep_rows(eps):
    for e in eps:
        yield (e.k.kx, e.k.ky, e.order, None if e.charge is None else float(e.charge),
               e.residual, e.bands[0], e.bands[1], e.defective)


def eps_from_rows(rows) -> list[ExceptionalPoint]:
    out = []
    for r in rows:
        out.append(ExceptionalPoint.from_dict({
            "kx": r["kx"], "ky": r["ky"], "order": r["order"], "charge": r["charge"],
            "residual": r["residual"], "bands": (r["band_p"], r["band_q"]),
            "defective": r["defective"]}))
    return out


def ep_field(model: BlochModel):
    """Complex scalar field vanishing at spectral degeneracies.

    Two bands: the discriminant D. More bands: prod_{p<q} (e_p - e_q)^2.
    """
    if model.bands == 2:
        return lambda kx, ky: discriminant2_grid(model, kx, ky)
    return lambda kx, ky: char_discriminant(eigvals_of(model.matrix(kx, ky), check=False))


def _grid(shape):
    w, h = shape
    if w < 16 or h < 16:
        raise ValueError(f"grid must be at least 16x16, got {w}x{h}")
    kx = np.arange(w) * TWO_PI / w
    ky = np.arange(h) * TWO_PI / h
    return np.meshgrid(kx, ky, indexing="ij")


def _seed_cells(f: np.ndarray) -> np.ndarray:
    """Cells (periodic) where both Re f and Im f take both signs (zero counts as both)."""
    def spans_zero(g):
        c = np.stack([g, np.roll(g, -1, 0), np.roll(g, -1, 1), np.roll(np.roll(g, -1, 0), -1, 1)])
        return (c.min(axis=0) <= 0) & (c.max(axis=0) >= 0)
    return np.argwhere(spans_zero(f.real) & spans_zero(f.imag))


def _minimum_vertices(f: np.ndarray, scale: float, level: float = 0.05) -> np.ndarray:
    """Grid vertices where |f| is a small periodic local minimum.

    Catches tangential zeros (e.g. diagonalisable touchings, where D has a
    double zero and never changes sign) that the sign-change test misses.
    """
    a = np.abs(f)
    low = a < level * scale
    for sx in (-1, 0, 1):
        for sy in (-1, 0, 1):
            if sx or sy:
                low &= a <= np.roll(np.roll(a, sx, 0), sy, 1)
    return np.argwhere(low)


def newton_refine(field, seeds: np.ndarray, max_iter: int = 50, tol: float = 1e-10,
                  h: float = 1e-7, max_step: float = 0.5):
    """Vectorised 2-D Newton on (Re f, Im f) with a central-difference Jacobian.

    Returns ``(points, residuals, converged)``. Iteration continues past the
    tolerance until the step stalls so converged points are polished to
    machine precision. Singular Jacobians fall back to the pseudo-inverse step.
    """
    x = np.array(seeds, dtype=float).reshape(-1, 2)
    active = np.ones(len(x), dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        xa = x[active]
        f0 = field(xa[:, 0], xa[:, 1])
        fxp = field(xa[:, 0] + h, xa[:, 1])
        fxm = field(xa[:, 0] - h, xa[:, 1])
        fyp = field(xa[:, 0], xa[:, 1] + h)
        fym = field(xa[:, 0], xa[:, 1] - h)
        dfx = (fxp - fxm) / (2 * h)
        dfy = (fyp - fym) / (2 * h)
        jac = np.empty((len(xa), 2, 2))
        jac[:, 0, 0], jac[:, 0, 1] = dfx.real, dfy.real
        jac[:, 1, 0], jac[:, 1, 1] = dfx.imag, dfy.imag
        r = np.stack([f0.real, f0.imag], axis=1)
        step = -np.einsum("nij,nj->ni", np.linalg.pinv(jac), r)
        norm = np.sqrt(np.sum(step ** 2, axis=1))
        big = norm > max_step
        step[big] *= (max_step / norm[big])[:, None]
        x[active] = xa + step
        stalled = norm < 1e-15
        idx = np.flatnonzero(active)
        active[idx[stalled]] = False
    res = np.abs(field(x[:, 0], x[:, 1]))
    return x, res, res < tol


def _defective(h: np.ndarray, lam: complex) -> bool:
    """True when H - lam has a one-dimensional near-kernel (a Jordan block)."""
    n = h.shape[0]
    shifted = h - lam * np.eye(n)
    scale = max(1.0, np.linalg.norm(h, 2))
    if n == 2:
        return bool(np.linalg.norm(shifted) > 1e-6 * scale)
    sv = np.linalg.svd(shifted, compute_uv=False)
    return bool(np.sum(sv < 1e-6 * scale) < 2)


def _annotate(model, k, coalescence):
    h = model.evaluate(k)
    ev = eigvals_of(h, check=False)
    n = len(ev)
    d = np.where(np.eye(n, dtype=bool), np.inf, np.abs(ev[:, None] - ev[None, :]))
    p, q = np.unravel_index(np.argmin(d), d.shape)
    p, q = sorted((int(p), int(q)))
    gap = float(d[p, q])
    if n == 2:
        order = 2
    else:
        centre = 0.5 * (ev[p] + ev[q])
        radius = max(coalescence, 3.0 * gap)
        order = max(2, int(np.sum(np.abs(ev - centre) <= radius)))
    return order, (p, q), gap, _defective(h, 0.5 * (ev[p] + ev[q]))


def locate_eps(model: BlochModel, grid=(64, 64), *, tol: float = 1e-10,
               merge_radius: float = 1e-6, max_iter: int = 50, coalescence: float = 1e-6,
               charges: bool = True, notes: list | None = None) -> list[ExceptionalPoint]:
    """Find, refine and annotate all EPs of ``model`` on the Brillouin zone.

    Seeds are grid cells over which both Re and Im of the degeneracy field
    change sign. Rejected seeds and resolution advisories are appended to
    ``notes`` (if given) and logged.
    """
    notes = notes if notes is not None else []
    kx, ky = _grid(grid)
    field = ep_field(model)
    f = field(kx, ky)
    scale = max(1.0, float(np.abs(f).max()))
    cells = _seed_cells(f)
    minima = _minimum_vertices(f, scale)
    if len(cells) == 0 and len(minima) == 0:
        return []
    dx, dy = TWO_PI / grid[0], TWO_PI / grid[1]
    seeds = np.concatenate([
        np.stack([(cells[:, 0] + 0.5) * dx, (cells[:, 1] + 0.5) * dy], axis=1),
        np.stack([minima[:, 0] * dx, minima[:, 1] * dy], axis=1)])
    pts, res, conv = newton_refine(field, seeds, max_iter=max_iter, tol=tol * scale)
    # a local minimum of |f| need not be a zero, so only sign-change seeds count as failures
    failed = ~conv[:len(cells)]
    if failed.any():
        msg = f"{int(failed.sum())} of {len(cells)} seeds did not converge and were discarded"
        notes.append({"kind": "seed-discarded", "count": int(failed.sum()), "message": msg})
        log.debug(msg)

    kept: list[tuple[np.ndarray, float]] = []
    for p, r in zip(pts[conv], res[conv]):
        p = np.array([reduce_angle(p[0]), reduce_angle(p[1])])
        for i, (q, rq) in enumerate(kept):
            if torus_distance(p, q) < merge_radius:
                if r < rq:
                    kept[i] = (p, r)
                break
        else:
            kept.append((p, r))
    kept.sort(key=lambda pr: (round(pr[0][0], 9), round(pr[0][1], 9)))

    cell = max(dx, dy)
    for i in range(len(kept)):
        for j in range(i + 1, len(kept)):
            if torus_distance(kept[i][0], kept[j][0]) < cell:
                notes.append({"kind": "resolution", "message":
                              "two EPs closer than one grid cell; increase the grid resolution"})
                log.info("two EPs within one grid cell; consider a finer grid")
                break

    eps = []
    for p, r in kept:
        k = MomentumPoint(*p)
        order, bands, gap, defective = _annotate(model, k, coalescence)
        resid = float(r) if model.bands == 2 else gap
        eps.append(ExceptionalPoint(k, order, None, resid, bands, defective))

    if charges:
        eps = assign_charges(model, eps, grid, notes)
    return eps


def charge_radius(eps, index: int, grid=(64, 64)) -> float:
    cell = min(TWO_PI / grid[0], TWO_PI / grid[1])
    r = 0.25 * cell
    here = eps[index].k.as_array()
    for j, e in enumerate(eps):
        if j != index:
            r = min(r, 0.4 * float(torus_distance(here, e.k.as_array())))
    return r


def assign_charges(model, eps, grid=(64, 64), notes=None, samples: int = 256):
    out = []
    for i, e in enumerate(eps):
        try:
            nu = winding_number(model, e, charge_radius(eps, i, grid), samples, eps=eps)
        except NHTopoError as exc:
            nu = None
            if notes is not None:
                notes.append({"kind": "charge-failed", "message": str(exc)})
            log.warning("charge of EP at (%.6g, %.6g) failed: %s", e.k.kx, e.k.ky, exc)
        out.append(replace(e, charge=nu))
    return out


def _circle(centre, radius, samples):
    t = TWO_PI * np.arange(samples + 1) / samples
    t[-1] = 0.0
    return np.stack([centre[0] + radius * np.cos(t), centre[1] + radius * np.sin(t)], axis=1)


def winding_phase(model: BlochModel, ep, radius: float, samples: int = 256,
                  *, eps=None, options: TrackOptions | None = None) -> float:
    """Unsnapped charge -(accumulated arg of e_p - e_q)/2pi on a counterclockwise circle.

    The sheet pair is the one with the smallest separation on the circle's
    first sample; values are tracked continuously, not taken on a principal branch.
    """
    if samples < 64:
        raise ValueError(f"winding needs samples >= 64, got {samples}")
    centre = ep.k.as_array() if hasattr(ep, "k") else np.asarray(ep, dtype=float)
    if eps:
        for other in eps:
            ok = other.k.as_array() if hasattr(other, "k") else np.asarray(other, dtype=float)
            d = float(torus_distance(centre, ok))
            if 1e-9 < d <= radius:
                raise GeometryError(f"circle of radius {radius:.3g} around ({centre[0]:.6g}, "
                                    f"{centre[1]:.6g}) encloses another EP at distance {d:.3g}")
    path = _circle(centre, radius, samples)
    sp = track(model, path, options or TrackOptions())
    s0 = sp.strands[0]
    n = len(s0)
    d = np.where(np.eye(n, dtype=bool), np.inf, np.abs(s0[:, None] - s0[None, :]))
    p, q = np.unravel_index(np.argmin(d), d.shape)
    delta = sp.strands[:, p] - sp.strands[:, q]
    return -phase_winding(delta)


def winding_number(model: BlochModel, ep, radius: float = 0.02, samples: int = 256,
                   *, eps=None, snap_tol: float = 0.05) -> float:
    """Half-integer EP charge, snapped from :func:`winding_phase`."""
    nu = winding_phase(model, ep, radius, samples, eps=eps)
    snapped = round(2.0 * nu) / 2.0
    if abs(nu - snapped) >= snap_tol:
        raise NumericalError(f"winding {nu:.4f} is not near a half-integer "
                             "(radius too large or too few samples)")
    return snapped + 0.0
