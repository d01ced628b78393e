"""Parameter sweeps: EP trajectories, pair creation/annihilation and invariant flips."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SweepError
from .model import (TWO_PI, BlochModel, BuiltinModel, HoppingModel, HoppingTerm, SumModel,
                    parse_model, torus_distance, wrap_delta)
from .topology.exceptional import ExceptionalPoint, locate_eps
from .topology.invariants import DEFAULT_BASE, InvariantReport, invariants

log = logging.getLogger(__name__)


def worker_count() -> int:
    env = os.environ.get("NHTOPO_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigurationError(f"NHTOPO_THREADS must be an integer, got {env!r}") from exc
    return min(8, os.cpu_count() or 1)


def default_perturbation(bands: int, strength: float = 0.1) -> HoppingModel:
    """Constant ``strength * i`` on the (0, 1) off-diagonal entry."""
    amp = np.zeros((bands, bands), dtype=complex)
    amp[0, 1] = 1j * strength
    return HoppingModel(bands, (HoppingTerm((0, 0), amp),))


@dataclass(frozen=True)
class ModelFamily:
    """A one-parameter family H(t), t in [0, 1].

    Either entrywise-linear between ``start`` and ``end`` plus a fixed
    ``perturbation``, or a builtin whose parameter ``index`` runs from ``lo`` to ``hi``.
    """

    start: BlochModel | None = None
    end: BlochModel | None = None
    perturbation: BlochModel | None = None
    builtin: str | None = None
    params: tuple = ()
    index: int = 0
    lo: float = 0.0
    hi: float = 1.0

    @classmethod
    def linear(cls, start: BlochModel, end: BlochModel, perturbation: BlochModel | None | str
               = "default") -> "ModelFamily":
        if start.bands != end.bands:
            raise ConfigurationError("family endpoints must have the same band count")
        if perturbation == "default":
            perturbation = default_perturbation(start.bands)
        return cls(start=start, end=end, perturbation=perturbation)

    @classmethod
    def builtin_sweep(cls, name: str, params, index: int, lo: float, hi: float) -> "ModelFamily":
        BuiltinModel(name, tuple(params))
        return cls(builtin=name, params=tuple(params), index=index, lo=lo, hi=hi)

    def parameter(self, t: float) -> float:
        return self.lo + t * (self.hi - self.lo)

    def at(self, t: float) -> BlochModel:
        if self.builtin is not None:
            p = list(self.params)
            p[self.index] = self.parameter(t)
            return BuiltinModel(self.builtin, tuple(p))
        parts, weights = [self.start, self.end], [1.0 - t, t]
        if self.perturbation is not None:
            parts.append(self.perturbation)
            weights.append(1.0)
        return SumModel(tuple(parts), tuple(weights))

    def to_dict(self) -> dict:
        if self.builtin is not None:
            return {"builtin": self.builtin, "params": list(self.params), "index": self.index,
                    "range": [self.lo, self.hi]}
        return {"start": self.start.to_config(), "end": self.end.to_config(),
                "perturbation": None if self.perturbation is None else
                self.perturbation.to_config()}

    @classmethod
    def from_dict(cls, d) -> "ModelFamily":
        if "builtin" in d:
            return cls.builtin_sweep(d["builtin"], d["params"], d["index"], *d["range"])
        pert = d.get("perturbation")
        return cls.linear(parse_model(d["start"]), parse_model(d["end"]),
                          None if pert is None else parse_model(pert))


@dataclass
class EPTrack:
    id: int
    charge: float | None
    t: list = field(default_factory=list)
    k: list = field(default_factory=list)       # lifted coordinates
    begin: str = "boundary"                     # "creation" or "boundary"
    end: str = "boundary"                       # "annihilation" or "boundary"

    @property
    def drift(self) -> np.ndarray:
        return np.asarray(self.k[-1]) - np.asarray(self.k[0])

    def to_dict(self) -> dict:
        return {"id": self.id, "charge": self.charge, "begin": self.begin, "end": self.end,
                "t": list(self.t), "k": [list(map(float, p)) for p in self.k]}


@dataclass
class SweepResult:
    family: ModelFamily
    t: list
    eps: list                       # per-t lists of ExceptionalPoint
    tracks: list
    events: list
    intervals: list                 # {"t_start", "t_end", "report", "samples"}
    advisories: list = field(default_factory=list)

    def ep_counts(self) -> list[int]:
        return [len(e) for e in self.eps]

    def to_dict(self) -> dict:
        return {
            "schema": "nhtopo.sweep/1",
            "family": self.family.to_dict(),
            "samples": [{"t": t, "eps": [e.to_dict() for e in eps]}
                        for t, eps in zip(self.t, self.eps)],
            "tracks": [tr.to_dict() for tr in self.tracks],
            "events": list(self.events),
            "intervals": [{"t_start": iv["t_start"], "t_end": iv["t_end"],
                           "class": None if iv["report"].class_label is None
                           else list(iv["report"].class_label),
                           "report": iv["report"].to_dict()} for iv in self.intervals],
            "advisories": list(self.advisories),
        }

    @classmethod
    def from_dict(cls, d) -> "SweepResult":
        tracks = []
        for tr in d["tracks"]:
            tracks.append(EPTrack(tr["id"], tr["charge"], list(tr["t"]),
                                  [np.array(p) for p in tr["k"]], tr["begin"], tr["end"]))
        intervals = [{"t_start": iv["t_start"], "t_end": iv["t_end"],
                      "report": InvariantReport.from_dict(iv["report"])} for iv in d["intervals"]]
        return cls(ModelFamily.from_dict(d["family"]), [s["t"] for s in d["samples"]],
                   [[ExceptionalPoint.from_dict(e) for e in s["eps"]] for s in d["samples"]],
                   tracks, list(d["events"]), intervals, list(d.get("advisories", [])))


def _match(prev, cur, max_step):
    """Greedy nearest matching with charge consistency. Returns {i_prev: j_cur}."""
    cand = []
    for i, a in enumerate(prev):
        for j, b in enumerate(cur):
            if a.charge is not None and b.charge is not None and a.charge != b.charge:
                continue
            d = float(torus_distance(a.k.as_array(), b.k.as_array()))
            if d < max_step:
                cand.append((d, i, j))
    cand.sort()
    out, used = {}, set()
    for d, i, j in cand:
        if i not in out and j not in used:
            out[i] = j
            used.add(j)
    return out


def _needs_refine(a, b, max_step):
    if len(a) != len(b):
        return True
    return len(_match(a, b, max_step)) != len(a)


def _same_class(r1: InvariantReport, r2: InvariantReport) -> bool:
    return (r1.pi_x, r1.pi_y) == (r2.pi_x, r2.pi_y)


def sweep(family: ModelFamily, t_count: int = 64, grid=(64, 64), *,
          offsets=DEFAULT_BASE, samples: int = 256, max_levels: int = 10,
          track_step: float = 0.3, workers: int | None = None) -> SweepResult:
    """Locate EPs along the family, track them in t and classify EP-free stretches."""
    if t_count < 8:
        raise ValueError(f"sweep needs t_count >= 8, got {t_count}")
    workers = workers or worker_count()
    snaps: dict[float, list] = {}

    def analyse(ts):
        ts = [t for t in ts if t not in snaps]
        if not ts:
            return
        if workers > 1 and len(ts) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                res = list(pool.map(lambda t: locate_eps(family.at(t), grid), ts))
        else:
            res = [locate_eps(family.at(t), grid) for t in ts]
        for t, r in zip(ts, res):
            snaps[t] = r

    base = [float(t) for t in np.linspace(0.0, 1.0, t_count)]
    analyse(base)
    min_dt = (1.0 / (t_count - 1)) / 2 ** max_levels

    def refine_pass():
        ts = sorted(snaps)
        mids = [0.5 * (a + b) for a, b in zip(ts, ts[1:])
                if b - a > 1.5 * min_dt and _needs_refine(snaps[a], snaps[b], track_step)]
        analyse(mids)
        return bool(mids)

    while refine_pass():
        pass

    advisories = []
    ts = sorted(snaps)
    for a, b in zip(ts, ts[1:]):
        if _needs_refine(snaps[a], snaps[b], track_step) and abs(len(snaps[a]) - len(snaps[b])) % 2:
            advisories.append({"kind": "unresolved", "t_interval": [a, b],
                               "message": "EP count changes by an odd number; "
                                          "increase grid or t resolution"})

    # EP-free stretches: classify every sample and the midpoint; bisect on mismatch
    reports: dict[float, InvariantReport] = {}

    def report_at(t):
        if t not in reports:
            reports[t] = invariants(family.at(t), offsets, samples, eps=[])
        return reports[t]

    while True:
        ts = sorted(snaps)
        runs = _epfree_runs(ts, snaps)
        pending = []
        for run in runs:
            mid = 0.5 * (run[0] + run[-1])
            if mid not in snaps and len(run) > 1:
                pending.append(mid)
        if pending:
            analyse(pending)
            continue
        split = []
        for run in runs:
            for a, b in zip(run, run[1:]):
                if not _same_class(report_at(a), report_at(b)):
                    if b - a <= 1.5 * min_dt:
                        raise SweepError(f"invariant mismatch within EP-free interval "
                                         f"[{a:.6g}, {b:.6g}] with no EPs found in between")
                    split.append(0.5 * (a + b))
        if not split:
            break
        analyse(split)

    ts = sorted(snaps)
    intervals = []
    for run in _epfree_runs(ts, snaps):
        mid = 0.5 * (run[0] + run[-1])
        closest = min(run, key=lambda t: abs(t - mid))
        intervals.append({"t_start": run[0], "t_end": run[-1], "report": report_at(closest),
                          "samples": len(run)})

    for t in ts:
        charges = [e.charge for e in snaps[t]]
        if None not in charges and abs(sum(charges)) > 1e-9:
            advisories.append({"kind": "charge", "t": t,
                               "message": f"total EP charge {sum(charges)} != 0"})

    tracks, events = _build_tracks(ts, snaps, track_step)
    return SweepResult(family, ts, [snaps[t] for t in ts], tracks, events, intervals, advisories)


def _epfree_runs(ts, snaps):
    runs, cur = [], []
    for t in ts:
        if snaps[t]:
            if cur:
                runs.append(cur)
            cur = []
        else:
            cur.append(t)
    if cur:
        runs.append(cur)
    return runs


def _build_tracks(ts, snaps, track_step):
    tracks: list[EPTrack] = []
    events = []
    active: dict[int, int] = {}          # index in current snapshot -> track id

    def new_track(t, ep, begin):
        tr = EPTrack(len(tracks), ep.charge, [t], [ep.k.as_array()], begin=begin)
        tracks.append(tr)
        return tr.id

    for j, ep in enumerate(snaps[ts[0]]):
        active[j] = new_track(ts[0], ep, "boundary")
    for a, b in zip(ts, ts[1:]):
        prev, cur = snaps[a], snaps[b]
        m = _match(prev, cur, track_step)
        nxt = {}
        for i, tid in active.items():
            tr = tracks[tid]
            if i in m:
                j = m[i]
                last = tr.k[-1]
                new = last + wrap_delta(cur[j].k.as_array() - np.mod(last, TWO_PI))
                for ax, name in ((0, "x"), (1, "y")):
                    if np.floor(new[ax] / TWO_PI) != np.floor(last[ax] / TWO_PI):
                        events.append({"kind": "boundary-crossing", "axis": name, "track": tid,
                                       "t_interval": [a, b]})
                tr.t.append(b)
                tr.k.append(new)
                nxt[j] = tid
            else:
                tr.end = "annihilation"
                events.append({"kind": "annihilation", "track": tid, "t_interval": [a, b]})
        for j, ep in enumerate(cur):
            if j not in nxt:
                tid = new_track(b, ep, "creation")
                events.append({"kind": "creation", "track": tid, "t_interval": [a, b]})
                nxt[j] = tid
        active = nxt
    return tracks, events


def threading_report(result: SweepResult) -> dict:
    """Invariant bit flips between consecutive EP-free intervals and the threading between them.

    ``net_threading`` is the charge-weighted lifted drift of the intervening EP
    tracks in units of 2pi: a pair created together and annihilated after one
    partner went once around the torus contributes +-1 on that axis, while a
    pair that recombines locally contributes 0.
    """
    transitions = []
    ivs = result.intervals
    for left, right in zip(ivs, ivs[1:]):
        r1, r2 = left["report"], right["report"]
        flips = {}
        for ax in ("x", "y"):
            diff = np.bitwise_xor(np.asarray(r1.m[ax]), np.asarray(r2.m[ax]))
            n = diff.shape[0]
            flips[ax] = {f"{p},{q}": int(diff[p, q]) for p in range(n) for q in range(p + 1, n)}
        lo, hi = left["t_end"], right["t_start"]
        net = np.zeros(2)
        unknown = 0
        for tr in result.tracks:
            if tr.t[0] >= hi or tr.t[-1] <= lo:
                continue
            if tr.charge is None:
                unknown += 1
                continue
            net += np.sign(tr.charge) * tr.drift
        wraps = {"x": 0, "y": 0}
        for ev in result.events:
            if ev["kind"] == "boundary-crossing" and lo <= ev["t_interval"][0] < hi:
                wraps[ev["axis"]] += 1
        net_threading = np.round(net / TWO_PI).astype(int)
        transitions.append({
            "t_interval": [lo, hi],
            "class_before": None if r1.class_label is None else list(r1.class_label),
            "class_after": None if r2.class_label is None else list(r2.class_label),
            "flips": flips,
            "flipped_bits": int(sum(sum(v.values()) for v in flips.values())),
            "net_threading": {"x": int(net_threading[0]), "y": int(net_threading[1])},
            "net_drift": {"x": float(net[0] / TWO_PI), "y": float(net[1] / TWO_PI)},
            "boundary_crossings": {"x": int(abs(net_threading[0])),
                                   "y": int(abs(net_threading[1]))},
            "wrap_events": wraps,
            "tracks_without_charge": unknown,
        })
    total = int(sum(tr["flipped_bits"] for tr in transitions))
    return {"transitions": transitions, "total_flipped_bits": total,
            "intervals": len(ivs)}
