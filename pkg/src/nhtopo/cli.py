"""Command-line front end: ``nhtopo {classify,eps,arcs,braid,scan,surface}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import io
from .errors import ConfigurationError, NHTopoError
from .model import BlochModel, builtin, load_model
from .scan import ModelFamily, default_perturbation, sweep, threading_report
from .surface import flagged_clusters, polyline_text, sheet_meshes, write_meshes
from .topology import braid_word, classify, degeneracy_contours, invariants, locate_eps
from .topology.exceptional import EP_CSV_HEADER, ep_rows

log = logging.getLogger("nhtopo")

COMMANDS = ("classify", "eps", "arcs", "braid", "scan", "surface")
CATEGORY = {2: "configuration", 3: "numerical", 4: "degeneracy", 5: "geometry", 1: "error"}


@dataclass
class RunConfig:
    command: str
    builtin: str | None = None
    params: tuple = ()
    model: str | None = None
    grid: tuple[int, int] = (64, 64)
    samples: int = 512
    offset: float = 1.0
    axis: str = "x"
    tol_ep: float = 1e-10
    out: str = "nhtopo-out"
    format: str = "json"
    kind: str = "real"
    # scan only
    to_builtin: str | None = None
    to_params: tuple = ()
    to_model: str | None = None
    sweep_index: int | None = None
    sweep_range: tuple[float, float] = (0.0, 1.0)
    t_count: int = 64
    perturb: float = 0.1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}")
        if (self.builtin is None) == (self.model is None):
            raise ConfigurationError("give exactly one of --builtin or --model")
        self.grid = tuple(int(g) for g in self.grid)
        if len(self.grid) != 2 or min(self.grid) < 16:
            raise ConfigurationError(f"grid resolution must be at least 16x16, got {self.grid}")
        if self.samples < 16:
            raise ConfigurationError(f"--samples must be at least 16, got {self.samples}")
        if not self.tol_ep > 0:
            raise ConfigurationError(f"--tol-ep must be positive, got {self.tol_ep}")
        if self.axis not in ("x", "y"):
            raise ConfigurationError(f"--axis must be x or y, got {self.axis!r}")
        if self.format not in ("csv", "json"):
            raise ConfigurationError(f"--format must be csv or json, got {self.format!r}")
        if self.kind not in ("real", "imaginary"):
            raise ConfigurationError(f"--kind must be real or imaginary, got {self.kind!r}")
        if self.perturb < 0:
            raise ConfigurationError(f"--perturb must be non-negative, got {self.perturb}")
        if self.t_count < 8:
            raise ConfigurationError(f"--t-count must be at least 8, got {self.t_count}")
        self.params = tuple(self.params)
        self.to_params = tuple(self.to_params)
        self.sweep_range = tuple(self.sweep_range)

    @classmethod
    def from_dict(cls, d) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigurationError(f"unknown run-config keys: {', '.join(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def load_model(self) -> BlochModel:
        if self.model is not None:
            return load_model(self.model)
        return builtin(self.builtin, self.params)

    def family(self) -> ModelFamily:
        start = self.load_model()
        if self.sweep_index is not None:
            if self.builtin is None:
                raise ConfigurationError("--sweep-index needs a --builtin model")
            return ModelFamily.builtin_sweep(self.builtin, self.params, self.sweep_index,
                                             *self.sweep_range)
        if (self.to_builtin is None) == (self.to_model is None):
            raise ConfigurationError("scan needs exactly one of --to-builtin, --to-model "
                                     "or a --sweep-index")
        end = load_model(self.to_model) if self.to_model else builtin(self.to_builtin,
                                                                     self.to_params)
        pert = default_perturbation(start.bands, self.perturb) if self.perturb > 0 else None
        return ModelFamily.linear(start, end, pert)


def _floats(text: str) -> tuple:
    if text.strip() == "":
        return ()
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse parameter list {text!r}") from exc


def _grid(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise ConfigurationError(f"grid must look like WxH, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_argument_group("model source")
    src.add_argument("--builtin", choices=("FA", "FC", "TEST"), help="built-in model name")
    src.add_argument("--params", default="", help="comma-separated builtin parameters")
    src.add_argument("--model", help="path to a JSON model config")
    opt = common.add_argument_group("analysis")
    opt.add_argument("--grid", default="64x64", help="BZ grid resolution WxH (default 64x64)")
    opt.add_argument("--samples", type=int, default=512, help="loop samples (default 512)")
    opt.add_argument("--offset", type=float, default=1.0,
                     help="loop offset; classify uses it for both base coordinates (default 1.0)")
    opt.add_argument("--axis", default="x", help="braid loop axis x|y (default x)")
    opt.add_argument("--tol-ep", type=float, default=1e-10,
                     help="EP residual tolerance (default 1e-10)")
    opt.add_argument("--kind", default="real", help="arcs contour kind real|imaginary (default real)")
    outg = common.add_argument_group("output")
    outg.add_argument("--out", default="nhtopo-out", help="output directory (default nhtopo-out)")
    outg.add_argument("--format", default="json", help="table format csv|json (default json)")
    outg.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="nhtopo", description="Topology of non-Hermitian Bloch spectra on the 2-torus.",
        epilog="Exit status: 0 ok, 2 configuration, 3 numerical, 4 degeneracy, 5 geometry. "
               "NHTOPO_THREADS caps worker threads in scan.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("classify", parents=[common], help="monodromy invariants and class")
    sub.add_parser("eps", parents=[common], help="exceptional points with charges")
    sub.add_parser("arcs", parents=[common], help="degeneracy contours (Fermi arcs and cuts)")
    sub.add_parser("braid", parents=[common], help="braid word along one loop")
    sub.add_parser("surface", parents=[common], help="sheet meshes and cut polylines")
    scan = sub.add_parser("scan", parents=[common], help="EP sweep between two models")
    scan.add_argument("--to-builtin", choices=("FA", "FC", "TEST"), help="end model builtin")
    scan.add_argument("--to-params", default="", help="end model parameters")
    scan.add_argument("--to-model", help="end model config path")
    scan.add_argument("--sweep-index", type=int,
                      help="sweep this builtin parameter instead of interpolating")
    scan.add_argument("--range", default="0,1", help="lo,hi for --sweep-index, e.g. --range=-0.1,0.1 (default 0,1)")
    scan.add_argument("--t-count", type=int, default=64, help="base t samples (default 64)")
    scan.add_argument("--perturb", type=float, default=0.1,
                      help="strength of the i-term added to H01; 0 disables (default 0.1)")
    return parser


def config_from_args(ns) -> RunConfig:
    d = {"command": ns.command, "builtin": ns.builtin, "params": _floats(ns.params),
         "model": ns.model, "grid": _grid(ns.grid), "samples": ns.samples,
         "offset": ns.offset, "axis": ns.axis, "tol_ep": ns.tol_ep, "out": ns.out,
         "format": ns.format, "kind": ns.kind}
    if ns.command == "scan":
        rng = _floats(ns.range)
        if len(rng) != 2:
            raise ConfigurationError(f"--range needs two values, got {ns.range!r}")
        d.update(to_builtin=ns.to_builtin, to_params=_floats(ns.to_params),
                 to_model=ns.to_model, sweep_index=ns.sweep_index, sweep_range=rng,
                 t_count=ns.t_count, perturb=ns.perturb)
    return RunConfig.from_dict(d)


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_classify(cfg: RunConfig) -> int:
    model = cfg.load_model()
    eps = locate_eps(model, cfg.grid, tol=cfg.tol_ep)
    report = invariants(model, (cfg.offset, cfg.offset), cfg.samples, eps=eps)
    doc = report.to_dict()
    doc["classification"] = classify(report).to_dict()
    io.write_json(_outdir(cfg) / "report.json", doc)
    print(report.summary())
    return 0


def cmd_eps(cfg: RunConfig) -> int:
    eps = locate_eps(cfg.load_model(), cfg.grid, tol=cfg.tol_ep)
    out = _outdir(cfg)
    if cfg.format == "csv":
        io.write_csv(out / "eps.csv", EP_CSV_HEADER, ep_rows(eps))
    else:
        io.write_json(out / "eps.json", {"schema": "nhtopo.eps/1",
                                         "eps": [e.to_dict() for e in eps]})
    known = [e.charge for e in eps if e.charge is not None]
    print(f"eps={len(eps)} total_charge={sum(known):g}")
    return 0


def cmd_arcs(cfg: RunConfig) -> int:
    model = cfg.load_model()
    eps = locate_eps(model, cfg.grid, tol=cfg.tol_ep)
    contours = degeneracy_contours(model, cfg.kind, cfg.grid, eps=eps)
    out = _outdir(cfg)
    if cfg.format == "csv":
        rows = []
        for c_id, c in enumerate(contours):
            for v_id, (x, y) in enumerate(c.points):
                rows.append((c_id, c.kind, c.closed, c.winding[0], c.winding[1],
                             c.contractible, c.bands[0], c.bands[1], v_id, x, y))
        io.write_csv(out / "contours.csv", ("contour", "kind", "closed", "winding_x",
                                            "winding_y", "contractible", "band_p", "band_q",
                                            "vertex", "kx", "ky"), rows)
    else:
        io.write_json(out / "contours.json", {"schema": "nhtopo.contours/1",
                                              "contours": [c.to_dict() for c in contours]})
    print(f"contours={len(contours)}")
    for c in contours:
        print(f"kind={c.kind} closed={str(c.closed).lower()} winding=({c.winding[0]},"
              f"{c.winding[1]}) contractible={str(c.contractible).lower()}")
    return 0


def cmd_braid(cfg: RunConfig) -> int:
    bw = braid_word(cfg.load_model(), cfg.axis, cfg.offset, cfg.samples)
    out = _outdir(cfg)
    if cfg.format == "csv":
        io.write_csv(out / "braid.csv", ("position", "generator"),
                     list(enumerate(bw.generators)))
        io.write_csv(out / "braid_permutation.csv", ("strand", "image"),
                     list(enumerate(bw.permutation())))
    else:
        io.write_json(out / "braid.json", {"schema": "nhtopo.braid/1", **bw.to_dict()})
    word = " ".join(f"s{g}" if g > 0 else f"s{-g}^-1" for g in bw.generators) or "e"
    print(f"word={word} length={len(bw)} permutation={list(bw.permutation())}")
    return 0


def cmd_scan(cfg: RunConfig) -> int:
    result = sweep(cfg.family(), cfg.t_count, cfg.grid, offsets=(cfg.offset, cfg.offset),
                   samples=cfg.samples)
    out = _outdir(cfg)
    io.write_json(out / "sweep.json", result.to_dict())
    rep = threading_report(result)
    io.write_json(out / "threading.json", rep)
    if cfg.format == "csv":
        rows = [(t, *r) for t, eps in zip(result.t, result.eps) for r in ep_rows(eps)]
        io.write_csv(out / "sweep_eps.csv", ("t",) + EP_CSV_HEADER, rows)
        io.write_csv(out / "sweep_events.csv", ("kind", "axis", "track", "t_lo", "t_hi"),
                     [(e["kind"], e.get("axis", ""), e["track"], *e["t_interval"])
                      for e in result.events])
    for iv in result.intervals:
        label = iv["report"].class_label
        print(f"interval t=[{iv['t_start']:.6f},{iv['t_end']:.6f}] class="
              f"{'none' if label is None else '(' + ','.join(map(str, label)) + ')'}")
    print(f"events={len(result.events)} tracks={len(result.tracks)} "
          f"flipped_bits={rep['total_flipped_bits']}")
    for adv in result.advisories:
        print(f"advisory: {adv['message']}", file=sys.stderr)
    return 0


def cmd_surface(cfg: RunConfig) -> int:
    model = cfg.load_model()
    meshes = sheet_meshes(model, cfg.grid)
    out = _outdir(cfg)
    write_meshes(meshes, out)
    cuts = degeneracy_contours(model, "real", cfg.grid) if model.bands >= 2 else []
    for i, c in enumerate(cuts):
        (out / f"cut_{i}.txt").write_text(polyline_text(c))
    print(f"sheets={len(meshes)} cuts={len(cuts)} "
          f"flagged_clusters={flagged_clusters(meshes[0].flags)}")
    return 0


DISPATCH = {"classify": cmd_classify, "eps": cmd_eps, "arcs": cmd_arcs, "braid": cmd_braid,
            "scan": cmd_scan, "surface": cmd_surface}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(ns)
        return DISPATCH[cfg.command](cfg)
    except NHTopoError as exc:
        code, msg = exc.exit_code, str(exc)
    except (ValueError, FileNotFoundError) as exc:
        code, msg = ConfigurationError.exit_code, str(exc)
    print(f"nhtopo: {CATEGORY[code]} error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
