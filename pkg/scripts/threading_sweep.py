"""Sweep between two FC states and report EP creation, threading and the flipped bit.

Usage: python scripts/threading_sweep.py --start 0,0 --end 1,0 [--grid 128] [--t-count 64]
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

from nhtopo import io
from nhtopo.model import builtin_FC
from nhtopo.scan import ModelFamily, default_perturbation, sweep, threading_report


def _pair(text: str) -> tuple[int, int]:
    a, b = text.split(",")
    return int(a), int(b)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--start", type=_pair, default=(0, 0))
    ap.add_argument("--end", type=_pair, default=(1, 0))
    ap.add_argument("--grid", type=int, default=128)
    ap.add_argument("--t-count", type=int, default=64)
    ap.add_argument("--perturb", type=float, default=0.1)
    ap.add_argument("--out", type=Path, default=None, help="write sweep.json and threading.json")
    args = ap.parse_args()

    start, end = builtin_FC(*args.start), builtin_FC(*args.end)
    pert = default_perturbation(2, args.perturb) if args.perturb > 0 else None
    t0 = time.perf_counter()
    res = sweep(ModelFamily.linear(start, end, pert), args.t_count, (args.grid, args.grid))
    rep = threading_report(res)
    print(f"FC{args.start} -> FC{args.end}: {len(res.t)} t-samples "
          f"({time.perf_counter() - t0:.1f}s)")
    for iv in res.intervals:
        print(f"  EP-free t in [{iv['t_start']:.4f}, {iv['t_end']:.4f}]  "
              f"class {iv['report'].class_label}")
    for ev in res.events:
        lo, hi = ev["t_interval"]
        print(f"  {ev['kind']:<18} track {ev['track']}  t in [{lo:.6f}, {hi:.6f}]"
              + (f"  axis {ev['axis']}" if "axis" in ev else ""))
    for tr in rep["transitions"]:
        print(f"  {tr['class_before']} -> {tr['class_after']}: flips x={tr['flips']['x']} "
              f"y={tr['flips']['y']}  net threading {tr['net_threading']}")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        io.write_json(args.out / "sweep.json", res.to_dict())
        io.write_json(args.out / "threading.json", rep)


if __name__ == "__main__":
    main()
