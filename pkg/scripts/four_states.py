"""Classify the four FC states and print their monodromies, braids and cuts.

Usage: python scripts/four_states.py [--grid 256] [--samples 512] [--out DIR]
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

from nhtopo import io
from nhtopo.model import builtin_FC
from nhtopo.topology import braid_word, degeneracy_contours, invariants, locate_eps


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=256)
    ap.add_argument("--samples", type=int, default=512)
    ap.add_argument("--out", type=Path, default=None, help="write a JSON summary here")
    args = ap.parse_args()

    rows = []
    t0 = time.perf_counter()
    print(f"{'params':>8} {'eps':>4} {'pi_x':>7} {'pi_y':>7} {'class':>7} "
          f"{'braid x':>9} {'braid y':>9}  cuts")
    for a, b in [(0, 0), (1, 0), (0, 1), (1, 1)]:
        m = builtin_FC(a, b)
        eps = locate_eps(m, (args.grid, args.grid))
        r = invariants(m, samples=args.samples, eps=eps)
        bx = braid_word(m, "x", 1.0, args.samples).generators
        by = braid_word(m, "y", 1.0, args.samples).generators
        cuts = [c.winding for c in degeneracy_contours(m, "real", (128, 128))]
        print(f"{str((a, b)):>8} {len(eps):>4} {str(r.pi_x):>7} {str(r.pi_y):>7} "
              f"{str(r.class_label):>7} {str(bx):>9} {str(by):>9}  {cuts}")
        rows.append({"params": [a, b], "class": list(r.class_label), "pi_x": list(r.pi_x),
                     "pi_y": list(r.pi_y), "braid_x": list(bx), "braid_y": list(by),
                     "cut_windings": [list(w) for w in cuts]})
    print(f"elapsed {time.perf_counter() - t0:.2f}s")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        io.write_json(args.out / "four_states.json", {"states": rows})


if __name__ == "__main__":
    main()
