"""Watch the FA arc snap: contour count and winding against the detuning delta.

Usage: python scripts/snapping_arc.py [--deltas=-0.2,0.2,17] [--grid 128]
"""
from __future__ import annotations

import argparse

import numpy as np

from nhtopo.model import builtin_FA
from nhtopo.spectral import monodromy
from nhtopo.topology import contour_residual, degeneracy_contours, locate_eps


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--deltas", default="-0.2,0.2,17", help="lo,hi,count")
    ap.add_argument("--grid", type=int, default=128)
    args = ap.parse_args()
    lo, hi, count = args.deltas.split(",")
    deltas = np.linspace(float(lo), float(hi), int(count))
    if 0.0 not in deltas:
        deltas = np.sort(np.append(deltas, 0.0))

    print(f"{'delta':>8} {'eps':>4} {'arcs':>5} {'windings':>18} {'max|Re de|':>11}  pi_x pi_y")
    for d in deltas:
        m = builtin_FA(float(d))
        cs = degeneracy_contours(m, "real", (args.grid, args.grid))
        resid = max((contour_residual(m, c) for c in cs), default=0.0)
        print(f"{d:8.3f} {len(locate_eps(m)):>4} {len(cs):>5} "
              f"{str([c.winding for c in cs]):>18} {resid:11.1e}  "
              f"{monodromy(m, 'x', 1.0)} {monodromy(m, 'y', 1.0)}")


if __name__ == "__main__":
    main()
