#!/usr/bin/env python3
"""Sweep the semigroup-kernel L^1 norm and minimum over the stratification
parameter: the excess over 1 (and the negative dip) quantify how far the
anisotropic semigroup sits from a maximum principle.

Writes kernel_l1_sweep.dat (gnuplot-ready) to the output directory.
"""

import argparse
import os

from qg3.grid import Grid3
from qg3.params import PhysicalParams
from qg3.semigroup import compute_K1


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nu", type=float, default=1.0)
    ap.add_argument("--nu-prime", type=float, default=5.0)
    ap.add_argument("--F-values", default="0.25,0.5,0.75,1.0")
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--L", type=float, default=64.0)
    ap.add_argument("--output-dir", default="qg3-out")
    args = ap.parse_args()

    grid = Grid3(args.n, args.L)
    os.makedirs(args.output_dir, exist_ok=True)
    path = os.path.join(args.output_dir, "kernel_l1_sweep.dat")
    with open(path, "w") as fh:
        fh.write("# F l1_norm min_value envelope\n")
        for F in (float(x) for x in args.F_values.split(",")):
            ker = compute_K1(PhysicalParams(args.nu, args.nu_prime, F), grid)
            fh.write(f"{F} {ker.l1_norm:.10e} {ker.min_value:.10e} "
                     f"{ker.envelope_const:.10e}\n")
            print(f"F={F}: |K1|_L1 = {ker.l1_norm:.6f}, min = {ker.min_value:.3e}")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
