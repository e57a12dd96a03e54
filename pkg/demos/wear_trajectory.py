"""How per-operation latency grows as a location accumulates cycles.

Simulates one chip per selected class and prints the latency at decade
checkpoints, plus the multiplier over the fresh value.  With --out the
full per-cycle trace of the first class goes to a plot-ready CSV.
"""

import argparse

import numpy as np

from nvmsig.chipsim import latency_block, load_catalog, new_chip

CHECKPOINTS = [0, 100, 1000, 5000, 10000, 20000, 30000, 50000]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--classes", default="0,3,6", help="comma list of class tags")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", help="write the first class's full trace CSV here")
    args = ap.parse_args()

    catalog = {s.class_tag: s for s in load_catalog()}
    tags = [int(t) for t in args.classes.split(",")]

    header = "cycles".ljust(8) + "".join(f"{c:>12}" for c in CHECKPOINTS)
    print(header)
    print("-" * len(header))
    for tag in tags:
        spec = catalog[tag]
        chip = new_chip(spec, args.seed)
        trace = latency_block(chip, addr=0, n=CHECKPOINTS[-1] + 1)
        row = [float(trace[c]) for c in CHECKPOINTS]
        label = f"{spec.manufacturer} {spec.capacity_label}"
        print(f"class {tag}".ljust(8)
              + "".join(f"{v:>11.2f}u" for v in row) + f"  {label}")
        mult = [v / row[0] for v in row]
        print("  x fresh" + "".join(f"{m:>11.2f} " for m in mult))
        if args.out and tag == tags[0]:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write("cycle,latency_us\n")
                for i, v in enumerate(trace):
                    fh.write(f"{i},{v:.6f}\n")
            print(f"  wrote {args.out} ({trace.size} rows)")
    print("\nlatency climbs with accumulated cycles; the multiplier at 10k+ "
          "cycles is what the recycled-chip check keys on.")


if __name__ == "__main__":
    main()
