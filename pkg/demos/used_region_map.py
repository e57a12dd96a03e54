"""Map which addresses of a chip have been written, from latencies alone.

Builds a chip, wears a handful of secret spots to different depths,
scans the full address space once, and asks the locator to recover the
spots from the latency map.  Prints the ground truth next to what the
scan found, including the spots that sit below the flag ratio and are
expected to stay invisible.
"""

import argparse

import numpy as np

from nvmsig.chipsim import cycle_location, full_chip_scan, load_catalog, mean_latency_curve, new_chip
from nvmsig.detector import locate_used_regions

SPOT_CYCLES = (1_000, 5_000, 10_000, 20_000, 30_000, 50_000)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--class-tag", type=int, default=2)
    ap.add_argument("--flag-ratio", type=float, default=1.5)
    args = ap.parse_args()

    spec = next(s for s in load_catalog() if s.class_tag == args.class_tag)
    chip = new_chip(spec, args.seed)

    rng = np.random.default_rng(args.seed)
    addrs = np.sort(rng.choice(spec.num_locations, size=len(SPOT_CYCLES), replace=False))
    spots = list(zip(addrs.tolist(), SPOT_CYCLES))
    for addr, cycles in spots:
        cycle_location(chip, addr, cycles)

    lat = full_chip_scan(chip)
    regions = locate_used_regions(lat, flag_ratio=args.flag_ratio)

    print(f"class {spec.class_tag} chip, {spec.num_locations} locations, "
          f"flag ratio {args.flag_ratio:g}\n")
    print("ground truth:")
    for addr, cycles in spots:
        drift = mean_latency_curve(spec, [cycles])[0] / spec.base_latency_us
        visible = "visible" if drift >= args.flag_ratio else "below flag ratio"
        print(f"  addr {addr:>4}  {cycles:>6} cycles  "
              f"expected lift x{drift:.2f}  ({visible})")

    print("\nscan found:")
    if not regions:
        print("  no used regions")
    for r in regions:
        span = (f"addr {r.start_addr}" if r.start_addr == r.end_addr
                else f"addrs {r.start_addr}-{r.end_addr}")
        print(f"  {span}  peak lift x{r.peak_ratio:.2f}")


if __name__ == "__main__":
    main()
