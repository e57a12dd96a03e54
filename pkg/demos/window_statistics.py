"""Latency statistics in windows before and after wear checkpoints.

For every class in the catalog: mean latency in the 50-cycle window just
before and just after each checkpoint, and the elevation over the
class's first-window mean.  The strictly rising AFTER column is the
signal that separates lifetime stages.
"""

import numpy as np

from nvmsig.chipsim import load_catalog
from nvmsig.protocol import Side, latency_stats


def main():
    catalog = load_catalog()
    stats = latency_stats(catalog)
    by_class = {}
    for w in stats:
        by_class.setdefault(w.class_tag, {})[(w.checkpoint, w.side)] = w

    checkpoints = sorted({w.checkpoint for w in stats})
    print("class  " + "".join(f"{f'@{c}':>18}" for c in checkpoints)
          + "   (cells: before -> after mean, us)")
    for tag in sorted(by_class):
        cells = []
        for c in checkpoints:
            before = by_class[tag][(c, Side.BEFORE)]
            after = by_class[tag][(c, Side.AFTER)]
            cells.append(f"{before.mean:>8.1f}->{after.mean:<8.1f}")
        print(f"{tag:<7}" + "".join(cells))

    print("\nelevation of the last AFTER window over the first BEFORE window:")
    for tag in sorted(by_class):
        first = by_class[tag][(checkpoints[0], Side.BEFORE)]
        last = by_class[tag][(checkpoints[-1], Side.AFTER)]
        print(f"  class {tag}: x{last.mean / first.mean:.2f} "
              f"(stdev {last.stdev:.2f} us over n={last.n})")


if __name__ == "__main__":
    main()
