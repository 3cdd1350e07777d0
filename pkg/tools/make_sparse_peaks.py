"""Regenerate ``src/mhdm/experiments/data/sparse_peaks.csv``.

Eight positive peaks on a 100-node grid, away from the boundary, with
amplitudes uniform in [0.2, 1]. Neighbouring peaks are at least ten nodes
apart: four standard deviations of the sigma = 0.025 blur, so the peaks
stay resolvable after convolution. The experiments rescale the signal, so
only the shape matters.
"""

import sys

import numpy as np

SEED = 20230817
N = 100
PEAKS = 8
MIN_GAP = 10
LO, HI = 8, N - 8


def generate(seed=SEED):
    rng = np.random.default_rng(seed)
    # uniform over admissible configurations: sample a compressed range, then spread
    slack = (PEAKS - 1) * (MIN_GAP - 1)
    y = np.sort(rng.choice(np.arange(LO, HI - slack), size=PEAKS, replace=False))
    pos = y + (MIN_GAP - 1) * np.arange(PEAKS)
    amp = rng.uniform(0.2, 1.0, size=PEAKS)
    return pos, amp


def main(path):
    pos, amp = generate()
    with open(path, "w") as fh:
        fh.write(f"# sparse-peaks ground truth, n={N}, seed={SEED}, min gap={MIN_GAP}\n")
        fh.write("index,amplitude\n")
        for i, a in zip(pos, amp):
            fh.write(f"{int(i)},{float(a)!r}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/mhdm/experiments/data/sparse_peaks.csv")
