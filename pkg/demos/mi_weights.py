"""How confusion tables turn into fusion weights.

Three classifiers see the same calibration set. One is perfect, one is
informative but noisy, one guesses. The normalized mutual information of
each one-vs-rest table becomes that classifier's weight for the class.

Run with ``python3 demos/mi_weights.py``.
"""

import numpy as np

from mifusion.ensemble import fit_fusion, predict_weighted
from mifusion.metrics import ConfusionCounts, mutual_information, normalized_mi

CLASSES = ("Normal", "PVC", "APB", "RBBB", "LBBB")


def main():
    print("single tables (tp, tn, fp, fn) -> I in nats, normalized weight")
    for counts in [(50, 50, 0, 0), (40, 45, 5, 10), (25, 25, 25, 25), (0, 0, 50, 50)]:
        c = ConfusionCounts(*counts)
        print(f"  {counts!s:>18}  I={mutual_information(c):.4f}  n={normalized_mi(c):.4f}")

    rng = np.random.default_rng(0)
    y = rng.integers(0, 5, 1000)
    truth = np.eye(5)[y]
    outputs = np.stack([
        truth,
        truth * 0.5 + rng.uniform(size=(1000, 5)) * 0.6,
        rng.uniform(size=(1000, 5)),
    ], axis=1)
    fusion = fit_fusion(outputs[:500], y[:500])

    print("\nfitted weights (rows: perfect, noisy, guessing)")
    print("          " + "".join(f"{c:>8}" for c in CLASSES))
    for name, row in zip(("perfect", "noisy", "guess"), fusion.weights):
        print(f"  {name:<8}" + "".join(f"{w:8.3f}" for w in row))

    _, label = predict_weighted(outputs[500:], fusion)
    print(f"\nweighted ensemble accuracy on held-out half: {np.mean(label == y[500:]):.3f}")


if __name__ == "__main__":
    main()
