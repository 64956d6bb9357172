import numpy as np

from combilab.anticonc import AtomicDistribution

EPS_CALIBRATION_GRID = [0.1 * k for k in range(1, 11)]


def esseen_calibration_corpus(count=100):
    """The fixed corpus behind the recorded window-bound constant.

    Must stay bit-identical: the packaged constant was computed on exactly
    these laws. Single counter-based generator, draws in the order
    (k, scale, values, masses) per law.
    """
    g = np.random.Generator(np.random.Philox(key=[12345, 0]))
    laws = []
    for _ in range(count):
        k = int(g.integers(2, 12))
        scale = float(g.choice([0.3, 1.0, 3.0]))
        vals = g.normal(0.0, scale, size=k)
        probs = g.dirichlet(np.ones(k))
        laws.append(AtomicDistribution.from_pairs(vals, probs))
    return laws
