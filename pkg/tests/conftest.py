import numpy as np

from igamf import KnotVector, make_uniform_knots


def perturbed_knots(p, n_el, seed=0, amount=0.25):
    """Open knot vector with randomly jittered interior breakpoints."""
    kv = make_uniform_knots(p, n_el)
    knots = np.asarray(kv.knots, dtype=float).copy()
    h = 1.0 / n_el
    rng = np.random.default_rng(seed)
    interior = slice(p + 1, len(knots) - p - 1)
    knots[interior] += amount * h * rng.uniform(-1, 1, knots[interior].size)
    assert np.all(np.diff(knots) >= 0)
    return KnotVector(p, knots)
