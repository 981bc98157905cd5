"""
Permutation Strategy

Moves each extremal coefficient to a target position by swapping it with
the coefficient found there. A permutation, so the mean cannot change.
"""

import numpy as np

from engine.errors import EmptyTargets, InvalidTargets


class Strategy:
    """
    Parameters:
        targets: destination index for each extremum, paired in order
    """

    def __init__(self, targets=None):
        self.targets = [int(t) for t in (targets or [])]

    def propose_coefficients(self, approx_coeffs, extrema):
        if not self.targets:
            raise EmptyTargets("permutation strategy needs at least one target index")
        coeffs = np.asarray(approx_coeffs, dtype=float)
        sources = list(extrema)

        if len(set(self.targets)) != len(self.targets):
            raise InvalidTargets(f"permutation targets must be distinct, got {self.targets}")
        out_of_range = [t for t in self.targets if not 0 <= t < coeffs.size]
        if out_of_range:
            raise InvalidTargets(f"targets {out_of_range} are outside 0..{coeffs.size - 1}")
        clashing = sorted(set(self.targets) & set(sources))
        if clashing:
            raise InvalidTargets(f"targets {clashing} are themselves extrema")
        if len(sources) != len(self.targets):
            raise InvalidTargets(f"{len(sources)} extrema but {len(self.targets)} targets")

        proposed = coeffs.copy()
        for source, target in zip(sources, self.targets):
            proposed[source], proposed[target] = proposed[target], proposed[source]
        return proposed
