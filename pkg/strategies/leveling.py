"""
Leveling Strategy

Hides an extremum among look-alikes: every non-extremal coefficient is
raised toward the largest one, and the extremal coefficients give back the
total increase in equal shares, so the coefficient mean stays the same.
"""

import numpy as np

from engine.errors import ConfigError


class Strategy:
    """
    Parameters:
        strength: fraction of the gap to the maximum that is closed (default: 1.0,
                  0 leaves the coefficients untouched)
    """

    def __init__(self, strength=1.0):
        strength = float(strength)
        if not 0.0 <= strength <= 1.0:
            raise ConfigError(f"leveling strength must lie in [0, 1], got {strength}")
        self.strength = strength

    def propose_coefficients(self, approx_coeffs, extrema):
        coeffs = np.asarray(approx_coeffs, dtype=float)
        extremal = np.zeros(coeffs.size, dtype=bool)
        extremal[list(extrema)] = True
        if not extremal.any() or extremal.all():
            return coeffs.copy()

        raised = self.strength * (coeffs.max() - coeffs[~extremal])
        proposed = coeffs.copy()
        proposed[~extremal] += raised
        proposed[extremal] -= raised.sum() / extremal.sum()
        return proposed
