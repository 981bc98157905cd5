"""
Manual coefficients

Replaces the approximation coefficients with a vector chosen by hand, e.g.
the values picked so that the regions with the most respondents stop
standing out.
"""

import numpy as np

from engine.errors import LengthMismatch


class Strategy:
    """
    Parameters:
        coefficients: the new approximation coefficients, one per old coefficient
    """

    def __init__(self, coefficients):
        self.coefficients = np.asarray(coefficients, dtype=float)

    def propose_coefficients(self, approx_coeffs, extrema):
        if self.coefficients.size != len(approx_coeffs):
            raise LengthMismatch(
                f"manual strategy has {self.coefficients.size} coefficients, "
                f"the decomposition has {len(approx_coeffs)}"
            )
        return self.coefficients.copy()
