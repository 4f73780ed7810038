"""Shared helpers for the test suite."""

import numpy as np


def companion_cubic_roots(E, nu):
    """Independent root oracle for x^3 - 2E x^2 + E^2 x - nu^2: eigenvalues
    of the companion matrix (np.roots), sorted by real part then imaginary."""
    r = np.roots([1.0, -2.0 * complex(E), complex(E) ** 2, -float(nu) ** 2])
    return np.array(sorted(r, key=lambda z: (z.real, z.imag)))
