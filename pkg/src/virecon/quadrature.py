"""Quadrature rules on the reference triangle and reference edge.

Triangle points are given in barycentric coordinates, weights sum to one
(multiply by the element area).
"""

import numpy as np

# Strang-Fix / Dunavant 6-point rule, exact for degree 4.
_A1 = 0.44594849091596489
_W1 = 0.22338158967801147
_A2 = 0.09157621350977073
_W2 = 0.10995174365532187


def _orbit(a):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


TRI_BARY = np.array(_orbit(_A1) + _orbit(_A2))
TRI_WEIGHTS = np.array([_W1] * 3 + [_W2] * 3)

# 3-point Gauss-Legendre on [0, 1], exact for degree 5.
_G = 0.5 * np.sqrt(3.0 / 5.0)
EDGE_POINTS = np.array([0.5 - _G, 0.5, 0.5 + _G])
EDGE_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0
