"""Benchmark problems with known (or no) exact solutions."""

import numpy as np

from virecon.errors import InvalidArgument
from virecon.mesh import Rectangle
from virecon.vi import ProblemSpec

PI = np.pi


def _heat_smooth():
    def exact(x, y, t):
        return np.exp(-t) * np.sin(PI * x) * np.sin(PI * y)

    def f(x, y, t):
        return (2 * PI ** 2 - 1) * exact(x, y, t)

    def f_t(x, y, t):
        return -f(x, y, t)

    return ProblemSpec(
        name="heat_smooth",
        domain=Rectangle(0.0, 1.0, 0.0, 1.0),
        f=f,
        chi=lambda x, y, t: np.full(np.shape(x), -10.0),
        w0=exact,
        T=0.5,
        exact=exact,
        sigma_exact=lambda x, y, t: np.zeros(np.shape(x)),
        f_t=f_t,
    )


def _bump(x):
    """``[(x - 1/4)(3/4 - x)]^2`` on ``[1/4, 3/4]``, zero elsewhere (C^1)."""
    g = np.maximum(0.0, x - 0.25) * np.maximum(0.0, 0.75 - x)
    return g * g


def _bump_dd(x):
    inside = (x > 0.25) & (x < 0.75)
    g = (x - 0.25) * (0.75 - x)
    return np.where(inside, 2.0 * (1.0 - 2.0 * x) ** 2 - 4.0 * g, 0.0)


def _manufactured_obstacle():
    def exact(x, y, t):
        return np.exp(-t) * _bump(x) * np.sin(PI * y)

    def sigma_exact(x, y, t):
        contact = (x <= 0.25) | (x >= 0.75)
        return np.where(contact, np.exp(-t) * np.sin(PI * y), 0.0)

    def f(x, y, t):
        # w_t - lap(w) - sigma with w_t = -w
        s = np.exp(-t) * np.sin(PI * y)
        phi = _bump(x)
        return s * (-phi - _bump_dd(x) + PI ** 2 * phi) - sigma_exact(x, y, t)

    return ProblemSpec(
        name="manufactured_obstacle",
        domain=Rectangle(0.0, 1.0, 0.0, 1.0),
        f=f,
        chi=lambda x, y, t: np.zeros(np.shape(x)),
        w0=exact,
        T=0.5,
        exact=exact,
        sigma_exact=sigma_exact,
        f_t=lambda x, y, t: -f(x, y, t),
    )


def _pyramid_adaptive():
    def chi(x, y, t):
        return 0.75 - np.maximum(np.abs(x), np.abs(y))

    return ProblemSpec(
        name="pyramid_adaptive",
        domain=Rectangle(-1.0, 1.0, -1.0, 1.0),
        f=lambda x, y, t: np.zeros(np.shape(x)),
        chi=chi,
        w0=lambda x, y, t: np.maximum(0.0, chi(x, y, 0.0)),
        T=0.5,
        f_t=lambda x, y, t: np.zeros(np.shape(x)),
    )


BENCHMARKS = {
    "heat_smooth": _heat_smooth,
    "manufactured_obstacle": _manufactured_obstacle,
    "pyramid_adaptive": _pyramid_adaptive,
}


def benchmark(name):
    try:
        return BENCHMARKS[name]()
    except KeyError:
        raise InvalidArgument(
            f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}") from None
