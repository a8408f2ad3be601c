"""Independent finite-difference oracle for fourth derivatives, evaluated in mpmath."""
from __future__ import annotations

import mpmath as mp

# exact solutions written directly in mpmath, independent of the jet code
MP_SOLUTIONS = {
    "ex1": lambda x, y: 10 * x**2 * y**2 * (1 - x) ** 2 * (1 - y) ** 2 * mp.sin(mp.pi * x),
    "ex1-inhom": lambda x, y: 10 * x**2 * y**2 * (1 - x) ** 2 * (1 - y) ** 2 * mp.sin(mp.pi * x) + x**2 + y**2,
    "ex2": lambda x, y: x * y * (1 - x) * (1 - y) * mp.exp(-1000 * ((x - mp.mpf("0.5")) ** 2
                                                               + (y - mp.mpf("0.117")) ** 2)),
}


def mp_ex3(delta):
    d = mp.mpf(delta)
    return lambda x, y: ((x - mp.mpf("0.5")) ** 2 + (y - mp.mpf("0.5")) ** 2 + d) ** (mp.mpf(5) / 6)


_D4 = (1, -4, 6, -4, 1)
_D2 = (1, -2, 1)


def _bilaplacian_fd(u, x, y, h):
    """Central differences: u_xxxx + 2 u_xxyy + u_yyyy with step h (error O(h^2))."""
    xxxx = sum(c * u(x + (i - 2) * h, y) for i, c in enumerate(_D4))
    yyyy = sum(c * u(x, y + (i - 2) * h) for i, c in enumerate(_D4))
    xxyy = sum(a * b * u(x + (i - 1) * h, y + (j - 1) * h)
               for i, a in enumerate(_D2) for j, b in enumerate(_D2))
    return (xxxx + 2 * xxyy + yyyy) / h**4


def richardson_bilaplacian(u, x, y, h=1e-5, dps=60) -> float:
    """Two-level Richardson extrapolation (eliminates the h^2 term) of the central-difference bilaplacian.

    The small default step resolves the steep far field of the Gaussian bump,
    where the local length scale is about 1 / (2000 r); the working precision
    keeps the h^-4 cancellation harmless.
    """
    with mp.workdps(dps):
        x, y, h = mp.mpf(x), mp.mpf(y), mp.mpf(h)
        coarse = _bilaplacian_fd(u, x, y, h)
        fine = _bilaplacian_fd(u, x, y, h / 2)
        return float((4 * fine - coarse) / 3)


# below this magnitude doubles are (near) subnormal and carry no relative accuracy
TINY = 1e-300


def relative_deviation(value, ref) -> float:
    return abs(value - ref) / max(abs(ref), TINY)
