"""Manufactured benchmark problems; loads and boundary data come from 4th-order jets."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import jets
from .jets import jet_eval


@dataclass(frozen=True)
class BenchmarkProblem:
    name: str
    u: Callable
    domain: str = "square"
    homogeneous: bool = True
    description: str = ""

    def jet(self, x, y) -> jets.Jet4:
        return jet_eval(self.u, x, y)

    def value(self, x, y):
        return self.jet(x, y).value

    def gradient(self, x, y):
        return self.jet(x, y).gradient

    def hessian(self, x, y):
        return self.jet(x, y).hessian

    def f(self, x, y):
        return self.jet(x, y).bilaplacian

    def g_d(self, x, y):
        return self.value(x, y)

    def g_n(self, x, y, normal):
        ux, uy = self.gradient(x, y)
        return ux * normal[0] + uy * normal[1]

    @property
    def domain_area(self) -> float:
        return 0.75 if self.domain == "lshape" else 1.0


def _ex1(x, y):
    return 10 * x**2 * y**2 * (1 - x) ** 2 * (1 - y) ** 2 * jets.sin(np.pi * x)


def _ex1_inhom(x, y):
    return _ex1(x, y) + x**2 + y**2


def _ex2(x, y):
    return x * y * (1 - x) * (1 - y) * jets.exp(-1000 * ((x - 0.5) ** 2 + (y - 0.117) ** 2))


def _ex3(delta: float):
    def u(x, y):
        return ((x - 0.5) ** 2 + (y - 0.5) ** 2 + delta) ** (5.0 / 6.0)
    return u


PATCH_COEFFS = (0.3, -1.2, 0.7, 1.5, -0.8, 2.1)


def quadratic(coeffs) -> Callable:
    c0, c1, c2, c3, c4, c5 = coeffs

    def u(x, y):
        return c0 + c1 * x + c2 * y + c3 * x * x + c4 * x * y + c5 * y * y
    return u


def get_problem(name: str, delta: float = 1e-6, coeffs=PATCH_COEFFS) -> BenchmarkProblem:
    if name == "ex1":
        return BenchmarkProblem("ex1", _ex1, "square", True, "smooth solution, clamped")
    if name == "ex1-inhom":
        return BenchmarkProblem("ex1-inhom", _ex1_inhom, "square", False, "smooth solution, inhomogeneous data")
    if name == "ex2":
        return BenchmarkProblem("ex2", _ex2, "square", True, "steep bump at (0.5, 0.117)")
    if name == "ex3":
        if delta <= 0:
            raise ValueError("ex3 needs delta > 0 (the load is singular at the re-entrant corner)")
        return BenchmarkProblem("ex3", _ex3(delta), "lshape", False, f"corner singularity, delta={delta:g}")
    if name == "patch":
        return BenchmarkProblem("patch", quadratic(coeffs), "square", False, "quadratic patch test")
    raise ValueError(f"unknown problem {name!r}")


PROBLEMS = ("ex1", "ex1-inhom", "ex2", "ex3", "patch")
