from __future__ import annotations

import numpy as np
import pytest

from ipvem.adapt import RefinePlan, refine_mesh
from ipvem.mesh import generate_square_mesh

ACCEPTANCE_LINES: list[str] = []


def random_polygon(rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Shape-regular, counter-clockwise polygon with 3-8 vertices, randomly scaled and shifted."""
    n = int(rng.integers(3, 9)) if n is None else n
    ang = 2 * np.pi * (np.arange(n) + rng.uniform(-0.25, 0.25, n)) / n
    rad = rng.uniform(0.75, 1.0, n)
    scale = 10.0 ** rng.uniform(-2, 0)
    shift = rng.uniform(-1, 1, 2)
    return shift + scale * np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])


def mixed_mesh():
    """3x3 unit-square grid with the centre cell split: four quads plus four pentagon neighbours."""
    base = generate_square_mesh(3)
    return refine_mesh(base, RefinePlan((4,), (4,)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
