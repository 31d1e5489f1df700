import numpy as np
import pytest

from pivotlab.grid import (Grid, MeshFamily, build_geometric, build_uniform, refine_locally_uniform,
                           refine_oscillatory, refine_random)

FAMILIES = [f.value for f in MeshFamily]

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def family_grid(family: str, I: int, seed: int = 0) -> Grid:
    """A grid with exactly ``I`` cells from ``family``.

    Refined families split a base of ``ceil(I/2)`` cells once; for odd ``I``
    the last child is dropped so that the cell count still matches.
    """
    family = MeshFamily.parse(family)
    if family is MeshFamily.UNIFORM:
        return build_uniform(0.0, 15.0, I)
    if family is MeshFamily.GEOMETRIC:
        return build_geometric(1e-3, 20.0, I)
    n_base = (I + 1) // 2
    if family is MeshFamily.OSCILLATORY:
        fine = refine_oscillatory(build_uniform(0.0, 15.0, n_base), 1)
    elif family is MeshFamily.LOCALLY_UNIFORM:
        fine = refine_locally_uniform(build_geometric(1e-3, 20.0, n_base), 1)
    else:
        fine = refine_random(build_geometric(1e-3, 20.0, n_base), 1, seed)
    b = fine.boundaries[: I + 1]
    return Grid(b, family, seed=fine.seed, levels=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid3():
    return build_uniform(0.0, 3.0, 3)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
