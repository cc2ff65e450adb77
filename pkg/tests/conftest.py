"""Shared fixtures: compiled-kernel warmup so timed tests measure steady
state, not JIT compilation (first-ever run on a machine pays the compile
cost here, where no stopwatch is running; later runs hit the disk cache).
Also the end-of-run acceptance summary printer."""
import numpy as np
import pytest

from relaxbp import engine, models, treegame

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance gates")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    tree = models.gen_tree(31)
    grid, _ = models.generate(models.ModelSpec("ising", (4, 4), seed=1))
    for variant in engine.VARIANTS:
        engine.run(tree, variant=variant, threshold=1e-6, workers=1)
    engine.run(tree, variant="residual", scheduler="mq", workers=2,
               threshold=1e-6)
    engine.run(tree, variant="residual", scheduler="sim", sim_q=2,
               threshold=1e-6)
    engine.run(grid, variant="residual", threshold=1e-3)
    inst = treegame.build_uniform_tree("full-binary", 63)
    treegame.run_tree_game(inst, 4)
    treegame.run_optimal_game(inst, 4)
    yield


@pytest.fixture()
def rng():
    return np.random.default_rng(7)
