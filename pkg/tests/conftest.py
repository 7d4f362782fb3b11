import time

import pytest

from sfdma import data, trainer

# acceptance outcomes, printed once at the end of the run
ACCEPTANCE = []


def record_acceptance(number, passed, detail):
    ACCEPTANCE.append((number, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def default_run():
    """The default desk-scale configuration, trained once per session."""
    config = trainer.TrainConfig()
    spec = config.data
    train_set, test_set = data.make_split(spec.classes, spec.input_dim,
                                          [spec.per_class, spec.test_per_class], spec.spread, config.seed)
    start = time.process_time()
    wall = time.perf_counter()
    result = trainer.train(config, train_set)
    return {
        "result": result,
        "train": train_set,
        "test": test_set,
        "cpu_seconds": time.process_time() - start,
        "wall_seconds": time.perf_counter() - wall,
    }
