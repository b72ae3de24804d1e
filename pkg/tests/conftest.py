import numpy as np
import pytest

from iqrip.dist import Distribution, normalize


def random_dist(rng: np.random.Generator, lo: int = 1, hi: int = 50, alpha: float | None = None) -> Distribution:
    """Random distribution with support size in [lo, hi] and scattered ids."""
    n = int(rng.integers(lo, hi + 1))
    a = alpha if alpha is not None else float(rng.choice([0.1, 0.5, 1.0, 5.0]))
    w = rng.dirichlet(np.full(n, a))
    w = np.maximum(w, 1e-12)
    ids = rng.choice(10 * n + 10, size=n, replace=False)
    return normalize(w, ids)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def toy_model():
    from iqrip.toy_lm import default_model

    return default_model()


# -- acceptance reporting ---------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> str:
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
