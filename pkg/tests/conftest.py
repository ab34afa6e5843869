import numpy as np
import pytest

from gmnds.gaussmix import GaussianMixture

ACCEPTANCE_LINES: list[str] = []


def random_gm(seed: int, n: int, G: int, spread: float = 2.0) -> GaussianMixture:
    """Seeded GM with Dirichlet weights, spread-out means and well-conditioned covariances."""
    rng = np.random.default_rng(seed)
    weights = rng.dirichlet(np.full(G, 2.0))
    means = rng.normal(0.0, spread, (G, n))
    A = rng.normal(size=(G, n, n))
    covs = A @ np.swapaxes(A, 1, 2) / n + 0.2 * np.eye(n)
    return GaussianMixture(weights, means, covs)


def gm_suite(count: int = 100, base_seed: int = 1000) -> list[GaussianMixture]:
    """Seeded GMs cycling through n in {1, 2, 4} and G in 1..5."""
    dims = (1, 2, 4)
    return [random_gm(base_seed + i, dims[i % 3], 1 + (i // 3) % 5) for i in range(count)]


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
