import numpy as np
import pytest

from koebecenter import koebe


@pytest.fixture(scope="session")
def canonical():
    return {name: koebe.generate_canonical(name) for name in koebe.SOLIDS}


@pytest.fixture(scope="session")
def perturbed(canonical):
    """Three rapidity-1 Mobius images of every canonical solid."""
    return {(name, seed): koebe.random_perturbation(s, seed, 1.0)[0]
            for name, s in canonical.items() for seed in range(3)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


@pytest.fixture
def acceptance():
    """Record one verdict line per acceptance criterion."""
    def record(number: int, title: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE[number] = (bool(passed), title, detail)
        print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {title} {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        ok, title, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"{k:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
