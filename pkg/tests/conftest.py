import functools

import pytest

from morawetz import simulate as sim
from morawetz.spectral import reference_problem, shoot, verify_condition11


@pytest.fixture(scope="session")
def ref_prob():
    return reference_problem()


@pytest.fixture(scope="session")
def ref_traj(ref_prob):
    return shoot(ref_prob, margin=2.0)


@pytest.fixture(scope="session")
def ref_cert(ref_prob, ref_traj):
    return verify_condition11(ref_prob, margin=2.0, trajectory=ref_traj)


@functools.lru_cache(maxsize=None)
def preset_run(name: str, refinement: int = 0):
    """Simulation presets are expensive; share one run per (name, level) across the session."""
    return sim.run(sim.preset(name, refinement), check_pairing_bound=(refinement == 0))


@pytest.fixture(scope="session")
def run_preset():
    return preset_run


ACCEPTANCE = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
