import math

import pytest

from preimage_gibbs import (LatticeMap, LocallyConstantPotential, MarkovOracle, ShiftSystem,
                            TrigPolynomial, TrigPotential)

BETA = math.log(3)

CAT = ((2, 1), (1, 1))
FOLDED = ((0, -2), (1, 4))
DIAG = ((2, 0), (0, 3))


@pytest.fixture(scope="session")
def full2():
    return ShiftSystem.full(2)


@pytest.fixture(scope="session")
def golden():
    return ShiftSystem.golden_mean()


@pytest.fixture(scope="session")
def beta_phi():
    return LocallyConstantPotential.symbol_weight(2, BETA)


@pytest.fixture(scope="session")
def zero_phi():
    return LocallyConstantPotential.zero(2)


@pytest.fixture(scope="session")
def beta_oracle(full2, beta_phi):
    return MarkovOracle(full2, beta_phi)


@pytest.fixture(scope="session")
def cat_map():
    return LatticeMap(CAT)


@pytest.fixture(scope="session")
def folded_map():
    return LatticeMap(FOLDED)


@pytest.fixture(scope="session")
def diag_map():
    return LatticeMap(DIAG)


@pytest.fixture(scope="session")
def perturbed_folded():
    p = TrigPolynomial(((1, 0), (0, 1)), ((0.5, 0.2), (0.1, -0.3)))
    return LatticeMap(FOLDED, p, 0.01)


@pytest.fixture(scope="session")
def torus_zero():
    return TrigPotential(0.0)


# ---------------------------------------------------------------------------
# acceptance verdicts, printed once at the end of the run

ACCEPTANCE_LINES = {}


@pytest.fixture
def verdict():
    def record(number: int, ok: bool, detail: str):
        line = f"ACCEPTANCE #{number} {'PASS' if ok else 'FAIL'}: {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
