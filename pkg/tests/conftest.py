from pathlib import Path

import pytest

from sparseproj.data import load_idx

DATA = Path(__file__).parent / "data"
IMAGES = DATA / "mnist5k-images-idx3-ubyte.gz"
LABELS = DATA / "mnist5k-labels-idx1-ubyte.gz"


@pytest.fixture(scope="session")
def digits():
    return load_idx(IMAGES, LABELS)

# pass/fail lines of the acceptance criteria, echoed at the end of the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
