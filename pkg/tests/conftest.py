import itertools

import numpy as np
import pytest

from mctsdecode.gf2 import LinearCode, build_ebch_32_16

HAMMING_7_4 = np.array([
    [1, 0, 0, 0, 1, 1, 0],
    [0, 1, 0, 0, 1, 0, 1],
    [0, 0, 1, 0, 0, 1, 1],
    [0, 0, 0, 1, 1, 1, 1],
], dtype=np.uint8)


@pytest.fixture(scope="session")
def ebch():
    return build_ebch_32_16()


@pytest.fixture(scope="session")
def hamming():
    return LinearCode(HAMMING_7_4, "hamming7")


def all_codewords(code):
    """Every codeword, messages in lexicographic order (independent of the package)."""
    msgs = np.array(list(itertools.product([0, 1], repeat=code.k)), dtype=np.int64)
    return msgs, (msgs @ code.generator.astype(np.int64)) % 2


def brute_mld(code, r):
    _, words = all_codewords(code)
    d = ((1.0 - 2.0 * words - np.asarray(r)) ** 2).sum(axis=1)
    return words[int(np.argmin(d))]


_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(number, passed, detail)``."""
    store = request.config.stash.setdefault(_CRITERIA, {})

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        store[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_CRITERIA, {})
    if store:
        terminalreporter.write_sep("-", "acceptance criteria")
        for number in sorted(store):
            terminalreporter.write_line(store[number])
