import numpy as np
import pytest

from memnet.circuit import ArchitectureSpec
from memnet.evolution import Candidate
from memnet.codes import Codebook
from memnet.imaging import GlyphSet, load_glyphs

ACCEPTANCE = []


def record(criterion: str, passed: bool, detail: str = ""):
    """Collect one acceptance line; printed in the terminal summary."""
    ACCEPTANCE.append((criterion, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {criterion}  {detail}")


@pytest.fixture(scope="session")
def glyphs():
    return load_glyphs()


def lexicode(n_words: int, length: int = 12, distance: int = 3) -> np.ndarray:
    """Greedy binary code with the given minimum distance."""
    words = []
    for v in range(1 << length):
        bits = np.array([(v >> (length - 1 - i)) & 1 for i in range(length)], dtype=np.uint8)
        if all(np.count_nonzero(bits != w) >= distance for w in words):
            words.append(bits)
            if len(words) == n_words:
                break
    return np.array(words)


TOY_ARCH = ArchitectureSpec(12, (1,))
# R_in = 1, R_o = 10: ink gives V = 1/1.1 > 0.5 -> 0, blank gives 0 V -> 1.
TOY_RSET = np.tile([1.0, 10.0], 12)


@pytest.fixture(scope="session")
def toy_glyphs():
    """26 3x4 'glyphs' whose pixels are codewords at distance >= 3."""
    words = lexicode(26)
    return GlyphSet(words.reshape(26, 3, 4), provenance="lexicode")


@pytest.fixture
def toy_candidate(toy_glyphs):
    codes = 1 - toy_glyphs.bitmaps.reshape(26, 12)
    return Candidate(TOY_RSET.copy(), 0.0, Codebook(codes))
