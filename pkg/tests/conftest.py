import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fluency.dsp import FeatureConfig  # noqa: E402
from fluency.segmentation import build_dataset, load_manifest  # noqa: E402
from fluency.synth import DEFAULT_PROFILES, generate_corpus  # noqa: E402

SR = 22050


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """20 synthetic segments per class, seed 42."""
    out = tmp_path_factory.mktemp("corpus")
    generate_corpus(out, DEFAULT_PROFILES, (20, 20, 20), seed=42)
    return out


@pytest.fixture(scope="session")
def small_dataset(small_corpus):
    return build_dataset(load_manifest(small_corpus / "manifest.csv"), FeatureConfig())


@pytest.fixture
def sine():
    def make(freq=440.0, amp=1.0, seconds=5.0, sr=SR):
        t = np.arange(int(round(seconds * sr))) / sr
        return amp * np.sin(2 * np.pi * freq * t)
    return make


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
