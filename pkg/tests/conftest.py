import numpy as np
import pytest

from framedup.forgery import synthetic_clip
from framedup.media_io import VideoClip


def noise_clip(n_frames, seed=0, height=24, width=32, channels=3):
    """Independent uniform-noise frames: no structure shared between frames."""
    rng = np.random.default_rng(seed)
    return VideoClip.from_array(rng.integers(0, 256, (n_frames, height, width, channels), dtype=np.uint8))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def seed_clip():
    return synthetic_clip(300, seed=41)



_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Print a criterion verdict and keep it for the end-of-run summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(criterion: int, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
        print(line)
        lines.append(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
