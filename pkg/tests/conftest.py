import hashlib
from pathlib import Path

import numpy as np
import pytest

from primscene.config import Config
from primscene.synth import make_ring_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def small_config():
    """Config tuned for fast tests: small tiles, coarse tessellation."""
    return Config(tile_w=32, tile_h=32, tessellation_level=6)


@pytest.fixture
def ring_dataset(tmp_path):
    """12 cameras on a ring around the origin, 64x48 frames."""
    return make_ring_dataset(tmp_path / "ds", n_frames=12, width=64, height=48)


def dataset_content_hash(root: str | Path) -> str:
    """Hash of the dataset's manifest and images, ignoring pipeline work files."""
    root = Path(root)
    h = hashlib.sha256()
    h.update((root / "transforms.json").read_bytes())
    for png in sorted(root.glob("*.png")):
        h.update(png.name.encode())
        h.update(png.read_bytes())
    return h.hexdigest()


@pytest.fixture
def content_hash():
    return dataset_content_hash


# One verdict line per acceptance criterion, shown after the run regardless
# of output capturing (test-time prints would be swallowed by fd capture).
ACCEPTANCE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_VERDICTS):
            terminalreporter.write_line(line)
