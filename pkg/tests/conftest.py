import json

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


TINY_CONFIG = {
    "seed": 3,
    "dataset": {"image_size": 32, "originals_per_class": 8, "train_per_class": 10,
                "test1_per_class": 4, "test2_per_class": 1},
    "backbone": {"base_channels": 4},
    "selections": [8, 4, 2, 1],
    "fpn_scale": "absolute",
    "fpn_size": 16,
    "variant_fpn_size": 8,
    "batch_size": 8,
    "epochs": 2,
}


@pytest.fixture
def tiny_config(tmp_path):
    """A config file for a corpus and network small enough to train in about a second."""
    cfg = dict(TINY_CONFIG, corpus_dir=str(tmp_path / "corpus"), output_dir=str(tmp_path / "runs"))
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(cfg))
    return path


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects ``(number, title, passed, detail)`` rows for the acceptance summary."""
    return request.config.stash.setdefault(ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, config):
    rows = config.stash.get(ACCEPTANCE_KEY, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(rows, key=lambda r: r[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {title} -- {detail}")
