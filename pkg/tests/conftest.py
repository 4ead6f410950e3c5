from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from collab_ensemble.features import FeatureVector, ItemCatalog

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def dense_catalog(rows, prefix="i") -> ItemCatalog:
    """Catalog of dense vectors with ids ``<prefix>0, <prefix>1, ...``."""
    rows = np.asarray(rows, dtype=np.float64)
    return ItemCatalog(
        {f"{prefix}{k}": FeatureVector.from_dense(r) for k, r in enumerate(rows)}, rows.shape[1]
    )


@pytest.fixture
def line_catalog() -> ItemCatalog:
    """Eight items on a line, the first four on the positive side."""
    xs = [2.0, 1.5, 1.0, 0.5, -0.5, -1.0, -1.5, -2.0]
    return dense_catalog([[x, 1.0] for x in xs])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
