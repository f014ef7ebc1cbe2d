from __future__ import annotations

import numpy as np
import pytest

from perspred.core import SparseLinearClassifier
from perspred.synth import SyntheticSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def planted_spec(d=5, weights=(1.0, 1.0), coords=(0, 1), **kw) -> SyntheticSpec:
    v = np.zeros(d)
    v[0] = 1.0
    c = SparseLinearClassifier(tuple(zip(coords, weights)), len(coords))
    return SyntheticSpec(dim=d, planted_normal=v, planted_classifier=c, **kw)


@pytest.fixture
def verdict(request):
    """Record one acceptance-criterion outcome as a PASS/FAIL line."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(name: str, ok: bool | None, detail: str) -> bool | None:
        tag = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"{tag}  {name}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
