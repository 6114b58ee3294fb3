from __future__ import annotations

import pytest

from mertonsurf.synthetic import generate_fixture


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    """One deterministic synthetic fixture shared by the integration tests."""
    outdir = tmp_path_factory.mktemp("fixtures")
    generate_fixture(outdir, seed=7)
    return outdir


@pytest.fixture()
def out_dir(tmp_path):
    target = tmp_path / "out"
    target.mkdir()
    return target
