import pathlib

import pytest

from zenogas.scenarios import GammaCache

REPO_ROOT = pathlib.Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def gamma_cache():
    """Shared disk cache so expensive multiband rates compute once."""
    return GammaCache(REPO_ROOT / ".zenogas-cache")
