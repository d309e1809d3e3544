from __future__ import annotations

import pytest

from objsearch.assets import AssetContext


@pytest.fixture(scope="session")
def ctx() -> AssetContext:
    return AssetContext.load()
