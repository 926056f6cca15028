import pytest

from toyfixture import build_toy_fixture


@pytest.fixture(scope="session")
def toy(tmp_path_factory):
    """The bundled toy dataset, built once per session."""
    root = tmp_path_factory.mktemp("toy")
    return build_toy_fixture(root / "data")
