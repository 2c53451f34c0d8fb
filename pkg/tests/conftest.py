import pytest

from citemap import synthetic


@pytest.fixture(scope="session")
def synthetic_export(tmp_path_factory):
    path = tmp_path_factory.mktemp("synthetic") / "export.txt"
    synthetic.write_export(path)
    return path
