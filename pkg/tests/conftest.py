import pytest

from support import server_spec


@pytest.fixture
def echo_spec():
    return server_spec("echo_server.py")


@pytest.fixture
def dup_spec():
    return server_spec("dup_server.py")


@pytest.fixture
def silent_spec():
    return server_spec("silent_server.py")
