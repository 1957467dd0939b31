import pytest

from smellprobe.harness import load_profile_library, spawn


@pytest.fixture(scope="session")
def library():
    return load_profile_library()


@pytest.fixture
def endpoints():
    """Spawn fixture endpoints and guarantee they are torn down."""
    spawned = []

    def _spawn(profile):
        endpoint = spawn(profile)
        spawned.append(endpoint)
        return endpoint

    yield _spawn
    for endpoint in spawned:
        endpoint.shutdown()
