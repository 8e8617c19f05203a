import pytest

from imagegen import natural_image


@pytest.fixture
def natural_fixtures():
    return [natural_image(s) for s in (1, 2, 3)]
