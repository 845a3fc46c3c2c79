import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from chainbell import _kernels  # noqa: E402

BACKENDS = sorted(_kernels.BACKENDS)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param
