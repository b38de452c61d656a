import pytest

from dragflow import tensor


@pytest.fixture(autouse=True)
def fresh_tape():
    # tests share one process; never let a previous graph leak in
    tensor.reset_tape()
    yield
    tensor.reset_tape()
