import numpy as np
import pytest

from hdrstitch.core import PanoLayout, synthesize_test_scene


@pytest.fixture(scope="session")
def small_layout() -> PanoLayout:
    # Small enough that full stitches run in milliseconds.
    return PanoLayout(
        view_width=64, view_height=48, overlap12_width=20, overlap23_width=24
    )


@pytest.fixture(scope="session")
def full_layout() -> PanoLayout:
    return PanoLayout(
        view_width=640, view_height=480, overlap12_width=200, overlap23_width=200
    )


@pytest.fixture(scope="session")
def small_scene(small_layout):
    return synthesize_test_scene(1, small_layout)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
