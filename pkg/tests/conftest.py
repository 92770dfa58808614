import numpy as np
import pytest

from videocloak import (
    IdentityEncoder,
    SurrogateEncoder,
    SurrogateEncoderConfig,
    synth,
)


@pytest.fixture(scope="session")
def surrogate():
    return SurrogateEncoder(SurrogateEncoderConfig(seed=42))


@pytest.fixture(scope="session")
def small_surrogate():
    # fits 16x16 frames: pooled count = 4*4*3 = 48
    return SurrogateEncoder(SurrogateEncoderConfig(seed=42, dim=32))


@pytest.fixture(scope="session")
def identity8():
    return IdentityEncoder((8, 8, 3))


@pytest.fixture(scope="session")
def static_seq():
    return synth.static(20, 64, 42)


def random_frame(rng, h=8, w=8):
    return rng.uniform(0.0, 1.0, (h, w, 3))
