import dataclasses

import numpy as np
import pytest

from prunekit.encoder import EncoderConfig
from prunekit.scenes import SceneConfig, generate_scene


@pytest.fixture(scope="session")
def trained_router():
    from prunekit.training import train_scene_router

    return train_scene_router()


@pytest.fixture(scope="session")
def small_scene():
    """Short 112x112 sequence with the default disk."""
    return generate_scene(
        SceneConfig(n_frames=4, height=112, width=112, size=20.0, start=(40.0, 40.0))
    )


@pytest.fixture(scope="session")
def small_encoder():
    return EncoderConfig()


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.PCG64(1234))


def short(video, n):
    return dataclasses.replace(video, frames=video.frames[:n], gt_masks=video.gt_masks[:n])
