from __future__ import annotations

import numpy as np
import pytest

from promptmatte.model import MattingModel, ModelConfig


@pytest.fixture(scope="session")
def tiny_config() -> ModelConfig:
    return ModelConfig(
        input_size=32, embed_dim=8, heads=2, encoder_blocks=1, decoder_layers=1,
        pixel_dims=(8, 8, 4), seed=0,
    )


@pytest.fixture(scope="session")
def tiny_model(tiny_config) -> MattingModel:
    model = MattingModel(tiny_config)
    model.eval()
    return model


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
