import numpy as np
import pytest

from pilotsim import NetworkConfig, associate_aps, generate_drop, normalize_powers


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def desk_config():
    """Factory for the reduced acceptance-scale configuration."""
    def make(**over):
        base = dict(num_aps=30, num_ues=50, antennas_per_ap=8, pilot_length=7)
        base.update(over)
        return NetworkConfig(**base)
    return make


@pytest.fixture
def desk_drop(desk_config):
    """Factory: one fully associated desk-scale drop."""
    def make(seed=7, **over):
        cfg = desk_config(**over)
        real = generate_drop(cfg, seed)
        powers = normalize_powers(cfg)
        assoc = associate_aps(real, cfg.assoc_threshold)
        return cfg, real, powers, assoc
    return make
