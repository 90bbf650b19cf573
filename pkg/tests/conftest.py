import numpy as np
import pytest

from pilotmix import codec
from pilotmix.core import DegreeDistribution, ProtocolConfig, ReceiverMode


def toy_config(**overrides) -> ProtocolConfig:
    base = dict(
        n_slots=4,
        n_pilots=8,
        n_antennas=32,
        payload_symbols=codec.PAYLOAD_SYMBOLS,
        lam=DegreeDistribution.concentrated(2),
        psi=DegreeDistribution.concentrated(2),
        snr_db=10.0,
        receiver_mode=ReceiverMode.NESTED,
        framed=True,
    )
    base.update(overrides)
    return ProtocolConfig(**base)


def crandn(rng: np.random.Generator, *shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
