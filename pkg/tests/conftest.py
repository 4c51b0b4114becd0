import numpy as np
import pytest

from memristor_mlp import dataset
from memristor_mlp.device import OxideProfile, synth_device_array
from memristor_mlp.network import Topology, init_random


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def zro2():
    return OxideProfile.zro2_y()


@pytest.fixture
def sio2():
    return OxideProfile.sio2()


@pytest.fixture
def topology():
    return Topology()


@pytest.fixture
def small_net(topology, rng):
    return init_random(topology, rng, scale=0.5)


@pytest.fixture
def train_data():
    samples = dataset.generate(20, 0.25, np.random.default_rng(7))
    return dataset.to_arrays(samples)


@pytest.fixture
def devices(zro2):
    return synth_device_array(zro2, 32, np.random.default_rng(99))
